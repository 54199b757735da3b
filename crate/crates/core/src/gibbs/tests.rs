use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::nonlinearity::Interaction;
use crate::rng::Purpose;
use crate::symcone::SymMatrix;

fn special(n: usize, k: usize, p: u32) -> ModelSpec {
    ModelSpec::new(
        n,
        Interaction::special_diagonal(k, p),
        Prior::rademacher(k),
        11,
    )
    .unwrap()
}

fn scalar_h(h: f64) -> SymMatrix {
    SymMatrix::diag(&[h])
}

#[test]
fn origin_gives_prior() {
    let prior = Prior::new(
        2,
        vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.5, 0.5]],
        vec![0.5, 0.25, 0.25],
    )
    .unwrap();
    let ms = ModelSpec::new(3, Interaction::special_diagonal(2, 2), prior.clone(), 1).unwrap();
    let ds = disorder_sample(&ms, Purpose::Disorder, 0);
    let g = gibbs_exact(&ms, 0.0, &SymMatrix::zeros(2), &ds).unwrap();
    assert!(g.log_z.abs() < 1e-12);
    let m = prior.mean();
    for i in 0..3 {
        for j in 0..2 {
            assert_abs_diff_eq!(g.mean_x[(i, j)], m[j], epsilon = 1e-12);
        }
    }
    assert!(g.weight_sum_error < 1e-12);
}

#[test]
fn single_spin_matches_log_cosh() {
    let ms = special(1, 1, 2);
    for idx in 0..5 {
        let base = disorder_sample(&ms, Purpose::Disorder, idx);
        for &h in &[0.1, 0.5, 1.7] {
            let ds = base.observe(&ms, 0.0, &scalar_h(h)).unwrap();
            let g = gibbs_exact(&ms, 0.0, &scalar_h(h), &ds).unwrap();
            let big_x = ds.x[(0, 0)];
            let z = ds.z[(0, 0)];
            let want = (2.0 * h * big_x + (2.0 * h).sqrt() * z).cosh().ln() - h;
            assert_abs_diff_eq!(g.log_z, want, epsilon = 1e-12);
        }
    }
}

#[test]
fn scalar_p1_hamiltonian() {
    let ms = ModelSpec::new(
        1,
        Interaction::special_diagonal(1, 1),
        Prior::scalar(&[1.0, -0.5], &[0.5, 0.5]).unwrap(),
        3,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ds = draw_disorder(&ms, 0.7, &SymMatrix::zeros(1), &mut rng).unwrap();
    let y = ds.y()[(0, 0)];
    for &x in &[1.0, -0.5] {
        let xm = DMatrix::from_element(1, 1, x);
        let want = (2.0 * 0.7f64).sqrt() * x * y - 0.7 * x * x;
        assert_abs_diff_eq!(
            hamiltonian(&ms, 0.7, &SymMatrix::zeros(1), &xm, &ds),
            want,
            epsilon = 1e-13
        );
    }
}

#[test]
fn origin_hamiltonian_vanishes() {
    let ms = special(3, 2, 2);
    let ds = disorder_sample(&ms, Purpose::Disorder, 2);
    let table = ConfigTable::build(&ms, &ds).unwrap();
    for c in 0..table.len() {
        assert_eq!(
            hamiltonian(&ms, 0.0, &SymMatrix::zeros(2), &table.config(c), &ds),
            0.0
        );
    }
}

#[test]
fn xtilde_matches_explicit_kronecker() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ia = Interaction::random_general(&mut rng, 2, 2, 3);
    let x = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut kron = DMatrix::zeros(4, 4);
    for i1 in 0..2 {
        for i2 in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    kron[(i1 * 2 + i2, j1 * 2 + j2)] = x[(i1, j1)] * x[(i2, j2)];
                }
            }
        }
    }
    let want = &kron * ia.a();
    assert!((xtilde(&ia, &x) - want).norm() < 1e-13);
}

#[test]
fn observation_reproduces_channel() {
    let ms = special(3, 1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = scalar_h(0.3);
    let ds = draw_disorder(&ms, 0.8, &h, &mut rng).unwrap();
    let want = xtilde(ms.ia(), &ds.x) * (2.0 * 0.8 / 3.0f64).sqrt() + &ds.w;
    assert_eq!(ds.y(), &want);
    let ybar = &ds.x * (0.6f64).sqrt() + &ds.z;
    assert!((ds.ybar() - ybar).norm() < 1e-14);
}

fn table_vs_direct(ms: &ModelSpec, sc: &Scoring) {
    let base = disorder_sample(ms, Purpose::Disorder, 5);
    let ds = base.observe(ms, sc.t_data, &sc.h_data).unwrap();
    let table = ConfigTable::build(ms, &ds).unwrap();
    for c in 0..table.len() {
        let direct = hamiltonian(ms, sc.t_score, &sc.h_score, &table.config(c), &ds);
        let cached = table.hamiltonian_of(c, sc);
        assert!(
            (direct - cached).abs() < 1e-10 * (1.0 + direct.abs()),
            "config {c}: {direct} vs {cached}"
        );
    }
}

#[test]
fn cached_hamiltonian_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h1 = SymMatrix::diag(&[0.4]);
    let h2 = SymMatrix::from_rows(&[vec![0.5, 0.2], vec![0.2, 0.3]]).unwrap();
    let h2b = SymMatrix::from_rows(&[vec![0.1, -0.05], vec![-0.05, 0.6]]).unwrap();
    for p in 1..=3u32 {
        let ms1 = ModelSpec::new(
            4,
            Interaction::random_general(&mut rng, 1, p, 2),
            Prior::scalar(&[1.0, -1.0, 0.3], &[0.3, 0.3, 0.4]).unwrap(),
            5,
        )
        .unwrap();
        table_vs_direct(&ms1, &Scoring::matched(0.9, &h1));
        table_vs_direct(
            &ms1,
            &Scoring {
                t_data: 0.4,
                h_data: h1.clone(),
                t_score: 1.3,
                h_score: scalar_h(0.05),
            },
        );
        let ms2 = ModelSpec::new(
            3,
            Interaction::random_general(&mut rng, 2, p, 2),
            Prior::rademacher(2),
            5,
        )
        .unwrap();
        table_vs_direct(&ms2, &Scoring::matched(0.7, &h2));
        table_vs_direct(
            &ms2,
            &Scoring {
                t_data: 1.1,
                h_data: h2.clone(),
                t_score: 0.2,
                h_score: h2b.clone(),
            },
        );
    }
    let ns = build_nonsym_spec(
        2,
        &Prior::rademacher(1),
        &Prior::scalar(&[1.0, -0.5], &[0.4, 0.6]).unwrap(),
        3,
    )
    .unwrap();
    table_vs_direct(&ns, &Scoring::matched(0.6, &h2));
}

#[test]
fn tensor_route_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (k, p) in [(1usize, 2u32), (2, 2), (1, 3), (2, 1)] {
        let ms = ModelSpec::new(
            3,
            Interaction::random_general(&mut rng, k, p, 2),
            Prior::rademacher(k),
            6,
        )
        .unwrap();
        let h = SymMatrix::identity(k).scale(0.4);
        let ds = disorder_sample(&ms, Purpose::Disorder, 1);
        let table = ConfigTable::build(&ms, &ds).unwrap();
        let sc = Scoring::matched(0.8, &h);
        let g = table.summary(&ms, &sc, false);
        let double = table.h_overlap_double_sum(&ms, &sc);
        assert!((g.mean_h_overlap - double).abs() < 1e-10 * (1.0 + double.abs()));
    }
}

#[test]
fn dt_at_origin_is_one_over_n() {
    let ms = special(3, 1, 2);
    let r = dt_fbar(&ms, 0.0, &SymMatrix::zeros(1), 4).unwrap();
    assert_abs_diff_eq!(r.mean, 1.0 / 3.0, epsilon = 1e-14);
    assert!(r.stderr < 1e-14);
}

#[test]
fn gradient_and_nishimori_vanish_at_origin() {
    let ms = special(3, 2, 2);
    let z = SymMatrix::zeros(2);
    let g = grad_fbar(&ms, 0.0, &z, 5).unwrap();
    assert!(g.mean.norm() < 1e-14);
    let ms1 = special(4, 1, 2);
    let nr = nishimori_gap(&ms1, 0.0, &SymMatrix::zeros(1), 5).unwrap();
    assert!(nr.scalar.mean.abs() < 1e-13);
    assert!(nr.matrix.mean.norm() < 1e-13);
}

#[test]
fn mean_rows_bounded() {
    let ms = special(3, 2, 2);
    let ds = disorder_sample(&ms, Purpose::Disorder, 0)
        .observe(&ms, 1.2, &SymMatrix::identity(2))
        .unwrap();
    let g = gibbs_exact(&ms, 1.2, &SymMatrix::identity(2), &ds).unwrap();
    for i in 0..3 {
        assert!(g.mean_x.row(i).norm() <= 2f64.sqrt() + 1e-12);
    }
}

#[test]
fn budget_and_prior_validation() {
    let err = ModelSpec::new(
        30,
        Interaction::special_diagonal(1, 2),
        Prior::rademacher(1),
        0,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        crate::HjError::EnumerationBudgetExceeded { .. }
    ));
    assert!(Prior::scalar(&[1.5], &[1.0]).is_err());
    assert!(Prior::scalar(&[1.0, -1.0], &[0.5, 0.6]).is_err());
    assert!(Prior::scalar(&[1.0, -1.0], &[1.5, -0.5]).is_err());
    let ms = special(2, 1, 2);
    assert!(fbar(&ms, -1.0, &SymMatrix::zeros(1), 4).is_err());
    assert!(fbar(&ms, 1.0, &scalar_h(-0.1), 4).is_err());
    assert!(fbar(&ms, 1.0, &scalar_h(0.1), 1).is_err());
}

#[test]
fn psi_at_zero_and_against_monte_carlo() {
    let ms = special(2, 1, 2);
    assert!(psi_decoupled(&ms, &SymMatrix::zeros(1), 32).unwrap().abs() < 1e-14);
    assert!(psi_decoupled(&ms, &scalar_h(0.5), 8).is_err());
    let psi = psi_decoupled(&ms, &scalar_h(0.5), 40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let samples: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (1.0 + z).cosh().ln() - 0.5
        })
        .collect();
    let mc = crate::estimate::EstimatorResult::from_samples(&samples);
    assert!(
        (psi - mc.mean).abs() <= 3.0 * mc.stderr,
        "{psi} vs {} +- {}",
        mc.mean,
        mc.stderr
    );
}

#[test]
fn cross_derivative_vanishes_for_product_measure() {
    let ns = build_nonsym_spec(
        2,
        &Prior::rademacher(1),
        &Prior::scalar(&[1.0, -0.5], &[1.0 / 3.0, 2.0 / 3.0]).unwrap(),
        2,
    )
    .unwrap();
    let r = cross_derivative(&ns, 0.0, &SymMatrix::zeros(2), 4).unwrap();
    assert!(r.mean.abs() < 1e-14);
    let r = cross_derivative(&ns, 1.0, &SymMatrix::identity(2).scale(0.3), 20).unwrap();
    assert!(r.mean > 0.0);
}

#[test]
fn estimators_are_deterministic() {
    let ms = special(4, 1, 2);
    let h = scalar_h(0.5);
    let a = fbar(&ms, 0.5, &h, 50).unwrap();
    let b = fbar(&ms, 0.5, &h, 50).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn index_of_inverts_config() {
    let ms = ModelSpec::new(
        3,
        Interaction::special_diagonal(2, 2),
        Prior::new(
            2,
            vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.5, 0.5]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap(),
        1,
    )
    .unwrap();
    let ds = disorder_sample(&ms, Purpose::Disorder, 0);
    let table = ConfigTable::build(&ms, &ds).unwrap();
    let sc = Scoring::matched(0.7, &SymMatrix::identity(2).scale(0.2));
    let lw = table.log_weights(&sc);
    for c in 0..table.len() {
        assert_eq!(table.index_of(&table.config(c)), Some(c));
        assert_eq!(table.log_weight_of(c, &sc).to_bits(), lw[c].to_bits());
    }
    assert_eq!(table.index_of(&DMatrix::from_element(3, 2, 0.25)), None);
}
