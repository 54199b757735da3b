use std::sync::Arc;

use proptest::prelude::*;

use hjcone::coneconjugate::{biconjugate, fenchel, monotone_convex_report, GridFunction};
use hjcone::nonlinearity::Interaction;
use hjcone::symcone::{cone_grid, is_psd, project_psd, ConeGrid, SymMatrix};

fn sym(k: usize) -> impl Strategy<Value = SymMatrix> {
    let d = k * (k + 1) / 2;
    prop::collection::vec(-3.0f64..3.0, d).prop_map(move |c| SymMatrix::from_coords(k, &c).unwrap())
}

fn psd(k: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, k * k).prop_map(move |g| {
        let m = nalgebra::DMatrix::from_row_slice(k, k, &g);
        SymMatrix::sym_part(&(&m * m.transpose()))
    })
}

fn small_grid(k: usize) -> Arc<ConeGrid> {
    Arc::new(
        if k == 1 {
            cone_grid(1, 2.0, 0.25)
        } else {
            cone_grid(2, 1.0, 0.5)
        }
        .unwrap(),
    )
}

fn grid_values(k: usize) -> impl Strategy<Value = (Arc<ConeGrid>, Vec<f64>)> {
    let g = small_grid(k);
    let n = g.len();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| (g.clone(), v))
}

proptest! {
    #[test]
    fn coordinates_are_an_isometry(a in sym(3), b in sym(3)) {
        let dense = (a.to_dense().component_mul(&b.to_dense())).sum();
        let coords: f64 = a.coords().iter().zip(b.coords()).map(|(x, y)| x * y).sum();
        prop_assert!((dense - coords).abs() <= 1e-12 * (1.0 + dense.abs()));
        prop_assert!((a.dot(&b) - dense).abs() <= 1e-12 * (1.0 + dense.abs()));
        let back = SymMatrix::from_coords(3, &a.basis_coords()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(a in sym(3), b in sym(3)) {
        let pa = project_psd(&a);
        let pb = project_psd(&b);
        prop_assert!(is_psd(&pa, 1e-10));
        prop_assert!(project_psd(&pa).axpy(-1.0, &pa).norm() <= 1e-10 * (1.0 + a.norm()));
        prop_assert!(pa.axpy(-1.0, &pb).norm() <= a.axpy(-1.0, &b).norm() + 1e-10);
    }

    #[test]
    fn cone_is_self_dual(a in psd(3), b in psd(3), s in sym(3)) {
        prop_assert!(a.dot(&b) >= -1e-10);
        if s.min_eigenvalue() < -1e-6 {
            let v = s.eigen().1.column(0).clone_owned();
            let witness = SymMatrix::sym_part(&(&v * v.transpose()));
            prop_assert!(s.dot(&witness) < 0.0);
        }
    }

    #[test]
    fn h_is_nonnegative_and_monotone(q in psd(2), d in psd(2), p in 1u32..5) {
        let ia = Interaction::special_diagonal(2, p);
        let hq = ia.hval(&q).unwrap();
        prop_assert!(hq >= -1e-12);
        prop_assert!(ia.hval(&(&q + &d)).unwrap() >= hq - 1e-9 * (1.0 + hq.abs()));
    }

    #[test]
    fn gradient_matches_difference_quotient(q in psd(2), a in sym(2), p in 1u32..5, seed in 0u64..1000) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for ia in [Interaction::special_diagonal(2, p), Interaction::random_general(&mut rng, 2, p, 2)] {
            let g = ia.hgrad(&q).unwrap();
            prop_assert!((ia.directional(&q, &a) - g.dot(&a)).abs() <= 1e-9 * (1.0 + g.norm() * a.norm()));
            let e = 1e-5;
            let fd = (ia.hval_dense(&q.axpy(e, &a).to_dense()) - ia.hval_dense(&q.axpy(-e, &a).to_dense())) / (2.0 * e);
            prop_assert!((fd - g.dot(&a)).abs() <= 1e-5 * (1.0 + g.norm() * a.norm()));
        }
    }

    #[test]
    fn conjugation_reverses_order((g, v) in grid_values(2), bump in prop::collection::vec(0.0f64..1.0, 64)) {
        let w: Vec<f64> = v.iter().zip(bump.iter().cycle()).map(|(x, b)| x + b).collect();
        let u = GridFunction::new(g.clone(), v, "u").unwrap();
        let larger = GridFunction::new(g.clone(), w, "w").unwrap();
        let us = fenchel(&u, &g).unwrap();
        let ws = fenchel(&larger, &g).unwrap();
        for (a, b) in us.values().iter().zip(ws.values()) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn biconjugate_is_a_minorant((g, v) in grid_values(1)) {
        let u = GridFunction::new(g.clone(), v, "u").unwrap();
        let bi = biconjugate(&u, &g).unwrap();
        for (a, b) in u.values().iter().zip(bi.values()) {
            prop_assert!(*b <= a + 1e-12);
        }
    }

    #[test]
    fn triple_conjugate_is_conjugate((g, v) in grid_values(2)) {
        let u = GridFunction::new(g.clone(), v, "u").unwrap();
        let once = fenchel(&u, &g).unwrap();
        let thrice = fenchel(&biconjugate(&u, &g).unwrap(), &g).unwrap();
        for (a, b) in once.values().iter().zip(thrice.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn conjugate_is_monotone_and_convex((g, v) in grid_values(2)) {
        let u = GridFunction::new(g.clone(), v, "u").unwrap();
        let r = monotone_convex_report(&fenchel(&u, &g).unwrap());
        prop_assert!(r.is_clean(), "{:?}", r);
        let r = monotone_convex_report(&biconjugate(&u, &g).unwrap());
        prop_assert!(r.is_clean(), "{:?}", r);
    }
}
