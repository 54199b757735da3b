use hjcone::gibbs::*;
use hjcone::nonlinearity::Interaction;
use hjcone::symcone::SymMatrix;

fn wigner(n: usize) -> ModelSpec {
    ModelSpec::new(
        n,
        Interaction::special_diagonal(1, 2),
        Prior::rademacher(1),
        2024,
    )
    .unwrap()
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[test]
fn dt_formula_matches_finite_difference() {
    let ms = wigner(4);
    let h = SymMatrix::diag(&[0.5]);
    let formula = dt_fbar(&ms, 0.5, &h, 2000).unwrap();
    let fd = fd_dt_fbar(&ms, 0.5, &h, 2000, FD_STEP_T).unwrap();
    assert!(
        (formula.mean - fd.mean).abs() <= 3.0 * combined(formula.stderr, fd.stderr),
        "{formula:?} vs {fd:?}"
    );
}

#[test]
fn gradient_formula_matches_finite_difference() {
    let ms = wigner(4);
    let (t, h0) = (0.5, 0.5);
    let grad = grad_fbar(&ms, t, &SymMatrix::diag(&[h0]), 2000).unwrap();
    let e = FD_STEP_T;
    let c = 1.0 / (2.0 * e);
    let fd = fbar_combination(
        &ms,
        &[
            (t, SymMatrix::diag(&[h0 + e])),
            (t, SymMatrix::diag(&[h0 - e])),
        ],
        &[c, -c],
        2000,
    )
    .unwrap();
    let g = grad.entry(0, 0);
    assert!(
        (g.mean - fd.mean).abs() <= 3.0 * combined(g.stderr, fd.stderr),
        "{g:?} vs {fd:?}"
    );
}

#[test]
fn free_energy_at_zero_snr_decouples_into_rows() {
    for n in [2, 4] {
        let ms = wigner(n);
        for h in [0.25, 1.0] {
            let hm = SymMatrix::diag(&[h]);
            let psi = psi_decoupled(&ms, &hm, 40).unwrap();
            let f = fbar(&ms, 0.0, &hm, 2000).unwrap();
            assert!(
                (f.mean - psi).abs() <= 3.0 * f.stderr,
                "N = {n}, h = {h}: {f:?} vs {psi}"
            );
        }
    }
}

#[test]
fn residual_identity_single_row() {
    let ms = wigner(1);
    let r = residual_identity(&ms, 0.5, &SymMatrix::diag(&[0.5]), 2000, FD_STEP_T).unwrap();
    assert!(r.passes(3.0), "{r:?}");
}

#[test]
fn residual_right_side_nonnegative_for_convex_h() {
    let ms = wigner(3);
    let r = residual_identity(&ms, 0.8, &SymMatrix::diag(&[0.3]), 1000, FD_STEP_T).unwrap();
    assert!(r.rhs >= -3.0 * r.rhs_stderr, "{r:?}");
}

#[test]
fn cross_derivative_matches_mixed_difference() {
    let ns = build_nonsym_spec(3, &Prior::rademacher(1), &Prior::rademacher(1), 99).unwrap();
    let h = SymMatrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.4]]).unwrap();
    let t = 1.0;
    let cd = cross_derivative(&ns, t, &h, 2000).unwrap();
    let e11 = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let e22 = SymMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let fd = mixed_second_difference(&ns, t, &h, &e11, &e22, 2000, FD_STEP_MATRIX).unwrap();
    assert!(
        (cd.mean - fd.mean).abs() <= 3.0 * combined(cd.stderr, fd.stderr),
        "{cd:?} vs {fd:?}"
    );
}

#[test]
fn controlled_sweep_agrees_with_plain_mean() {
    let ms = wigner(4);
    let pts = vec![
        (0.5, SymMatrix::diag(&[0.5])),
        (1.5, SymMatrix::diag(&[0.25])),
        (0.0, SymMatrix::diag(&[1.0])),
    ];
    let plain = fbar_sweep(&ms, &pts, 3000).unwrap();
    let cv = fbar_sweep_controlled(&ms, &pts, 3000, 300).unwrap();
    for (a, b) in plain.iter().zip(&cv) {
        assert!(
            (a.mean - b.mean).abs() <= 3.0 * combined(a.stderr, b.stderr),
            "{a:?} vs {b:?}"
        );
        assert!(b.stderr <= a.stderr);
    }
}

#[test]
fn prior_mean_of_xtilde_for_rademacher_is_the_diagonal() {
    let ms = wigner(3);
    let m = prior_mean_xtilde(&ms);
    for r in 0..9 {
        assert_eq!(m[(r, 0)], if r / 3 == r % 3 { 1.0 } else { 0.0 });
    }
}
