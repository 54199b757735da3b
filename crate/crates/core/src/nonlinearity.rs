//! The Hamilton-Jacobi nonlinearity `H(q) = (A A^T) . q^{(x) p}`.
//!
//! Tensor powers use the Kronecker convention of the observation model: the
//! multi-index `(j_1, ..., j_p)` is flattened with `j_1` most significant.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HjError, Result};
use crate::symcone::{is_psd, sample_psd, sym_dim, SymMatrix, PSD_TOL};

/// Above this many rows of `q^{(x) p}` the contraction runs index by index
/// instead of materializing the Kronecker power.
const MATERIALIZE_LIMIT: usize = 4096;

/// Step of the central differences used for the general Hessian form.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    General,
    /// `L = 1`, `A_j = 1` iff all indices of `j` coincide.
    SpecialDiagonal,
    /// `K = p = 2`, `A = (0, 1, 0, 0)`, giving `H(q) = q_11 q_22`.
    NonsymDemo,
}

/// Interaction matrix `A` of shape `K^p x L` with its Gram matrix `A A^T`.
#[derive(Debug, Clone)]
pub struct Interaction {
    k: usize,
    p: u32,
    l: usize,
    a: DMatrix<f64>,
    gram: DMatrix<f64>,
    kind: InteractionKind,
}

fn pow_usize(k: usize, p: u32) -> usize {
    k.checked_pow(p).expect("K^p overflows")
}

/// Kronecker product of the given factors, left to right.
fn kron_chain(factors: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = acc.kronecker(f);
    }
    acc
}

impl Interaction {
    pub fn new(k: usize, p: u32, a: DMatrix<f64>) -> Result<Self> {
        Self::with_kind(k, p, a, InteractionKind::General)
    }

    fn with_kind(k: usize, p: u32, a: DMatrix<f64>, kind: InteractionKind) -> Result<Self> {
        if k == 0 || p == 0 {
            return Err(HjError::InvalidArgument("K and p must be positive".into()));
        }
        let rows = pow_usize(k, p);
        if a.nrows() != rows || a.ncols() == 0 {
            return Err(HjError::DimensionMismatch {
                expected: rows,
                got: a.nrows(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(HjError::InvalidArgument(
                "non-finite interaction entry".into(),
            ));
        }
        let gram = &a * a.transpose();
        Ok(Interaction {
            k,
            p,
            l: a.ncols(),
            a,
            gram,
            kind,
        })
    }

    pub fn special_diagonal(k: usize, p: u32) -> Self {
        let rows = pow_usize(k, p);
        let a = DMatrix::from_fn(rows, 1, |r, _| {
            let digits = digits_of(r, k, p);
            if digits.iter().all(|&d| d == digits[0]) {
                1.0
            } else {
                0.0
            }
        });
        Self::with_kind(k, p, a, InteractionKind::SpecialDiagonal)
            .expect("valid special interaction")
    }

    pub fn nonsym_demo() -> Self {
        let a = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        Self::with_kind(2, 2, a, InteractionKind::NonsymDemo).expect("valid demo interaction")
    }

    /// Standard Gaussian `A` of shape `K^p x L`.
    pub fn random_general<R: Rng + ?Sized>(rng: &mut R, k: usize, p: u32, l: usize) -> Self {
        let a = DMatrix::from_fn(pow_usize(k, p), l, |_, _| rng.sample(StandardNormal));
        Self::new(k, p, a).expect("valid random interaction")
    }

    /// Same `A`, evaluated through the general Kronecker path.
    pub fn as_general(&self) -> Self {
        Interaction {
            kind: InteractionKind::General,
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn kind(&self) -> InteractionKind {
        self.kind
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    /// `A A^T`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn check_dim(&self, q: &SymMatrix) -> Result<()> {
        if q.dim() != self.k {
            return Err(HjError::DimensionMismatch {
                expected: self.k,
                got: q.dim(),
            });
        }
        Ok(())
    }

    /// `H(q)`; the special kind uses the closed form `sum_{j,j'} q_{jj'}^p`.
    pub fn hval(&self, q: &SymMatrix) -> Result<f64> {
        self.check_dim(q)?;
        Ok(match self.kind {
            InteractionKind::SpecialDiagonal => {
                let mut s = 0.0;
                for i in 0..self.k {
                    for j in 0..self.k {
                        s += q.entry(i, j).powi(self.p as i32);
                    }
                }
                s
            }
            _ => self.hval_kron(&q.to_dense()),
        })
    }

    /// `(A A^T) . q^{(x) p}` for any square `q`, symmetric or not. Overlaps
    /// such as `x^T X` enter here.
    pub fn hval_dense(&self, q: &DMatrix<f64>) -> f64 {
        assert_eq!(q.nrows(), self.k);
        match self.kind {
            InteractionKind::SpecialDiagonal => q.iter().map(|v| v.powi(self.p as i32)).sum(),
            InteractionKind::NonsymDemo => q[(0, 0)] * q[(1, 1)],
            InteractionKind::General => self.hval_kron(q),
        }
    }

    /// Contraction of the Gram matrix with `q^{(x) p}`.
    pub fn hval_kron(&self, q: &DMatrix<f64>) -> f64 {
        let factors = vec![q; self.p as usize];
        self.contract(&factors)
    }

    /// `(A A^T) . (f_1 (x) ... (x) f_p)`.
    fn contract(&self, factors: &[&DMatrix<f64>]) -> f64 {
        let rows = self.gram.nrows();
        if rows <= MATERIALIZE_LIMIT {
            let t = kron_chain(factors);
            self.gram.component_mul(&t).sum()
        } else {
            self.contract_indexwise(factors)
        }
    }

    fn contract_indexwise(&self, factors: &[&DMatrix<f64>]) -> f64 {
        let rows = self.gram.nrows();
        let mut total = 0.0;
        for r in 0..rows {
            let ri = digits_of(r, self.k, self.p);
            for c in 0..rows {
                let g = self.gram[(r, c)];
                if g == 0.0 {
                    continue;
                }
                let ci = digits_of(c, self.k, self.p);
                let prod: f64 = factors
                    .iter()
                    .enumerate()
                    .map(|(n, f)| f[(ri[n], ci[n])])
                    .product();
                total += g * prod;
            }
        }
        total
    }

    /// Directional derivative `a . DH(q)` by the product rule over the `p`
    /// tensor slots.
    pub fn directional(&self, q: &SymMatrix, a: &SymMatrix) -> f64 {
        let qd = q.to_dense();
        let ad = a.to_dense();
        let p = self.p as usize;
        (0..p)
            .map(|slot| {
                let factors: Vec<&DMatrix<f64>> =
                    (0..p).map(|n| if n == slot { &ad } else { &qd }).collect();
                self.contract(&factors)
            })
            .sum()
    }

    /// Gradient without the cone check; also valid slightly outside the cone.
    pub fn hgrad_unchecked(&self, q: &SymMatrix) -> SymMatrix {
        match self.kind {
            InteractionKind::SpecialDiagonal => q.hadamard_pow(self.p - 1).scale(self.p as f64),
            _ => {
                let d = sym_dim(self.k);
                let coords: Vec<f64> = (0..d)
                    .map(|slot| self.directional(q, &SymMatrix::basis_element(self.k, slot)))
                    .collect();
                SymMatrix::from_coords(self.k, &coords).expect("coordinate count")
            }
        }
    }

    /// `DH(q)`, the matrix `G` with `a . G = a . DH(q)` for every direction.
    pub fn hgrad(&self, q: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(q)?;
        if !is_psd(q, PSD_TOL) {
            return Err(HjError::NotPsd {
                min_eigenvalue: q.min_eigenvalue(),
            });
        }
        Ok(self.hgrad_unchecked(q))
    }

    /// `a . D(a . DH)(q)`. Closed form for the special kind, central
    /// differences of the gradient otherwise.
    pub fn hhess_quadform(&self, q: &SymMatrix, a: &SymMatrix) -> Result<f64> {
        self.check_dim(q)?;
        self.check_dim(a)?;
        Ok(match self.kind {
            InteractionKind::SpecialDiagonal => {
                if self.p < 2 {
                    return Ok(0.0);
                }
                let pf = self.p as f64;
                pf * (pf - 1.0) * a.hadamard_pow(2).dot(&q.hadamard_pow(self.p - 2))
            }
            _ => {
                let plus = self.hgrad_unchecked(&q.axpy(FD_STEP, a));
                let minus = self.hgrad_unchecked(&q.axpy(-FD_STEP, a));
                a.dot(&(&plus - &minus)) / (2.0 * FD_STEP)
            }
        })
    }

    /// Hessian of `H` in basis coordinates, from the exact second-order
    /// product rule.
    pub fn hessian_coords(&self, q: &SymMatrix) -> DMatrix<f64> {
        let d = sym_dim(self.k);
        let p = self.p as usize;
        let qd = q.to_dense();
        let basis: Vec<DMatrix<f64>> = (0..d)
            .map(|s| SymMatrix::basis_element(self.k, s).to_dense())
            .collect();
        DMatrix::from_fn(d, d, |b, c| {
            let mut total = 0.0;
            for m in 0..p {
                for n in 0..p {
                    if m == n {
                        continue;
                    }
                    let factors: Vec<&DMatrix<f64>> = (0..p)
                        .map(|slot| {
                            if slot == m {
                                &basis[b]
                            } else if slot == n {
                                &basis[c]
                            } else {
                                &qd
                            }
                        })
                        .collect();
                    total += self.contract(&factors);
                }
            }
            total
        })
    }
}

fn digits_of(mut idx: usize, k: usize, p: u32) -> Vec<usize> {
    let mut out = vec![0; p as usize];
    for slot in (0..p as usize).rev() {
        out[slot] = idx % k;
        idx /= k;
    }
    out
}

/// Worst smallest eigenvalue of `DH` over sampled cone points.
#[derive(Debug, Clone)]
pub struct DhPsdReport {
    pub min_eigenvalue: f64,
    pub worst_point: SymMatrix,
    pub trials: usize,
}

/// Radius of the cone samples used by the structural probes.
pub const PROBE_RADIUS: f64 = 2.0;

pub fn check_dh_psd<R: Rng + ?Sized>(ia: &Interaction, trials: usize, rng: &mut R) -> DhPsdReport {
    assert!(trials >= 1, "at least one trial");
    let mut worst = f64::INFINITY;
    let mut worst_point = SymMatrix::zeros(ia.k);
    for _ in 0..trials {
        let q = sample_psd(rng, ia.k, PROBE_RADIUS);
        let lmin = ia.hgrad_unchecked(&q).min_eigenvalue();
        if lmin < worst {
            worst = lmin;
            worst_point = q;
        }
    }
    DhPsdReport {
        min_eigenvalue: worst,
        worst_point,
        trials,
    }
}

/// Midpoint convexity scan over sampled PSD pairs.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub is_midpoint_convex_on_samples: bool,
    /// Largest `H((q1+q2)/2) - (H(q1)+H(q2))/2` seen; positive means a violation.
    pub worst_violation: f64,
    pub worst_pair: (SymMatrix, SymMatrix),
}

pub const CONVEXITY_TOL: f64 = 1e-10;

pub fn convexity_probe<R: Rng + ?Sized>(
    ia: &Interaction,
    trials: usize,
    rng: &mut R,
) -> ConvexityReport {
    let mut worst = f64::NEG_INFINITY;
    let mut pair = (SymMatrix::zeros(ia.k), SymMatrix::zeros(ia.k));
    for _ in 0..trials {
        let q1 = sample_psd(rng, ia.k, PROBE_RADIUS);
        let q2 = sample_psd(rng, ia.k, PROBE_RADIUS);
        let mid = (&q1 + &q2).scale(0.5);
        let h = |q: &SymMatrix| ia.hval(q).expect("matching dims");
        let gap = h(&mid) - 0.5 * (h(&q1) + h(&q2));
        if gap > worst {
            worst = gap;
            pair = (q1, q2);
        }
    }
    ConvexityReport {
        is_midpoint_convex_on_samples: worst <= CONVEXITY_TOL,
        worst_violation: worst,
        worst_pair: pair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(rows: &[[f64; 2]; 2]) -> SymMatrix {
        SymMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).unwrap()
    }

    #[test]
    fn hval_examples() {
        let special = Interaction::special_diagonal(2, 2);
        let q = sym(&[[1.0, 0.5], [0.5, 1.0]]);
        assert_abs_diff_eq!(special.hval(&q).unwrap(), 2.5, epsilon = 1e-12);
        assert_eq!(special.hval(&SymMatrix::zeros(2)).unwrap(), 0.0);
        let demo = Interaction::nonsym_demo();
        assert_abs_diff_eq!(
            demo.hval(&sym(&[[1.0, 0.5], [0.5, 2.0]])).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_eq!(demo.as_general().hval(&SymMatrix::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn hval_rejects_wrong_dimension() {
        let special = Interaction::special_diagonal(2, 2);
        assert!(matches!(
            special.hval(&SymMatrix::identity(3)),
            Err(HjError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hgrad_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p2 = Interaction::special_diagonal(2, 2);
        for _ in 0..10 {
            let q = sample_psd(&mut rng, 2, 1.0);
            assert!((&p2.hgrad(&q).unwrap() - &q.scale(2.0)).norm() < 1e-14);
        }
        let p3 = Interaction::special_diagonal(2, 3);
        let g = p3.hgrad(&SymMatrix::identity(2)).unwrap();
        assert!((&g - &SymMatrix::identity(2).scale(3.0)).norm() < 1e-14);

        let demo = Interaction::nonsym_demo();
        let q = sym(&[[0.7, 0.2], [0.2, 1.3]]);
        let g = demo.hgrad(&q).unwrap();
        assert!((&g - &SymMatrix::diag(&[1.3, 0.7])).norm() < 1e-14);
    }

    #[test]
    fn hgrad_rejects_non_psd() {
        let p2 = Interaction::special_diagonal(2, 2);
        assert!(matches!(
            p2.hgrad(&SymMatrix::diag(&[1.0, -1.0])),
            Err(HjError::NotPsd { .. })
        ));
    }

    #[test]
    fn hessian_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p2 = Interaction::special_diagonal(2, 2);
        let p1 = Interaction::special_diagonal(2, 1);
        for _ in 0..5 {
            let q = sample_psd(&mut rng, 2, 1.0);
            let a = crate::symcone::sample_sym(&mut rng, 2);
            assert_abs_diff_eq!(
                p2.hhess_quadform(&q, &a).unwrap(),
                2.0 * a.dot(&a),
                epsilon = 1e-12
            );
            assert_eq!(p1.hhess_quadform(&q, &a).unwrap(), 0.0);
        }
        let demo = Interaction::nonsym_demo();
        let q = sym(&[[0.3, 0.1], [0.1, 0.4]]);
        let v = demo.hhess_quadform(&q, &SymMatrix::identity(2)).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn nonsym_hessian_is_indefinite() {
        let demo = Interaction::nonsym_demo();
        let hess = demo.hessian_coords(&SymMatrix::identity(2));
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(hess, expected);
        let mut ev: Vec<f64> = hess.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn indexwise_contraction_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ia = Interaction::random_general(&mut rng, 2, 3, 2);
        let q = sample_psd(&mut rng, 2, 1.0).to_dense();
        let f = vec![&q; 3];
        assert_abs_diff_eq!(ia.contract(&f), ia.contract_indexwise(&f), epsilon = 1e-12);
    }

    #[test]
    fn dh_psd_and_convexity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rep = check_dh_psd(&Interaction::special_diagonal(2, 2), 50, &mut rng);
        assert!(rep.min_eigenvalue >= -1e-10);
        let rep = check_dh_psd(&Interaction::nonsym_demo(), 50, &mut rng);
        assert!(rep.min_eigenvalue >= -1e-10);

        for p in [1, 2, 4] {
            let rep = convexity_probe(&Interaction::special_diagonal(2, p), 200, &mut rng);
            assert!(
                rep.is_midpoint_convex_on_samples,
                "p = {p}: {}",
                rep.worst_violation
            );
        }
        let rep = convexity_probe(&Interaction::nonsym_demo(), 200, &mut rng);
        assert!(!rep.is_midpoint_convex_on_samples);
        // the explicit pair diag(2,0), diag(0,2) has midpoint I
        let demo = Interaction::nonsym_demo();
        let mid = demo.hval(&SymMatrix::identity(2)).unwrap();
        assert!(
            mid > 0.5
                * (demo.hval(&SymMatrix::diag(&[2.0, 0.0])).unwrap()
                    + demo.hval(&SymMatrix::diag(&[0.0, 2.0])).unwrap())
        );
    }
}
