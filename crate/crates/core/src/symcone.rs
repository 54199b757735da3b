//! Symmetric matrices and the geometry of the positive semidefinite cone.
//!
//! A [`SymMatrix`] is stored through its coordinates in the orthonormal basis
//! of the symmetric matrices,
//!
//! ```text
//! e^{ii} = E_ii,   e^{ij} = (E_ij + E_ji) / sqrt(2)   (i < j),
//! ```
//!
//! with diagonal coordinates first and off-diagonal coordinates after them in
//! lexicographic `(i, j)` order. The coordinate map is an isometry between the
//! Frobenius inner product on matrices and the Euclidean inner product on
//! `R^{K(K+1)/2}`, so grids, distances and conjugates are all computed in
//! coordinates.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HjError, Result};

/// Tolerance used for cone membership wherever a caller does not pass one.
pub const PSD_TOL: f64 = 1e-10;

/// Hard cap on the number of points a [`ConeGrid`] may hold.
pub const GRID_POINT_BUDGET: usize = 2_000_000;

/// Number of basis coordinates of a `k x k` symmetric matrix.
pub fn sym_dim(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Maps a coordinate slot to its `(i, j)` entry, `i <= j`.
fn slot_to_entry(k: usize, slot: usize) -> (usize, usize) {
    if slot < k {
        return (slot, slot);
    }
    let mut s = slot - k;
    for i in 0..k {
        let row_len = k - i - 1;
        if s < row_len {
            return (i, i + 1 + s);
        }
        s -= row_len;
    }
    unreachable!("slot {slot} out of range for dim {k}")
}

fn entry_to_slot(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    if i == j {
        return i;
    }
    // off-diagonals of rows before i, then offset inside row i
    let before: usize = (0..i).map(|r| k - r - 1).sum();
    k + before + (j - i - 1)
}

/// A real symmetric `K x K` matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    coords: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j)).collect())
            .collect();
        f.debug_struct("SymMatrix").field("entries", &rows).finish()
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymMatrix {
            dim,
            coords: vec![0.0; sym_dim(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.coords[..dim].iter_mut().for_each(|c| *c = 1.0);
        m
    }

    /// Rebuilds a matrix from its basis coordinates. Exact inverse of
    /// [`SymMatrix::basis_coords`].
    pub fn from_coords(dim: usize, coords: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(HjError::InvalidArgument(
                "dimension must be positive".into(),
            ));
        }
        if coords.len() != sym_dim(dim) {
            return Err(HjError::DimensionMismatch {
                expected: sym_dim(dim),
                got: coords.len(),
            });
        }
        Ok(SymMatrix {
            dim,
            coords: coords.to_vec(),
        })
    }

    /// Builds a matrix from an entry function evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for slot in 0..m.coords.len() {
            let (i, j) = slot_to_entry(dim, slot);
            let v = f(i, j);
            m.coords[slot] = if i == j { v } else { v * SQRT_2 };
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Builds from row-major entries, rejecting asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(HjError::InvalidArgument("empty matrix".into()));
        }
        for r in rows {
            if r.len() != k {
                return Err(HjError::DimensionMismatch {
                    expected: k,
                    got: r.len(),
                });
            }
        }
        for i in 0..k {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(HjError::InvalidArgument(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self::from_fn(k, |i, j| rows[i][j]))
    }

    /// Symmetric part `(m + m^T) / 2` of a square dense matrix.
    pub fn sym_part(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    /// Unit matrix of the orthonormal basis at coordinate slot `slot`.
    pub fn basis_element(dim: usize, slot: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.coords[slot] = 1.0;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinates `<S, e^{ij}>` in the orthonormal basis.
    pub fn basis_coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let c = self.coords[entry_to_slot(self.dim, i, j)];
        if i == j {
            c
        } else {
            c * FRAC_1_SQRT_2
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j))
    }

    /// Entry-wise (Frobenius) inner product.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.coords[..self.dim].iter().sum()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// Entry-wise power `q^{o n}`; `n = 0` gives the all-ones matrix.
    pub fn hadamard_pow(&self, n: u32) -> SymMatrix {
        Self::from_fn(self.dim, |i, j| self.entry(i, j).powi(n as i32))
    }

    pub fn hadamard(&self, other: &SymMatrix) -> SymMatrix {
        Self::from_fn(self.dim, |i, j| self.entry(i, j) * other.entry(i, j))
    }

    /// Eigenvalues in ascending order with the matching orthonormal eigenvectors
    /// as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        if self.dim == 1 {
            return (vec![self.coords[0]], DMatrix::from_element(1, 1, 1.0));
        }
        let eig = self.to_dense().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim, self.dim, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Applies `f` to the spectrum: `V diag(f(lambda)) V^T`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let (vals, vecs) = self.eigen();
        Self::from_fn(self.dim, |i, j| {
            (0..self.dim)
                .map(|k| vecs[(i, k)] * f(vals[k]) * vecs[(j, k)])
                .sum()
        })
    }

    /// Square root of the PSD part (negative eigenvalues clipped to zero).
    pub fn psd_sqrt(&self) -> SymMatrix {
        self.spectral_map(|l| l.max(0.0).sqrt())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(s: &SymMatrix, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    if s.dim == 1 {
        return s.coords[0] >= -tol;
    }
    // a negative diagonal entry is already a certificate
    if s.coords[..s.dim].iter().any(|&d| d < -tol) {
        return false;
    }
    s.min_eigenvalue() >= -tol
}

/// Loewner order `a >= b`, i.e. `a - b` is PSD at tolerance `tol`.
pub fn loewner_geq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
    is_psd(&(a - b), tol)
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
pub fn project_psd(s: &SymMatrix) -> SymMatrix {
    if s.dim == 1 {
        return SymMatrix {
            dim: 1,
            coords: vec![s.coords[0].max(0.0)],
        };
    }
    let (vals, _) = s.eigen();
    if vals[0] >= 0.0 {
        return s.clone();
    }
    s.spectral_map(|l| l.max(0.0))
}

/// Condition number `|h| |h^{-1}|` in Frobenius norms, `+inf` unless `h` is
/// positive definite.
pub fn condition_kappa(h: &SymMatrix) -> f64 {
    let vals = h.eigenvalues();
    let lmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // eigenvalues at round-off level relative to the spectrum count as zero
    if vals[0] <= lmax * f64::EPSILON * h.dim as f64 || vals[0] <= 0.0 {
        return f64::INFINITY;
    }
    let inv_norm = vals.iter().map(|l| 1.0 / (l * l)).sum::<f64>().sqrt();
    h.norm() * inv_norm
}

/// Draws `G G^T` for a standard Gaussian `G` and rescales it to a Frobenius
/// norm uniform on `(0, m]`.
pub fn sample_psd<R: Rng + ?Sized>(rng: &mut R, k: usize, m: f64) -> SymMatrix {
    assert!(m > 0.0, "radius must be positive");
    loop {
        let g = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal));
        let gram = &g * g.transpose();
        let s = SymMatrix::sym_part(&gram);
        let n = s.norm();
        if n > 0.0 {
            let r = m * (1.0 - rng.random::<f64>());
            return s.scale(r / n);
        }
    }
}

/// Draws a symmetric matrix with i.i.d. standard Gaussian basis coordinates.
pub fn sample_sym<R: Rng + ?Sized>(rng: &mut R, k: usize) -> SymMatrix {
    let coords: Vec<f64> = (0..sym_dim(k))
        .map(|_| rng.sample(StandardNormal))
        .collect();
    SymMatrix { dim: k, coords }
}

/// A lattice discretization of the slab `{h PSD : |h| <= radius}`.
///
/// Points are lattice points `step * n` (`n` integer) in basis coordinates;
/// `lattice[i]` holds the integer vector of point `i`.
#[derive(Clone, Debug)]
pub struct ConeGrid {
    dim: usize,
    radius: f64,
    step: f64,
    points: Vec<SymMatrix>,
    lattice: Vec<Vec<i64>>,
    flat: Vec<f64>,
    index: HashMap<Vec<i64>, usize>,
}

impl ConeGrid {
    /// Builds a grid from explicit lattice-aligned points.
    pub fn from_points(dim: usize, radius: f64, step: f64, points: Vec<SymMatrix>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !(step > 0.0 && step.is_finite()) {
            return Err(HjError::InvalidArgument(
                "radius and step must be positive".into(),
            ));
        }
        if points.is_empty() {
            return Err(HjError::EmptyGrid);
        }
        let mut lattice = Vec::with_capacity(points.len());
        for p in &points {
            if p.dim != dim {
                return Err(HjError::DimensionMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
            if !p.coords.iter().all(|c| c.is_finite()) {
                return Err(HjError::InvalidArgument(
                    "non-finite grid coordinate".into(),
                ));
            }
            if p.norm() > radius * (1.0 + 1e-12) {
                return Err(HjError::OutsideGrid {
                    norm: p.norm(),
                    radius,
                });
            }
            if !is_psd(p, 0.0) {
                return Err(HjError::NotPsd {
                    min_eigenvalue: p.min_eigenvalue(),
                });
            }
            let n: Vec<i64> = p.coords.iter().map(|c| (c / step).round() as i64).collect();
            let aligned = n
                .iter()
                .zip(&p.coords)
                .all(|(&ni, &c)| (ni as f64 * step - c).abs() <= 1e-9 * step.max(c.abs()));
            if !aligned {
                return Err(HjError::InvalidArgument(
                    "grid point is off the lattice".into(),
                ));
            }
            lattice.push(n);
        }
        let mut index = HashMap::with_capacity(lattice.len());
        for (i, n) in lattice.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(HjError::InvalidArgument("duplicate grid point".into()));
            }
        }
        let flat = points
            .iter()
            .flat_map(|p| p.coords.iter().copied())
            .collect();
        Ok(ConeGrid {
            dim,
            radius,
            step,
            points,
            lattice,
            flat,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SymMatrix] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &SymMatrix {
        &self.points[i]
    }

    /// Basis coordinates of point `i`.
    pub fn coords_of(&self, i: usize) -> &[f64] {
        let d = sym_dim(self.dim);
        &self.flat[i * d..(i + 1) * d]
    }

    pub fn lattice_of(&self, i: usize) -> &[i64] {
        &self.lattice[i]
    }

    /// Index of the point with the given lattice vector, if present.
    pub fn find(&self, lattice: &[i64]) -> Option<usize> {
        self.index.get(lattice).copied()
    }

    /// Index of the grid point equal to `s` (up to lattice rounding).
    pub fn locate(&self, s: &SymMatrix) -> Option<usize> {
        let n: Vec<i64> = s
            .coords
            .iter()
            .map(|c| (c / self.step).round() as i64)
            .collect();
        let i = self.find(&n)?;
        let close = self.points[i]
            .coords
            .iter()
            .zip(&s.coords)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * self.step);
        close.then_some(i)
    }
}

/// Lattice of step `step` over the coordinate box `[-m, m]^{K(K+1)/2}`,
/// filtered to PSD points of norm at most `m`.
pub fn cone_grid(k: usize, m: f64, step: f64) -> Result<ConeGrid> {
    cone_grid_with_budget(k, m, step, GRID_POINT_BUDGET)
}

pub fn cone_grid_with_budget(k: usize, m: f64, step: f64, budget: usize) -> Result<ConeGrid> {
    if k == 0 {
        return Err(HjError::InvalidArgument(
            "dimension must be positive".into(),
        ));
    }
    if !(m > 0.0 && m.is_finite()) || !(step > 0.0 && step <= m) {
        return Err(HjError::InvalidArgument(format!(
            "need m > 0 and 0 < step <= m (m = {m}, step = {step})"
        )));
    }
    let nmax = (m / step * (1.0 + 1e-12)).floor() as i64;
    let d = sym_dim(k);
    // diagonal coordinates of a PSD matrix are nonnegative
    let lo: Vec<i64> = (0..d).map(|s| if s < k { 0 } else { -nmax }).collect();
    let mut n = lo.clone();
    let mut points = Vec::new();
    let limit = m * (1.0 + 1e-12);
    loop {
        let coords: Vec<f64> = n.iter().map(|&v| v as f64 * step).collect();
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm <= limit {
            let s = SymMatrix { dim: k, coords };
            if is_psd(&s, 0.0) {
                if points.len() == budget {
                    return Err(HjError::GridBudgetExceeded { budget });
                }
                points.push(s);
            }
        }
        // odometer increment, last coordinate fastest
        let mut slot = d;
        loop {
            if slot == 0 {
                return ConeGrid::from_points(k, m, step, points);
            }
            slot -= 1;
            if n[slot] < nmax {
                n[slot] += 1;
                break;
            }
            n[slot] = lo[slot];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_coords_examples() {
        assert_eq!(SymMatrix::identity(2).basis_coords(), vec![1.0, 1.0, 0.0]);
        let off = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let c = off.basis_coords();
        assert_eq!(&c[..2], &[0.0, 0.0]);
        assert_abs_diff_eq!(c[2], SQRT_2, epsilon = 1e-15);
        assert!(SymMatrix::zeros(3).basis_coords().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slot_maps_are_inverse() {
        for k in 1..=4 {
            for slot in 0..sym_dim(k) {
                let (i, j) = slot_to_entry(k, slot);
                assert_eq!(entry_to_slot(k, i, j), slot);
                assert_eq!(entry_to_slot(k, j, i), slot);
            }
        }
    }

    #[test]
    fn psd_membership_examples() {
        assert!(is_psd(&SymMatrix::identity(2), 0.0));
        assert!(!is_psd(&SymMatrix::diag(&[1.0, -0.1]), 0.0));
        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        // rank one: the zero eigenvalue is computed at round-off level
        assert!(is_psd(&ones, 1e-15));
    }

    #[test]
    fn loewner_examples() {
        let i = SymMatrix::identity(2);
        let two = i.scale(2.0);
        assert!(loewner_geq(&two, &i, 0.0));
        assert!(!loewner_geq(&i, &two, 0.0));
        assert!(loewner_geq(&i, &i, 0.0));
    }

    #[test]
    fn projection_examples() {
        let p = project_psd(&SymMatrix::diag(&[1.0, -1.0]));
        assert_abs_diff_eq!(p.entry(0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.entry(1, 1), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.entry(0, 1), 0.0, epsilon = 1e-14);
        let neg = project_psd(&SymMatrix::identity(3).scale(-1.0));
        assert!(neg.norm() < 1e-14);
        let psd = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(project_psd(&psd), psd);
    }

    #[test]
    fn kappa_examples() {
        assert_abs_diff_eq!(
            condition_kappa(&SymMatrix::identity(2)),
            2.0,
            epsilon = 1e-14
        );
        assert_eq!(
            condition_kappa(&SymMatrix::diag(&[1.0, 0.0])),
            f64::INFINITY
        );
        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(condition_kappa(&ones), f64::INFINITY);
        let expected = 5f64.sqrt() * (1.0f64 + 0.25).sqrt();
        assert_abs_diff_eq!(
            condition_kappa(&SymMatrix::diag(&[2.0, 1.0])),
            expected,
            epsilon = 1e-14
        );
    }

    #[test]
    fn scalar_grids() {
        let g = cone_grid(1, 1.0, 0.5).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|p| p.entry(0, 0)).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
        let g = cone_grid(1, 2.0, 1.0).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|p| p.entry(0, 0)).collect();
        assert_eq!(vals, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn matrix_grid_is_psd_distinct_and_has_zero() {
        let g = cone_grid(2, 2.0, 0.25).unwrap();
        assert!(g.len() > 100);
        assert!(g
            .points()
            .iter()
            .all(|p| is_psd(p, 0.0) && p.norm() <= 2.0 * (1.0 + 1e-12)));
        assert!(g.locate(&SymMatrix::zeros(2)).is_some());
        let mut seen = std::collections::HashSet::new();
        for i in 0..g.len() {
            assert!(seen.insert(g.lattice_of(i).to_vec()));
        }
    }

    #[test]
    fn grid_budget_is_enforced() {
        assert!(matches!(
            cone_grid_with_budget(2, 1.0, 0.1, 10),
            Err(HjError::GridBudgetExceeded { budget: 10 })
        ));
        assert!(cone_grid(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = sample_psd(&mut rng, 3, 2.0);
            let r = h.psd_sqrt().to_dense();
            let back = SymMatrix::sym_part(&(&r * &r));
            assert!((&back - &h).norm() < 1e-12);
        }
    }
}
