use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HjError, Result};
use crate::nonlinearity::Interaction;
use crate::rng::{stream, Purpose};
use crate::symcone::{is_psd, SymMatrix, PSD_TOL};

/// Default cap on the number of enumerated configurations.
pub const ENUMERATION_BUDGET: u128 = 2_000_000;

const WEIGHT_TOL: f64 = 1e-12;

/// Finite-support distribution of one row of the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Prior {
    /// Atoms must have length `k` and norm at most `sqrt(k)`; weights must be
    /// nonnegative and sum to one.
    pub fn new(k: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(HjError::InvalidArgument("prior has no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(HjError::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let bound = (k as f64).sqrt() * (1.0 + 1e-12);
        for a in &atoms {
            if a.len() != k {
                return Err(HjError::DimensionMismatch {
                    expected: k,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(HjError::InvalidArgument("non-finite atom".into()));
            }
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > bound {
                return Err(HjError::InvalidArgument(format!(
                    "atom norm {norm} exceeds sqrt(K) = {}",
                    (k as f64).sqrt()
                )));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HjError::InvalidArgument(
                "prior weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(HjError::InvalidArgument(format!(
                "prior weights sum to {total}"
            )));
        }
        Ok(Prior { atoms, weights })
    }

    /// Uniform over the `2^k` sign vectors.
    pub fn rademacher(k: usize) -> Self {
        let n = 1usize << k;
        let atoms = (0..n)
            .map(|m| {
                (0..k)
                    .map(|j| {
                        if (m >> (k - 1 - j)) & 1 == 1 {
                            -1.0
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        Prior::new(k, atoms, vec![1.0 / n as f64; n]).expect("valid Rademacher prior")
    }

    /// Scalar prior from atoms and weights.
    pub fn scalar(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        Prior::new(
            1,
            atoms.iter().map(|&a| vec![a]).collect(),
            weights.to_vec(),
        )
    }

    pub fn k(&self) -> usize {
        self.atoms[0].len()
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.k()];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mj, aj) in m.iter_mut().zip(a) {
                *mj += w * aj;
            }
        }
        m
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

/// Everything that defines the finite-`N` model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    n: usize,
    ia: Interaction,
    rows: Vec<Prior>,
    iid: bool,
    seed: u64,
    budget: u128,
}

impl ModelSpec {
    /// Rows i.i.d. from `prior`.
    pub fn new(n: usize, ia: Interaction, prior: Prior, seed: u64) -> Result<Self> {
        Self::build(n, ia, vec![prior; n], true, seed, ENUMERATION_BUDGET)
    }

    /// Independent rows with individual priors.
    pub fn with_row_priors(ia: Interaction, rows: Vec<Prior>, seed: u64) -> Result<Self> {
        let n = rows.len();
        Self::build(n, ia, rows, false, seed, ENUMERATION_BUDGET)
    }

    pub fn with_budget(self, budget: u128) -> Result<Self> {
        Self::build(self.n, self.ia, self.rows, self.iid, self.seed, budget)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn build(
        n: usize,
        ia: Interaction,
        rows: Vec<Prior>,
        iid: bool,
        seed: u64,
        budget: u128,
    ) -> Result<Self> {
        if n == 0 {
            return Err(HjError::InvalidArgument("N must be positive".into()));
        }
        for r in &rows {
            if r.k() != ia.k() {
                return Err(HjError::DimensionMismatch {
                    expected: ia.k(),
                    got: r.k(),
                });
            }
        }
        let mut configs: u128 = 1;
        for r in &rows {
            configs = configs.saturating_mul(r.len() as u128);
        }
        if configs > budget {
            return Err(HjError::EnumerationBudgetExceeded { configs, budget });
        }
        Ok(ModelSpec {
            n,
            ia,
            rows,
            iid,
            seed,
            budget,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.ia.k()
    }
    pub fn l(&self) -> usize {
        self.ia.l()
    }
    pub fn p(&self) -> u32 {
        self.ia.p()
    }
    pub fn ia(&self) -> &Interaction {
        &self.ia
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn budget(&self) -> u128 {
        self.budget
    }
    pub fn is_iid(&self) -> bool {
        self.iid
    }
    pub fn row_prior(&self, i: usize) -> &Prior {
        &self.rows[i]
    }
    pub fn row_priors(&self) -> &[Prior] {
        &self.rows
    }

    pub fn num_configs(&self) -> u128 {
        self.rows.iter().map(|r| r.len() as u128).product()
    }

    /// `N^{p-1}`, the normalization of the tensor channel.
    pub fn channel_scale(&self) -> f64 {
        (self.n as f64).powi(self.p() as i32 - 1)
    }
}

/// `x^{(x) p}`, Kronecker convention with the first factor most significant.
pub fn tensor_power(x: &DMatrix<f64>, p: u32) -> DMatrix<f64> {
    let mut acc = x.clone();
    for _ in 1..p {
        acc = acc.kronecker(x);
    }
    acc
}

/// `x~ = x^{(x) p} A`.
pub fn xtilde(ia: &Interaction, x: &DMatrix<f64>) -> DMatrix<f64> {
    tensor_power(x, ia.p()) * ia.a()
}

/// `r . m = sum_ij r_ij m_ij` for a symmetric `r` against any square `m`.
pub(crate) fn sym_dot_dense(r: &SymMatrix, m: &DMatrix<f64>) -> f64 {
    let k = r.dim();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            s += r.entry(i, j) * m[(i, j)];
        }
    }
    s
}

/// `sqrt(2 h)` by eigen square root.
pub fn sqrt_two_h(h: &SymMatrix) -> SymMatrix {
    h.scale(2.0).psd_sqrt()
}

pub(crate) fn check_point(ms: &ModelSpec, t: f64, h: &SymMatrix) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(HjError::InvalidArgument(format!(
            "t must be finite and nonnegative, got {t}"
        )));
    }
    if h.dim() != ms.k() {
        return Err(HjError::DimensionMismatch {
            expected: ms.k(),
            got: h.dim(),
        });
    }
    if !is_psd(h, PSD_TOL) {
        return Err(HjError::NotPsd {
            min_eigenvalue: h.min_eigenvalue(),
        });
    }
    Ok(())
}

/// One draw of the signal and the noise, observed at `(t, h)`.
#[derive(Debug, Clone)]
pub struct DisorderSample {
    pub x: DMatrix<f64>,
    /// Index into the row prior of each row of `x`.
    pub x_atoms: Vec<usize>,
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
    t: f64,
    h: SymMatrix,
    y: DMatrix<f64>,
    ybar: DMatrix<f64>,
}

impl DisorderSample {
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn h(&self) -> &SymMatrix {
        &self.h
    }
    /// `sqrt(2t / N^{p-1}) X^{(x) p} A + W`.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
    /// `X sqrt(2h) + Z`.
    pub fn ybar(&self) -> &DMatrix<f64> {
        &self.ybar
    }

    /// The same `(X, W, Z)` observed at another `(t, h)`.
    pub fn observe(&self, ms: &ModelSpec, t: f64, h: &SymMatrix) -> Result<DisorderSample> {
        check_point(ms, t, h)?;
        let coef = (2.0 * t / ms.channel_scale()).sqrt();
        let y = xtilde(ms.ia(), &self.x) * coef + &self.w;
        let ybar = &self.x * sqrt_two_h(h).to_dense() + &self.z;
        Ok(DisorderSample {
            t,
            h: h.clone(),
            y,
            ybar,
            ..self.clone()
        })
    }
}

/// Draws `X` row by row from the prior, then `W` and `Z` column-major.
pub fn draw_disorder<R: Rng + ?Sized>(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    rng: &mut R,
) -> Result<DisorderSample> {
    check_point(ms, t, h)?;
    let (n, k) = (ms.n(), ms.k());
    let x_atoms: Vec<usize> = (0..n).map(|i| ms.row_prior(i).sample_index(rng)).collect();
    let x = DMatrix::from_fn(n, k, |i, j| ms.row_prior(i).atoms()[x_atoms[i]][j]);
    let rows = n.pow(ms.p());
    let w = DMatrix::from_fn(rows, ms.l(), |_, _| rng.sample(StandardNormal));
    let z = DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal));
    let base = DisorderSample {
        x,
        x_atoms,
        w,
        z,
        t: 0.0,
        h: SymMatrix::zeros(k),
        y: DMatrix::zeros(0, 0),
        ybar: DMatrix::zeros(0, 0),
    };
    base.observe(ms, t, h)
}

/// Disorder sample `index` of the stream `purpose`, observed at `t = 0, h = 0`.
pub fn disorder_sample(ms: &ModelSpec, purpose: Purpose, index: u64) -> DisorderSample {
    let mut rng = stream(ms.seed(), purpose, index);
    draw_disorder(ms, 0.0, &SymMatrix::zeros(ms.k()), &mut rng).expect("origin is a valid point")
}

/// Enriched Hamiltonian of configuration `x` given the observations in `ds`.
pub fn hamiltonian(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    x: &DMatrix<f64>,
    ds: &DisorderSample,
) -> f64 {
    let s = ms.channel_scale();
    let xt = xtilde(ms.ia(), x);
    let r = sqrt_two_h(h);
    let xty = x.transpose() * ds.ybar();
    let xtx = x.transpose() * x;
    (2.0 * t / s).sqrt() * xt.dot(ds.y()) - (t / s) * xt.norm_squared() + sym_dot_dense(&r, &xty)
        - sym_dot_dense(h, &xtx)
}
