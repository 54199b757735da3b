//! Exact enumeration of all configurations with cached sufficient statistics.
//!
//! For every configuration `x` the table stores the quantities that the
//! Hamiltonian depends on linearly: `log P(x)`, `H(x^T X)`, `x~ . W`,
//! `H(x^T x)`, `x^T X`, `x^T Z` and `x^T x`. The Hamiltonian at any pair of
//! data and scoring parameters is then one dot product per configuration.

use nalgebra::DMatrix;

use crate::error::{HjError, Result};
use crate::gibbs::model::{check_point, sqrt_two_h, tensor_power, DisorderSample, ModelSpec};
use crate::symcone::SymMatrix;

/// Data generated at `(t_data, h_data)`, Gibbs measure built at `(t_score, h_score)`.
#[derive(Debug, Clone)]
pub struct Scoring {
    pub t_data: f64,
    pub h_data: SymMatrix,
    pub t_score: f64,
    pub h_score: SymMatrix,
}

impl Scoring {
    /// Bayes-optimal scoring.
    pub fn matched(t: f64, h: &SymMatrix) -> Self {
        Scoring {
            t_data: t,
            h_data: h.clone(),
            t_score: t,
            h_score: h.clone(),
        }
    }
}

const LOG_PRIOR: usize = 0;
const S_XX: usize = 1;
const S_XW: usize = 2;
const S_NORM: usize = 3;
const HEAD: usize = 4;

/// How `x~ . W` is maintained while rows change.
#[derive(Debug, Clone)]
enum Coupling {
    /// `sum_u T_u v_u`.
    Linear(Vec<f64>),
    /// `v^T T v` with symmetric `T`.
    Quadratic(DMatrix<f64>),
    /// Full tensor over `(NK)^p`, contracted from the last slot.
    Tensor(Vec<f64>),
}

/// Sufficient statistics of every configuration for one disorder sample.
#[derive(Debug, Clone)]
pub struct ConfigTable {
    n: usize,
    k: usize,
    p: u32,
    scale: f64,
    radices: Vec<usize>,
    atoms: Vec<Vec<Vec<f64>>>,
    len: usize,
    stride: usize,
    data: Vec<f64>,
}

fn coupling_tensor(ms: &ModelSpec, w: &DMatrix<f64>) -> Coupling {
    let (n, k, p) = (ms.n(), ms.k(), ms.p());
    let b = w * ms.ia().a().transpose();
    let nk = n * k;
    let size = nk.pow(p);
    let mut t = vec![0.0; size];
    for r in 0..b.nrows() {
        let mut ri = r;
        let mut rows = vec![0; p as usize];
        for slot in (0..p as usize).rev() {
            rows[slot] = ri % n;
            ri /= n;
        }
        for c in 0..b.ncols() {
            let mut ci = c;
            let mut u = 0;
            let mut cols = vec![0; p as usize];
            for slot in (0..p as usize).rev() {
                cols[slot] = ci % k;
                ci /= k;
            }
            for slot in 0..p as usize {
                u = u * nk + rows[slot] * k + cols[slot];
            }
            t[u] += b[(r, c)];
        }
    }
    match p {
        1 => Coupling::Linear(t),
        2 => {
            let m = DMatrix::from_row_slice(nk, nk, &t);
            Coupling::Quadratic((&m + m.transpose()) * 0.5)
        }
        _ => Coupling::Tensor(t),
    }
}

fn contract_tensor(t: &[f64], v: &[f64], p: u32) -> f64 {
    let nk = v.len();
    let mut cur: Vec<f64> = t.to_vec();
    for _ in 0..p {
        let next: Vec<f64> = cur
            .chunks_exact(nk)
            .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        cur = next;
    }
    cur[0]
}

impl ConfigTable {
    pub fn build(ms: &ModelSpec, ds: &DisorderSample) -> Result<Self> {
        let (n, k) = (ms.n(), ms.k());
        let configs = ms.num_configs();
        if configs > ms.budget() {
            return Err(HjError::EnumerationBudgetExceeded {
                configs,
                budget: ms.budget(),
            });
        }
        let len = configs as usize;
        let kk = k * k;
        let stride = HEAD + 3 * kk;
        let radices: Vec<usize> = ms.row_priors().iter().map(|r| r.len()).collect();
        let atoms: Vec<Vec<Vec<f64>>> =
            ms.row_priors().iter().map(|r| r.atoms().to_vec()).collect();
        let log_w: Vec<Vec<f64>> = ms
            .row_priors()
            .iter()
            .map(|r| r.weights().iter().map(|w| w.ln()).collect())
            .collect();
        let coupling = coupling_tensor(ms, &ds.w);
        let ia = ms.ia();

        let mut digits = vec![0usize; n];
        let mut v: Vec<f64> = (0..n).flat_map(|i| atoms[i][0].clone()).collect();
        let mut log_prior: f64 = (0..n).map(|i| log_w[i][0]).sum();
        let mut xtx_m = DMatrix::<f64>::zeros(k, k);
        let mut xtz_m = DMatrix::<f64>::zeros(k, k);
        let mut xtxx = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            for a in 0..k {
                for b in 0..k {
                    xtx_m[(a, b)] += v[i * k + a] * ds.x[(i, b)];
                    xtz_m[(a, b)] += v[i * k + a] * ds.z[(i, b)];
                    xtxx[(a, b)] += v[i * k + a] * v[i * k + b];
                }
            }
        }
        let mut field: Vec<f64> = Vec::new();
        let mut s_xw = match &coupling {
            Coupling::Linear(t) => t.iter().zip(&v).map(|(a, b)| a * b).sum(),
            Coupling::Quadratic(t) => {
                field = (0..n * k)
                    .map(|a| (0..n * k).map(|b| t[(a, b)] * v[b]).sum())
                    .collect();
                field.iter().zip(&v).map(|(a, b)| a * b).sum()
            }
            Coupling::Tensor(t) => contract_tensor(t, &v, ms.p()),
        };

        let mut data = vec![0.0; len * stride];
        for c in 0..len {
            let row = &mut data[c * stride..(c + 1) * stride];
            if let Coupling::Tensor(t) = &coupling {
                s_xw = contract_tensor(t, &v, ms.p());
            }
            row[LOG_PRIOR] = log_prior;
            row[S_XX] = ia.hval_dense(&xtx_m);
            row[S_XW] = s_xw;
            row[S_NORM] = ia.hval_dense(&xtxx);
            for a in 0..k {
                for b in 0..k {
                    row[HEAD + a * k + b] = xtx_m[(a, b)];
                    row[HEAD + kk + a * k + b] = xtz_m[(a, b)];
                    row[HEAD + 2 * kk + a * k + b] = xtxx[(a, b)];
                }
            }
            if c + 1 == len {
                break;
            }
            let mut i = n - 1;
            loop {
                let old = digits[i];
                let new = if old + 1 == radices[i] { 0 } else { old + 1 };
                digits[i] = new;
                let dv: Vec<f64> = (0..k)
                    .map(|a| atoms[i][new][a] - atoms[i][old][a])
                    .collect();
                log_prior += log_w[i][new] - log_w[i][old];
                for a in 0..k {
                    for b in 0..k {
                        xtx_m[(a, b)] += dv[a] * ds.x[(i, b)];
                        xtz_m[(a, b)] += dv[a] * ds.z[(i, b)];
                        xtxx[(a, b)] += atoms[i][new][a] * atoms[i][new][b]
                            - atoms[i][old][a] * atoms[i][old][b];
                    }
                }
                match &coupling {
                    Coupling::Linear(t) => {
                        s_xw += (0..k).map(|a| t[i * k + a] * dv[a]).sum::<f64>();
                    }
                    Coupling::Quadratic(t) => {
                        let mut lin = 0.0;
                        let mut quad = 0.0;
                        for a in 0..k {
                            lin += dv[a] * field[i * k + a];
                            for b in 0..k {
                                quad += dv[a] * t[(i * k + a, i * k + b)] * dv[b];
                            }
                        }
                        s_xw += 2.0 * lin + quad;
                        for (u, f) in field.iter_mut().enumerate() {
                            *f += (0..k).map(|a| t[(u, i * k + a)] * dv[a]).sum::<f64>();
                        }
                    }
                    Coupling::Tensor(_) => {}
                }
                for a in 0..k {
                    v[i * k + a] = atoms[i][new][a];
                }
                if new != 0 || i == 0 {
                    break;
                }
                i -= 1;
            }
        }
        Ok(ConfigTable {
            n,
            k,
            p: ms.p(),
            scale: ms.channel_scale(),
            radices,
            atoms,
            len,
            stride,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }

    /// Configuration `c`, the last row varying fastest.
    pub fn config(&self, c: usize) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n, self.k);
        let mut rest = c;
        for i in (0..self.n).rev() {
            let d = rest % self.radices[i];
            rest /= self.radices[i];
            for a in 0..self.k {
                x[(i, a)] = self.atoms[i][d][a];
            }
        }
        x
    }

    /// Index of the configuration equal to `x`, if every row is an atom.
    pub fn index_of(&self, x: &DMatrix<f64>) -> Option<usize> {
        if x.nrows() != self.n || x.ncols() != self.k {
            return None;
        }
        let mut c = 0;
        for i in 0..self.n {
            let d = self.atoms[i]
                .iter()
                .position(|a| (0..self.k).all(|j| a[j] == x[(i, j)]))?;
            c = c * self.radices[i] + d;
        }
        Some(c)
    }

    /// `log P(x) + H_N(x)` for configuration `c`.
    pub fn log_weight_of(&self, c: usize, sc: &Scoring) -> f64 {
        let coef = self.coefficients(sc);
        self.data[c * self.stride..(c + 1) * self.stride]
            .iter()
            .zip(&coef)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn coefficients(&self, sc: &Scoring) -> Vec<f64> {
        let k = self.k;
        let kk = k * k;
        let ts = sc.t_score / self.scale;
        let td = sc.t_data / self.scale;
        let rd = sqrt_two_h(&sc.h_data).to_dense();
        let rs = sqrt_two_h(&sc.h_score).to_dense();
        let rdrs = &rd * &rs;
        let mut coef = vec![0.0; self.stride];
        coef[LOG_PRIOR] = 1.0;
        coef[S_XX] = 2.0 * (ts * td).sqrt();
        coef[S_XW] = (2.0 * ts).sqrt();
        coef[S_NORM] = -ts;
        for a in 0..k {
            for b in 0..k {
                coef[HEAD + a * k + b] = rdrs[(b, a)];
                coef[HEAD + kk + a * k + b] = rs[(a, b)];
                coef[HEAD + 2 * kk + a * k + b] = -sc.h_score.entry(a, b);
            }
        }
        coef
    }

    /// `log P(x) + H_N(x)` for every configuration.
    pub fn log_weights(&self, sc: &Scoring) -> Vec<f64> {
        let coef = self.coefficients(sc);
        self.data
            .chunks_exact(self.stride)
            .map(|row| row.iter().zip(&coef).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Hamiltonian of configuration `c`, without the prior term.
    pub fn hamiltonian_of(&self, c: usize, sc: &Scoring) -> f64 {
        let coef = self.coefficients(sc);
        let row = &self.data[c * self.stride..(c + 1) * self.stride];
        row.iter().zip(&coef).skip(1).map(|(a, b)| a * b).sum()
    }

    /// `log Z = N F_N` by max-shifted log-sum-exp.
    pub fn log_partition(&self, sc: &Scoring) -> f64 {
        let lw = self.log_weights(sc);
        log_sum_exp(&lw)
    }

    /// Gibbs averages; second moments of `vec x` only when requested.
    pub fn summary(&self, ms: &ModelSpec, sc: &Scoring, second_moments: bool) -> GibbsSummary {
        let lw = self.log_weights(sc);
        let log_z = log_sum_exp(&lw);
        let weights: Vec<f64> = lw.iter().map(|l| (l - log_z).exp()).collect();
        let weight_sum_error = (weights.iter().sum::<f64>() - 1.0).abs();
        let (n, k) = (self.n, self.k);
        let mut mean_x = DMatrix::zeros(n, k);
        let mut mean_tensor = DMatrix::zeros(n.pow(self.p), k.pow(self.p));
        let mut second = if second_moments {
            Some(DMatrix::zeros(n * k, n * k))
        } else {
            None
        };
        for (c, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let x = self.config(c);
            mean_x += &x * w;
            mean_tensor += tensor_power(&x, self.p) * w;
            if let Some(s) = second.as_mut() {
                let v = DMatrix::from_fn(n * k, 1, |u, _| x[(u / k, u % k)]);
                *s += &v * v.transpose() * w;
            }
        }
        let mean_xtilde = &mean_tensor * ms.ia().a();
        let mean_h_overlap = mean_xtilde.norm_squared();
        let mean_overlap = SymMatrix::sym_part(&(mean_x.transpose() * &mean_x));
        GibbsSummary {
            log_z,
            mean_x,
            mean_xtilde,
            mean_overlap,
            mean_h_overlap,
            second_moment: second,
            weight_sum_error,
        }
    }

    /// `<H(x^T x')>` by the explicit double sum over configuration pairs.
    pub fn h_overlap_double_sum(&self, ms: &ModelSpec, sc: &Scoring) -> f64 {
        let lw = self.log_weights(sc);
        let log_z = log_sum_exp(&lw);
        let weights: Vec<f64> = lw.iter().map(|l| (l - log_z).exp()).collect();
        let xs: Vec<DMatrix<f64>> = (0..self.len).map(|c| self.config(c)).collect();
        let mut total = 0.0;
        for (a, wa) in weights.iter().enumerate() {
            for (b, wb) in weights.iter().enumerate() {
                total += wa * wb * ms.ia().hval_dense(&(xs[a].transpose() * &xs[b]));
            }
        }
        total
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact Gibbs averages for one disorder sample.
#[derive(Debug, Clone)]
pub struct GibbsSummary {
    /// `N F_N`.
    pub log_z: f64,
    /// `<x>`.
    pub mean_x: DMatrix<f64>,
    /// `<x~>`.
    pub mean_xtilde: DMatrix<f64>,
    /// `<x>^T <x>`, equal to `<x^T x'>` over two replicas.
    pub mean_overlap: SymMatrix,
    /// `<H(x^T x')> = |<x~>|^2`.
    pub mean_h_overlap: f64,
    /// `<vec x vec x^T>` with row-major `vec`.
    pub second_moment: Option<DMatrix<f64>>,
    pub weight_sum_error: f64,
}

/// Gibbs averages at `(t, h)` for data observed at the parameters stored in `ds`.
pub fn gibbs_exact(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    ds: &DisorderSample,
) -> Result<GibbsSummary> {
    check_point(ms, t, h)?;
    let table = ConfigTable::build(ms, ds)?;
    let sc = Scoring {
        t_data: ds.t(),
        h_data: ds.h().clone(),
        t_score: t,
        h_score: h.clone(),
    };
    Ok(table.summary(ms, &sc, false))
}
