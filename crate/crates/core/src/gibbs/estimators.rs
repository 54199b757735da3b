//! Disorder averages of Gibbs quantities.
//!
//! Sample `i` of every estimator uses disorder sample `i` of the same stream,
//! so values at different `(t, h)` share their randomness and differences are
//! taken per sample before averaging.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{HjError, Result};
use crate::estimate::{EstimatorResult, MatrixEstimate};
use crate::gibbs::model::{check_point, disorder_sample, xtilde, DisorderSample, ModelSpec};
use crate::gibbs::table::{ConfigTable, GibbsSummary, Scoring};
use crate::rng::Purpose;
use crate::symcone::{is_psd, SymMatrix, PSD_TOL};

/// Default step for first differences in `t`.
pub const FD_STEP_T: f64 = 1e-3;
/// Default step for second differences along matrix directions.
pub const FD_STEP_MATRIX: f64 = 1e-2;

fn check_samples(nsamples: usize) -> Result<()> {
    if nsamples < 2 {
        return Err(HjError::InvalidArgument(
            "need at least two disorder samples".into(),
        ));
    }
    Ok(())
}

/// Runs `f` on disorder samples `0..nsamples` of `purpose` in parallel and
/// returns the results in index order.
pub fn per_sample<T, F>(ms: &ModelSpec, purpose: Purpose, nsamples: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&DisorderSample, &ConfigTable) -> Result<T> + Sync,
{
    (0..nsamples)
        .into_par_iter()
        .map(|i| {
            let ds = disorder_sample(ms, purpose, i as u64);
            let table = ConfigTable::build(ms, &ds)?;
            f(&ds, &table)
        })
        .collect()
}

/// `F_N` of every sample at every point: `out[sample][point]`.
pub fn free_energy_samples(
    ms: &ModelSpec,
    purpose: Purpose,
    points: &[(f64, SymMatrix)],
    nsamples: usize,
) -> Result<Vec<Vec<f64>>> {
    for (t, h) in points {
        check_point(ms, *t, h)?;
    }
    let n = ms.n() as f64;
    let scorings: Vec<Scoring> = points
        .iter()
        .map(|(t, h)| Scoring::matched(*t, h))
        .collect();
    per_sample(ms, purpose, nsamples, |_, table| {
        Ok(scorings
            .iter()
            .map(|sc| table.log_partition(sc) / n)
            .collect())
    })
}

/// `F-bar_N` at every point.
pub fn fbar_sweep(
    ms: &ModelSpec,
    points: &[(f64, SymMatrix)],
    nsamples: usize,
) -> Result<Vec<EstimatorResult>> {
    check_samples(nsamples)?;
    let samples = free_energy_samples(ms, Purpose::Disorder, points, nsamples)?;
    Ok((0..points.len())
        .map(|j| EstimatorResult::from_samples(&samples.iter().map(|s| s[j]).collect::<Vec<_>>()))
        .collect())
}

pub fn fbar(ms: &ModelSpec, t: f64, h: &SymMatrix, nsamples: usize) -> Result<EstimatorResult> {
    Ok(fbar_sweep(ms, &[(t, h.clone())], nsamples)?[0])
}

/// Mean of a per-sample linear combination `sum_j c_j F_N(point_j)`.
pub fn fbar_combination(
    ms: &ModelSpec,
    points: &[(f64, SymMatrix)],
    coefs: &[f64],
    nsamples: usize,
) -> Result<EstimatorResult> {
    check_samples(nsamples)?;
    let samples = free_energy_samples(ms, Purpose::Disorder, points, nsamples)?;
    let vals: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().zip(coefs).map(|(a, b)| a * b).sum())
        .collect();
    Ok(EstimatorResult::from_samples(&vals))
}

fn summaries(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
    second: bool,
) -> Result<Vec<(DisorderSample, GibbsSummary)>> {
    check_samples(nsamples)?;
    check_point(ms, t, h)?;
    let sc = Scoring::matched(t, h);
    per_sample(ms, Purpose::Disorder, nsamples, |ds, table| {
        Ok((ds.clone(), table.summary(ms, &sc, second)))
    })
}

/// `N^{-p} E |<x~>|^2`.
pub fn dt_fbar(ms: &ModelSpec, t: f64, h: &SymMatrix, nsamples: usize) -> Result<EstimatorResult> {
    let np = (ms.n() as f64).powi(ms.p() as i32);
    let s = summaries(ms, t, h, nsamples, false)?;
    Ok(EstimatorResult::from_samples(
        &s.iter()
            .map(|(_, g)| g.mean_h_overlap / np)
            .collect::<Vec<_>>(),
    ))
}

/// `(1/N) E <x>^T <x>`.
pub fn grad_fbar(ms: &ModelSpec, t: f64, h: &SymMatrix, nsamples: usize) -> Result<MatrixEstimate> {
    let n = ms.n() as f64;
    let s = summaries(ms, t, h, nsamples, false)?;
    let mats: Vec<DMatrix<f64>> = s
        .iter()
        .map(|(_, g)| g.mean_overlap.to_dense() / n)
        .collect();
    Ok(MatrixEstimate::from_samples(&mats))
}

/// Nishimori gaps: the scalar `N^{-p} E[<x~> . X~ - |<x~>|^2]` and the matrix
/// `(1/N) E[<x>^T X - <x>^T <x>]`.
#[derive(Debug, Clone)]
pub struct NishimoriReport {
    pub scalar: EstimatorResult,
    pub matrix: MatrixEstimate,
}

impl NishimoriReport {
    /// Every component within `k` standard errors of zero.
    pub fn within(&self, k: f64) -> bool {
        let (r, c) = self.matrix.mean.shape();
        self.scalar.within(k) && (0..r).all(|i| (0..c).all(|j| self.matrix.entry(i, j).within(k)))
    }

    /// Largest `|mean| / stderr` over all components.
    pub fn max_z(&self) -> f64 {
        let (r, c) = self.matrix.mean.shape();
        let mut z = self.scalar.z_score().abs();
        for i in 0..r {
            for j in 0..c {
                z = z.max(self.matrix.entry(i, j).z_score().abs());
            }
        }
        z
    }
}

pub fn nishimori_gap(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
) -> Result<NishimoriReport> {
    nishimori_gap_scored(ms, &Scoring::matched(t, h), nsamples)
}

/// Nishimori gap when the Gibbs measure is built from a different likelihood
/// than the one that generated the data; the identity then fails.
pub fn nishimori_gap_scored(
    ms: &ModelSpec,
    sc: &Scoring,
    nsamples: usize,
) -> Result<NishimoriReport> {
    check_samples(nsamples)?;
    check_point(ms, sc.t_data, &sc.h_data)?;
    check_point(ms, sc.t_score, &sc.h_score)?;
    let n = ms.n() as f64;
    let np = n.powi(ms.p() as i32);
    let truth_sc = Scoring::matched(sc.t_data, &sc.h_data);
    let rows = per_sample(ms, Purpose::Disorder, nsamples, |ds, table| {
        let g = table.summary(ms, sc, false);
        let gram = g.mean_x.transpose() * &g.mean_x;
        let mut scalar = 0.0;
        let mut matrix = DMatrix::zeros(ms.k(), ms.k());
        for (x, pi) in sign_orbit(table, &truth_sc, &ds.x) {
            scalar += pi * (g.mean_xtilde.dot(&xtilde(ms.ia(), &x)) - g.mean_h_overlap) / np;
            matrix += (g.mean_x.transpose() * &x - &gram) * (pi / n);
        }
        Ok((scalar, matrix))
    })?;
    let scalars: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mats: Vec<DMatrix<f64>> = rows.into_iter().map(|r| r.1).collect();
    Ok(NishimoriReport {
        scalar: EstimatorResult::from_samples(&scalars),
        matrix: MatrixEstimate::from_samples(&mats),
    })
}

/// `{X, -X}` with the conditional law of the truth given the observations and
/// the orbit, i.e. posterior weights under the data-generating likelihood.
/// Averaging a statistic over it keeps its expectation and removes the rare
/// samples whose posterior sits on the wrong sign.
fn sign_orbit(
    table: &ConfigTable,
    truth_sc: &Scoring,
    x: &DMatrix<f64>,
) -> Vec<(DMatrix<f64>, f64)> {
    let flipped = -x;
    let c0 = table.index_of(x).expect("truth is a configuration");
    match table.index_of(&flipped).filter(|&c1| c1 != c0) {
        None => vec![(x.clone(), 1.0)],
        Some(c1) => {
            let l0 = table.log_weight_of(c0, truth_sc);
            let l1 = table.log_weight_of(c1, truth_sc);
            let p1 = 1.0 / (1.0 + (l0 - l1).exp());
            vec![(x.clone(), 1.0 - p1), (flipped, p1)]
        }
    }
}

/// Both sides of `d_t F-bar - H(grad F-bar) = N^{-p}(E<H(x^T x')> - H(E<x^T x'>))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Standard error of `lhs - rhs` from the paired per-sample difference.
    pub stderr: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    /// Richardson estimate `|FD(2e) - FD(e)| / 3` of the difference bias.
    pub fd_bias: f64,
    pub nsamples: usize,
}

impl ResidualReport {
    pub fn passes(&self, k: f64) -> bool {
        self.gap <= k * (self.fd_bias + self.stderr)
    }
}

pub fn residual_identity(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
    fd_step: f64,
) -> Result<ResidualReport> {
    check_samples(nsamples)?;
    if !(fd_step > 0.0 && t > fd_step) {
        return Err(HjError::InvalidArgument(format!(
            "need t > fd_step > 0, got t = {t}, step = {fd_step}"
        )));
    }
    check_point(ms, t, h)?;
    let e = fd_step;
    let near = t >= 2.0 * e;
    let n = ms.n() as f64;
    let np = n.powi(ms.p() as i32);
    let at = Scoring::matched(t, h);
    let shifted: Vec<Scoring> = [
        t + e,
        t - e,
        t + 2.0 * e,
        if near { t - 2.0 * e } else { t },
    ]
    .iter()
    .map(|&s| Scoring::matched(s, h))
    .collect();
    let rows = per_sample(ms, Purpose::Disorder, nsamples, |_, table| {
        let f: Vec<f64> = shifted
            .iter()
            .map(|sc| table.log_partition(sc) / n)
            .collect();
        let fd1 = (f[0] - f[1]) / (2.0 * e);
        let fd2 = if near {
            (f[2] - f[3]) / (4.0 * e)
        } else {
            (f[2] - f[1]) / (3.0 * e)
        };
        let g = table.summary(ms, &at, false);
        Ok((
            fd1,
            fd2,
            g.mean_h_overlap / np,
            g.mean_overlap.scale(1.0 / n),
        ))
    })?;
    let k = ms.k();
    let mut gbar = SymMatrix::zeros(k);
    for r in &rows {
        gbar = gbar.axpy(1.0 / rows.len() as f64, &r.3);
    }
    let hg = ms.ia().hval(&gbar)?;
    let dh = ms.ia().hgrad_unchecked(&gbar);
    let lin: Vec<f64> = rows.iter().map(|r| dh.dot(&r.3)).collect();
    let fd: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let lhs_lin: Vec<f64> = rows.iter().zip(&lin).map(|(r, l)| r.0 - l).collect();
    let rhs_lin: Vec<f64> = rows.iter().zip(&lin).map(|(r, l)| r.2 - l).collect();
    let paired: Vec<f64> = rows.iter().map(|r| r.0 - r.2).collect();
    let dt: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let fd_mean = EstimatorResult::from_samples(&fd).mean;
    let fd2_mean =
        EstimatorResult::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>()).mean;
    let lhs = fd_mean - hg;
    let rhs = EstimatorResult::from_samples(&dt).mean - hg;
    let pair = EstimatorResult::from_samples(&paired);
    Ok(ResidualReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        stderr: pair.stderr,
        lhs_stderr: EstimatorResult::from_samples(&lhs_lin).stderr,
        rhs_stderr: EstimatorResult::from_samples(&rhs_lin).stderr,
        fd_bias: (fd2_mean - fd_mean).abs() / 3.0,
        nsamples: rows.len(),
    })
}

/// Central second difference of `F-bar_N` along the matrix direction `a`.
pub fn second_deriv_quadform(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    a: &SymMatrix,
    nsamples: usize,
    fd_step: f64,
) -> Result<EstimatorResult> {
    let plus = h.axpy(fd_step, a);
    let minus = h.axpy(-fd_step, a);
    for q in [&plus, &minus] {
        if !is_psd(q, PSD_TOL) {
            return Err(HjError::NotPsd {
                min_eigenvalue: q.min_eigenvalue(),
            });
        }
    }
    let e2 = fd_step * fd_step;
    fbar_combination(
        ms,
        &[(t, plus), (t, h.clone()), (t, minus)],
        &[1.0 / e2, -2.0 / e2, 1.0 / e2],
        nsamples,
    )
}

/// Central second difference of `F-bar_N` in `t`.
pub fn second_deriv_t(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
    fd_step: f64,
) -> Result<EstimatorResult> {
    if !(fd_step > 0.0 && t >= fd_step) {
        return Err(HjError::InvalidArgument(format!(
            "need t >= fd_step > 0, got t = {t}, step = {fd_step}"
        )));
    }
    let e2 = fd_step * fd_step;
    fbar_combination(
        ms,
        &[
            (t + fd_step, h.clone()),
            (t, h.clone()),
            (t - fd_step, h.clone()),
        ],
        &[1.0 / e2, -2.0 / e2, 1.0 / e2],
        nsamples,
    )
}

/// Centered first difference of `F-bar_N` in `t`.
pub fn fd_dt_fbar(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
    fd_step: f64,
) -> Result<EstimatorResult> {
    if !(fd_step > 0.0 && t >= fd_step) {
        return Err(HjError::InvalidArgument(format!(
            "need t >= fd_step > 0, got t = {t}, step = {fd_step}"
        )));
    }
    let c = 1.0 / (2.0 * fd_step);
    fbar_combination(
        ms,
        &[(t + fd_step, h.clone()), (t - fd_step, h.clone())],
        &[c, -c],
        nsamples,
    )
}

/// Mixed second difference `a . grad(b . grad F-bar_N)`.
pub fn mixed_second_difference(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    a: &SymMatrix,
    b: &SymMatrix,
    nsamples: usize,
    fd_step: f64,
) -> Result<EstimatorResult> {
    let e = fd_step;
    let pts: Vec<(f64, SymMatrix)> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(sa, sb)| (t, h.axpy(sa * e, a).axpy(sb * e, b)))
        .collect();
    for (_, q) in &pts {
        if !is_psd(q, PSD_TOL) {
            return Err(HjError::NotPsd {
                min_eigenvalue: q.min_eigenvalue(),
            });
        }
    }
    let c = 1.0 / (4.0 * e * e);
    fbar_combination(ms, &pts, &[c, -c, -c, c], nsamples)
}

/// Empirical concentration constant with its sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhatReport {
    pub khat: f64,
    pub nsamples: usize,
}

/// `sqrt(E max_grid |F_N - F-bar_N|^2)`, with `F-bar_N` from an independent batch.
pub fn concentration_khat(
    ms: &ModelSpec,
    m: f64,
    grid: &[(f64, SymMatrix)],
    nsamples: usize,
) -> Result<KhatReport> {
    check_samples(nsamples)?;
    if grid.is_empty() {
        return Err(HjError::EmptyGrid);
    }
    for (t, h) in grid {
        if *t > m * (1.0 + 1e-12) || h.norm() > m * (1.0 + 1e-12) {
            return Err(HjError::InvalidArgument(format!(
                "grid point (t = {t}, |h| = {}) outside the box of size {m}",
                h.norm()
            )));
        }
    }
    let reference = free_energy_samples(ms, Purpose::Reference, grid, nsamples)?;
    let means: Vec<f64> = (0..grid.len())
        .map(|j| {
            EstimatorResult::from_samples(&reference.iter().map(|s| s[j]).collect::<Vec<_>>()).mean
        })
        .collect();
    let main = free_energy_samples(ms, Purpose::Disorder, grid, nsamples)?;
    let worst: Vec<f64> = main
        .iter()
        .map(|s| {
            s.iter()
                .zip(&means)
                .map(|(f, m)| (f - m) * (f - m))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(KhatReport {
        khat: EstimatorResult::from_samples(&worst).mean.sqrt(),
        nsamples,
    })
}

/// `(2/N) E sum_{i,j} (<x_i1 x_j2> - <x_i1><x_j2>)^2` over all rows, which
/// equals `e11 . grad(e22 . grad F-bar_N)` for `K = 2`. The factor 2 comes from
/// the side channel `X sqrt(2h) + Z`.
pub fn cross_derivative(
    ms: &ModelSpec,
    t: f64,
    h: &SymMatrix,
    nsamples: usize,
) -> Result<EstimatorResult> {
    if ms.k() != 2 {
        return Err(HjError::DimensionMismatch {
            expected: 2,
            got: ms.k(),
        });
    }
    check_samples(nsamples)?;
    check_point(ms, t, h)?;
    let sc = Scoring::matched(t, h);
    let n = ms.n();
    let vals = per_sample(ms, Purpose::Disorder, nsamples, |_, table| {
        let g = table.summary(ms, &sc, true);
        let s = g.second_moment.as_ref().expect("second moments requested");
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = s[(2 * i, 2 * j + 1)] - g.mean_x[(i, 0)] * g.mean_x[(j, 1)];
                total += c * c;
            }
        }
        Ok(2.0 * total / n as f64)
    })?;
    Ok(EstimatorResult::from_samples(&vals))
}

/// `E_prior[x^{(x) p}] A`, the prior mean of `x~` for independent rows.
pub fn prior_mean_xtilde(ms: &ModelSpec) -> DMatrix<f64> {
    let (n, k, p) = (ms.n(), ms.k(), ms.p() as usize);
    let rows = n.pow(p as u32);
    let cols = k.pow(p as u32);
    let digits = |mut idx: usize, base: usize| {
        let mut d = vec![0; p];
        for slot in (0..p).rev() {
            d[slot] = idx % base;
            idx /= base;
        }
        d
    };
    let moment = DMatrix::from_fn(rows, cols, |r, c| {
        let ri = digits(r, n);
        let ci = digits(c, k);
        let mut total = 1.0;
        let mut done = vec![false; p];
        for s in 0..p {
            if done[s] {
                continue;
            }
            let row = ri[s];
            let slots: Vec<usize> = (s..p).filter(|&u| ri[u] == row).collect();
            for &u in &slots {
                done[u] = true;
            }
            let prior = ms.row_prior(row);
            total *= prior
                .atoms()
                .iter()
                .zip(prior.weights())
                .map(|(a, w)| w * slots.iter().map(|&u| a[ci[u]]).product::<f64>())
                .sum::<f64>();
        }
        total
    });
    moment * ms.ia().a()
}

/// Mean-zero controls of one sample at `(t, h)`: the planted channel term
/// `sqrt(2t/N^{p-1}) X~ . W / N`, the side-channel term `sqrt(2h) . X^T Z / N`
/// and the prior-mean term `sqrt(2t/N^{p-1}) E_prior[x~] . W / N`.
fn controls(
    ms: &ModelSpec,
    ds: &DisorderSample,
    prior_xt: &DMatrix<f64>,
    t: f64,
    h: &SymMatrix,
) -> [f64; 3] {
    let n = ms.n() as f64;
    let a = (2.0 * t / ms.channel_scale()).sqrt();
    let r = crate::gibbs::model::sqrt_two_h(h);
    let xtz = ds.x.transpose() * &ds.z;
    [
        a * xtilde(ms.ia(), &ds.x).dot(&ds.w) / n,
        crate::gibbs::model::sym_dot_dense(&r, &xtz) / n,
        a * prior_xt.dot(&ds.w) / n,
    ]
}

/// `F-bar_N` at every point with control variates. The regression
/// coefficients are fitted on an independent pilot batch, so each estimate
/// stays unbiased; the standard error is that of the controlled samples.
pub fn fbar_sweep_controlled(
    ms: &ModelSpec,
    points: &[(f64, SymMatrix)],
    nsamples: usize,
    npilot: usize,
) -> Result<Vec<EstimatorResult>> {
    check_samples(nsamples)?;
    check_samples(npilot)?;
    for (t, h) in points {
        check_point(ms, *t, h)?;
    }
    let n = ms.n() as f64;
    let prior_xt = prior_mean_xtilde(ms);
    let scorings: Vec<Scoring> = points
        .iter()
        .map(|(t, h)| Scoring::matched(*t, h))
        .collect();
    let run = |purpose, count| {
        per_sample(ms, purpose, count, |ds, table| {
            Ok(scorings
                .iter()
                .zip(points)
                .map(|(sc, (t, h))| {
                    (
                        table.log_partition(sc) / n,
                        controls(ms, ds, &prior_xt, *t, h),
                    )
                })
                .collect::<Vec<_>>())
        })
    };
    let pilot = run(Purpose::Reference, npilot)?;
    let main = run(Purpose::Disorder, nsamples)?;
    Ok((0..points.len())
        .map(|j| {
            let beta = regression(&pilot.iter().map(|s| s[j]).collect::<Vec<_>>());
            let vals: Vec<f64> = main
                .iter()
                .map(|s| {
                    let (f, c) = s[j];
                    f - (0..3).map(|m| beta[m] * c[m]).sum::<f64>()
                })
                .collect();
            EstimatorResult::from_samples(&vals)
        })
        .collect())
}

/// Least-squares coefficients of centred `f` on centred controls.
fn regression(rows: &[(f64, [f64; 3])]) -> [f64; 3] {
    let m = rows.len() as f64;
    let fmean = rows.iter().map(|r| r.0).sum::<f64>() / m;
    let cmean: Vec<f64> = (0..3)
        .map(|j| rows.iter().map(|r| r.1[j]).sum::<f64>() / m)
        .collect();
    let x = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].1[j] - cmean[j]);
    let y = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|r| r.0 - fmean));
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * y;
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    match gram.svd(true, true).solve(&rhs, 1e-10 * scale) {
        Ok(b) => [b[0], b[1], b[2]],
        Err(_) => [0.0; 3],
    }
}
