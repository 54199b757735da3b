//! Experiment runners. Every check row records the statistic, the relation
//! and the threshold it is held to.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use hjcone::coneconjugate::{fm_gap, monotone_convex_report, GridFunction, SCAN_TOL};
use hjcone::estimate::EstimatorResult;
use hjcone::gibbs::{
    build_nonsym_spec, concentration_khat, cross_derivative, dt_fbar, fbar_sweep_controlled,
    grad_fbar, mixed_second_difference, nishimori_gap, nishimori_gap_scored, psi_decoupled,
    residual_identity, second_deriv_quadform, second_deriv_t, Scoring, FD_STEP_MATRIX, FD_STEP_T,
};
use hjcone::hopf::{lipschitz_estimate, HopfProblem, HopfSurface};
use hjcone::nonlinearity::{check_dh_psd, convexity_probe, Interaction};
use hjcone::rng::{stream, Purpose};
use hjcone::symcone::{cone_grid, sample_psd, sample_sym, ConeGrid, SymMatrix};

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{
    CheckRow, ConvergenceCell, ConvergenceReport, ConvergenceRow, Relation, SuiteReport, Table,
};
use crate::{LabError, Result};

/// Standard errors allowed for statistical zero checks.
pub const Z_BOUND: f64 = 3.0;
/// Standard errors the mismatched-likelihood control must exceed.
pub const CONTROL_Z: f64 = 5.0;
/// Absolute floor for statistics that vanish to rounding, e.g. `<x> = 0`
/// under an exact sign symmetry, where mean and stderr are both round-off.
pub const ROUNDING_FLOOR: f64 = 1e-12;
pub const FM_TOL: f64 = 1e-9;
pub const FM_BROKEN_MIN: f64 = 1e-3;
pub const DH_PSD_TOL: f64 = 1e-8;
pub const DH_PSD_TRIALS: usize = 1000;
pub const TRANSLATION_TOL: f64 = 1e-9;
pub const HESSIAN_TOL: f64 = 1e-14;
pub const SECOND_DIFF_SLACK: f64 = 1e-3;
pub const FINAL_SUP_GAP: f64 = 0.05;
pub const KHAT_FACTOR: f64 = 2.0;
/// Data at `t = 1`, Gibbs measure at `t = 4`.
pub const MISMATCH_T_DATA: f64 = 1.0;
pub const MISMATCH_T_SCORE: f64 = 4.0;

const FENCHEL_FUNCTIONS_PER_K: usize = 25;
const SIGN_POINTS: usize = 6;
const SIGN_DIRECTIONS: usize = 5;
const CONVEXITY_TRIALS: usize = 1000;

fn fmt_h(h: &SymMatrix) -> String {
    let c: Vec<String> = h.coords().iter().map(|v| format!("{v}")).collect();
    format!("({})", c.join(" "))
}

fn scaled_identity(k: usize, s: f64) -> SymMatrix {
    SymMatrix::identity(k).scale(s)
}

fn check_t_grid(t: &[f64]) -> Result<f64> {
    if t.is_empty() || t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(LabError::Config(
            "t grid must be nonempty, finite and nonnegative".into(),
        ));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config(
            "t grid must be strictly increasing".into(),
        ));
    }
    Ok(t[t.len() - 1])
}

fn sorted_n(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    let mut n = cfg.model.n_values.clone();
    n.sort_unstable();
    n.dedup();
    if n.is_empty() || n[0] == 0 {
        return Err(LabError::Config("n_values must hold positive sizes".into()));
    }
    Ok(n)
}

/// Hopf problem with `psi = F-bar_1(0, .)` tabulated on the psi grid, and the
/// `x` grid it is evaluated on.
pub fn hopf_reference(cfg: &ExperimentConfig) -> Result<(HopfProblem, Arc<ConeGrid>)> {
    let m = &cfg.model;
    let g = &cfg.grids;
    let tmax = check_t_grid(&g.t)?;
    let ia = m.interaction()?;
    let ms1 = m.spec(1, cfg.seed)?;
    let xgrid = Arc::new(cone_grid(m.k, g.h_radius, g.h_step)?);
    let zgrid = Arc::new(cone_grid(m.k, g.z_radius, g.z_step)?);
    let dh_sup = zgrid
        .points()
        .iter()
        .map(|z| ia.hgrad_unchecked(z).norm())
        .fold(0.0, f64::max);
    let needed = g.h_radius + tmax * dh_sup;
    if g.psi_radius < needed {
        return Err(LabError::Config(format!(
            "psi grid radius {} is below h_radius + t_max sup|DH| = {needed}",
            g.psi_radius
        )));
    }
    psi_decoupled(&ms1, &SymMatrix::zeros(m.k), g.quad_order)?;
    let psigrid = Arc::new(cone_grid(m.k, g.psi_radius, g.psi_step)?);
    let psi = GridFunction::tabulate(psigrid, "psi", |h| {
        psi_decoupled(&ms1, h, g.quad_order).expect("order and dimension checked")
    })?;
    Ok((HopfProblem::new(ia, psi, zgrid)?, xgrid))
}

pub fn run_converge(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let (hp, xgrid) = hopf_reference(cfg)?;
    let tgrid = &cfg.grids.t;
    let surface = hp.hopf_surface(tgrid, &xgrid)?;
    let points: Vec<(f64, SymMatrix)> = tgrid
        .iter()
        .flat_map(|&t| xgrid.points().iter().map(move |x| (t, x.clone())))
        .collect();
    let nx = xgrid.len();
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for n in sorted_n(cfg)? {
        let ms = cfg.model.spec(n, cfg.seed)?;
        let est = fbar_sweep_controlled(&ms, &points, cfg.nsamples, cfg.pilot_samples)?;
        let mut row = ConvergenceRow {
            n,
            sup_gap: 0.0,
            l1_gap: 0.0,
            max_stderr: 0.0,
            max_signed_gap: f64::NEG_INFINITY,
            max_signed_z: f64::NEG_INFINITY,
        };
        for (ti, &t) in tgrid.iter().enumerate() {
            let mut l1 = 0.0;
            for xi in 0..nx {
                let e = est[ti * nx + xi];
                let f = surface.value(ti, xi);
                let gap = e.mean - f;
                l1 += gap.abs();
                row.sup_gap = row.sup_gap.max(gap.abs());
                row.max_stderr = row.max_stderr.max(e.stderr);
                row.max_signed_gap = row.max_signed_gap.max(gap);
                row.max_signed_z = row.max_signed_z.max(signed_z(gap, e.stderr));
                cells.push(ConvergenceCell {
                    n,
                    t,
                    h: xgrid.point(xi).coords().to_vec(),
                    fbar: e.mean,
                    stderr: e.stderr,
                    f,
                });
            }
            row.l1_gap = row.l1_gap.max(l1 / nx as f64);
        }
        rows.push(row);
    }
    let p = cfg.model.p;
    Ok(ConvergenceReport {
        p,
        upper_bound_only: p >= 3 && p % 2 == 1,
        rows,
        cells,
        surface,
    })
}

/// `gap / stderr`, treating a vanishing spread with a vanishing gap as zero.
fn signed_z(gap: f64, stderr: f64) -> f64 {
    if stderr > 1e-12 {
        gap / stderr
    } else if gap.abs() <= 1e-12 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

fn surface_table(surface: &HopfSurface) -> Table {
    let d = surface
        .xgrid
        .points()
        .first()
        .map_or(0, |p| p.coords().len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("coord_{i}")));
    header.push("value".into());
    let nx = surface.xgrid.len();
    let mut rows = Vec::new();
    for (ti, &t) in surface.tgrid.iter().enumerate() {
        for xi in 0..nx {
            let mut r = vec![t];
            r.extend_from_slice(surface.xgrid.point(xi).coords());
            r.push(surface.value(ti, xi));
            rows.push(r);
        }
    }
    Table {
        name: "hopf-surface".into(),
        header,
        rows,
    }
}

impl ConvergenceReport {
    pub fn to_suite(&self) -> SuiteReport {
        let mut rep = SuiteReport::new(Experiment::Converge.name());
        if self.upper_bound_only {
            for r in &self.rows {
                rep.checks.push(CheckRow::at_most(
                    format!("upper-bound only: N={} max (F-bar - f)/stderr", r.n),
                    r.max_signed_z,
                    Z_BOUND,
                ));
            }
        } else {
            let worst_step = self
                .rows
                .windows(2)
                .map(|w| w[1].sup_gap - w[0].sup_gap)
                .fold(f64::NEG_INFINITY, f64::max);
            if self.rows.len() >= 2 {
                rep.checks.push(CheckRow::new(
                    "sup-gap increment between consecutive N",
                    worst_step,
                    Relation::Below,
                    0.0,
                ));
            }
            if let Some(last) = self.rows.last() {
                rep.checks.push(CheckRow::at_most(
                    format!("sup-gap at N={}", last.n),
                    last.sup_gap,
                    FINAL_SUP_GAP,
                ));
            }
        }
        rep.tables.push(Table {
            name: "gaps".into(),
            header: [
                "n",
                "sup_gap",
                "l1_gap",
                "max_stderr",
                "max_signed_gap",
                "max_signed_z",
            ]
            .map(String::from)
            .to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n as f64,
                        r.sup_gap,
                        r.l1_gap,
                        r.max_stderr,
                        r.max_signed_gap,
                        r.max_signed_z,
                    ]
                })
                .collect(),
        });
        let d = self.cells.first().map_or(0, |c| c.h.len());
        let mut header = vec!["n".to_string(), "t".to_string()];
        header.extend((1..=d).map(|i| format!("coord_{i}")));
        header.extend(["fbar", "stderr", "f"].map(String::from));
        rep.tables.push(Table {
            name: "cells".into(),
            header,
            rows: self
                .cells
                .iter()
                .map(|c| {
                    let mut r = vec![c.n as f64, c.t];
                    r.extend_from_slice(&c.h);
                    r.extend([c.fbar, c.stderr, c.f]);
                    r
                })
                .collect(),
        });
        rep.tables.push(surface_table(&self.surface));
        rep
    }
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(cfg.experiment.name());
    match cfg.experiment {
        Experiment::Converge => return Ok(run_converge(cfg)?.to_suite()),
        Experiment::IdentitySuite => {
            rep.extend(nishimori_checks(cfg)?);
            rep.extend(residual_checks(cfg)?);
            rep.extend(sign_checks(cfg)?);
        }
        Experiment::FenchelSuite => rep.extend(fenchel_checks(cfg)?),
        Experiment::HopfSuite => {
            rep.extend(dh_psd_checks(cfg)?);
            rep.extend(hopf_structural_checks(cfg)?);
        }
        Experiment::Concentration => rep.extend(concentration_checks(cfg)?),
        Experiment::NonsymDemo => rep.extend(nonsym_checks(cfg)?),
    }
    Ok(rep)
}

/// `|mean| <= 3 stderr` for an estimate that should vanish.
fn zero_check(name: String, e: &EstimatorResult) -> CheckRow {
    CheckRow::at_most(name, e.mean.abs(), Z_BOUND * e.stderr + ROUNDING_FLOOR)
}

pub fn nishimori_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("nishimori");
    let k = cfg.model.k;
    for n in sorted_n(cfg)? {
        let ms = cfg.model.spec(n, cfg.seed)?;
        for t in [0.25, 1.0, 2.0] {
            for hs in [0.0, 0.5, 1.0] {
                let h = scaled_identity(k, hs);
                let r = nishimori_gap(&ms, t, &h, cfg.nsamples)?;
                rep.checks.push(zero_check(
                    format!("nishimori scalar gap N={n} t={t} h={}", fmt_h(&h)),
                    &r.scalar,
                ));
                for i in 0..k {
                    for j in i..k {
                        rep.checks.push(zero_check(
                            format!("nishimori matrix gap [{i}{j}] N={n} t={t} h={}", fmt_h(&h)),
                            &r.matrix.entry(i, j),
                        ));
                    }
                }
            }
        }
        let h = scaled_identity(k, 0.5);
        let sc = Scoring {
            t_data: MISMATCH_T_DATA,
            h_data: h.clone(),
            t_score: MISMATCH_T_SCORE,
            h_score: h.clone(),
        };
        let r = nishimori_gap_scored(&ms, &sc, cfg.nsamples)?;
        rep.checks.push(CheckRow::at_least(
            format!("mismatched control |gap|/stderr N={n} t={MISMATCH_T_DATA} scored at t={MISMATCH_T_SCORE}"),
            r.scalar.z_score().abs(),
            CONTROL_Z,
        ));
    }
    Ok(rep)
}

pub fn residual_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("residual");
    let h = scaled_identity(cfg.model.k, 0.5);
    let mut rows = Vec::new();
    for n in sorted_n(cfg)? {
        let ms = cfg.model.spec(n, cfg.seed)?;
        let r = residual_identity(&ms, 0.5, &h, cfg.nsamples, FD_STEP_T)?;
        rep.checks.push(CheckRow::at_most(
            format!("residual identity |lhs - rhs| N={n} t=0.5 h={}", fmt_h(&h)),
            r.gap,
            Z_BOUND * (r.fd_bias + r.stderr),
        ));
        rows.push(vec![n as f64, r.lhs, r.rhs, r.gap, r.stderr, r.fd_bias]);
    }
    rep.tables.push(Table {
        name: "residual".into(),
        header: ["n", "lhs", "rhs", "gap", "stderr", "fd_bias"]
            .map(String::from)
            .to_vec(),
        rows,
    });
    Ok(rep)
}

/// Random interior points `(t, h)` with `lambda_min(h) >= 0.1`, and unit
/// directions; `h +- 0.01 a` stays in the cone.
pub fn sign_points(cfg: &ExperimentConfig) -> Vec<(f64, SymMatrix, Vec<SymMatrix>)> {
    let k = cfg.model.k;
    let mut rng = stream(cfg.seed, Purpose::Probe, 0);
    (0..SIGN_POINTS)
        .map(|_| {
            let t = 0.1 + 1.9 * rng.random::<f64>();
            let h = sample_psd(&mut rng, k, 1.5).axpy(0.1, &SymMatrix::identity(k));
            let dirs = (0..SIGN_DIRECTIONS)
                .map(|_| {
                    let a = sample_sym(&mut rng, k);
                    a.scale(1.0 / a.norm())
                })
                .collect();
            (t, h, dirs)
        })
        .collect()
}

pub fn sign_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("signs");
    let n = *sorted_n(cfg)?.last().expect("nonempty");
    let ms = cfg.model.spec(n, cfg.seed)?;
    let ns = cfg.nsamples;
    for (pi, (t, h, dirs)) in sign_points(cfg).iter().enumerate() {
        let tag = format!("N={n} point {pi} t={t} h={}", fmt_h(h));
        let dt = dt_fbar(&ms, *t, h, ns)?;
        rep.checks.push(CheckRow::at_least(
            format!("dt F-bar {tag}"),
            dt.mean,
            -Z_BOUND * dt.stderr,
        ));
        let g = grad_fbar(&ms, *t, h, ns)?;
        let lam = SymMatrix::sym_part(&g.mean).min_eigenvalue();
        rep.checks.push(CheckRow::at_least(
            format!("min eigenvalue of grad F-bar {tag}"),
            lam,
            -Z_BOUND * g.stderr_norm(),
        ));
        let d2 = second_deriv_t(&ms, *t, h, ns, FD_STEP_T)?;
        rep.checks.push(CheckRow::at_least(
            format!("second difference in t {tag}"),
            d2.mean,
            -Z_BOUND * d2.stderr - SECOND_DIFF_SLACK,
        ));
        for (di, a) in dirs.iter().enumerate() {
            let q = second_deriv_quadform(&ms, *t, h, a, ns, FD_STEP_MATRIX)?;
            rep.checks.push(CheckRow::at_least(
                format!("second difference along direction {di} {tag}"),
                q.mean,
                -Z_BOUND * q.stderr - SECOND_DIFF_SLACK,
            ));
        }
    }
    Ok(rep)
}

pub fn fenchel_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("fenchel");
    let mut rng = stream(cfg.seed, Purpose::Probe, 2);
    for (k, step) in [(1usize, 1.0 / 16.0), (2, 0.25)] {
        let ygrid = Arc::new(cone_grid(k, 2.0, step)?);
        let zgrid = Arc::new(cone_grid(k, 2.0, step)?);
        for i in 0..FENCHEL_FUNCTIONS_PER_K {
            let pieces = 1 + rng.random_range(0..5usize);
            let affine: Vec<(SymMatrix, f64)> = (0..pieces)
                .map(|_| {
                    let z = zgrid.point(rng.random_range(0..zgrid.len())).clone();
                    (z, rng.random_range(-1.0..1.0))
                })
                .collect();
            let u = GridFunction::tabulate(ygrid.clone(), "u", |y| {
                affine
                    .iter()
                    .map(|(z, c)| z.dot(y) + c)
                    .fold(f64::NEG_INFINITY, f64::max)
            })?;
            rep.checks.push(CheckRow::at_most(
                format!("fm gap K={k} max of {pieces} affine functions #{i}"),
                fm_gap(&u, &zgrid)?,
                FM_TOL,
            ));
        }
        let tr = GridFunction::tabulate(ygrid.clone(), "tr", |y| y.trace())?;
        rep.checks.push(CheckRow::at_most(
            format!("fm gap K={k} trace"),
            fm_gap(&tr, &zgrid)?,
            FM_TOL,
        ));
        let neg = GridFunction::tabulate(ygrid.clone(), "-tr", |y| -y.trace())?;
        rep.checks.push(CheckRow::new(
            format!("fm gap K={k} decreasing -trace"),
            fm_gap(&neg, &zgrid)?,
            Relation::Above,
            FM_BROKEN_MIN,
        ));
    }
    Ok(rep)
}

pub fn dh_psd_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("dh-psd");
    let mut rng = stream(cfg.seed, Purpose::Probe, 1);
    let mut cases: Vec<(String, Interaction)> = Vec::new();
    for k in [1usize, 2] {
        for p in 1..=4u32 {
            cases.push((
                format!("special K={k} p={p}"),
                Interaction::special_diagonal(k, p),
            ));
        }
    }
    for p in [2u32, 3] {
        for i in 0..3 {
            cases.push((
                format!("general K=2 p={p} #{i}"),
                Interaction::random_general(&mut rng, 2, p, 2),
            ));
        }
    }
    for (name, ia) in cases {
        let r = check_dh_psd(&ia, DH_PSD_TRIALS, &mut rng);
        rep.checks.push(CheckRow::at_least(
            format!("min eigenvalue of DH {name}"),
            r.min_eigenvalue,
            -DH_PSD_TOL,
        ));
    }
    Ok(rep)
}

pub fn hopf_structural_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("hopf");
    let g = &cfg.grids;
    let (hp, xgrid) = hopf_reference(cfg)?;
    let delta = g.psi_step.max(g.z_step);
    let lip_psi = hp.psi().lipschitz_estimate();

    let mut ic = 0.0f64;
    for x in xgrid.points() {
        let psi_x = match hp.psi().grid().locate(x) {
            Some(i) => hp.psi().value(i),
            None => psi_decoupled(&cfg.model.spec(1, cfg.seed)?, x, g.quad_order)?,
        };
        ic = ic.max((hp.hopf_eval(0.0, x)? - psi_x).abs());
    }
    rep.checks.push(CheckRow::at_most(
        "initial condition max |f(0, x) - psi(x)|",
        ic,
        2.0 * delta * (1.0 + lip_psi),
    ));

    let surface = hp.hopf_surface(&g.t, &xgrid)?;
    let lip_f = lipschitz_estimate(&surface)?;
    let sg = hp.semigroup_gap(0.5, 0.5, &xgrid)?;
    rep.checks.push(CheckRow::at_most(
        "semigroup gap t=0.5 s=0.5",
        sg,
        2.0 * delta * (1.0 + lip_f),
    ));

    let plain = hp
        .clone()
        .with_refinement(false)
        .hopf_surface(&g.t, &xgrid)?;
    let nx = xgrid.len();
    let mut t_viol = 0usize;
    for ti in 1..g.t.len() {
        for xi in 0..nx {
            if plain.value(ti, xi) < plain.value(ti - 1, xi) - SCAN_TOL {
                t_viol += 1;
            }
        }
    }
    rep.checks.push(CheckRow::at_most(
        "violations of monotonicity in t",
        t_viol as f64,
        0.0,
    ));
    let mut order = 0usize;
    let mut convex = 0usize;
    for ti in 0..g.t.len() {
        let r = monotone_convex_report(&plain.slice(ti)?);
        order += r.nondecreasing_violations;
        convex += r.midpoint_convexity_violations;
    }
    rep.checks.push(CheckRow::at_most(
        "violations of Loewner monotonicity in x",
        order as f64,
        0.0,
    ));
    rep.checks.push(CheckRow::at_most(
        "violations of midpoint convexity in x",
        convex as f64,
        0.0,
    ));

    rep.checks.push(CheckRow::at_most(
        "p=1 translation identity K=2 max error",
        translation_error()?,
        TRANSLATION_TOL,
    ));
    rep.tables.push(surface_table(&surface));
    Ok(rep)
}

/// Largest `|f(t, x) - (tr x + 2t)|` for `psi = tr`, special `p = 1`, `K = 2`,
/// over `x + t 11^T` inside the psi grid.
pub fn translation_error() -> Result<f64> {
    let radius = 3.0;
    let psigrid = Arc::new(cone_grid(2, radius, 0.25)?);
    let zgrid = Arc::new(cone_grid(2, 2.0, 0.25)?);
    let psi = GridFunction::tabulate(psigrid, "tr", |y| y.trace())?;
    let hp = HopfProblem::new(Interaction::special_diagonal(2, 1), psi, zgrid)?;
    let xgrid = cone_grid(2, 1.0, 0.25)?;
    let ones = SymMatrix::from_fn(2, |_, _| 1.0);
    let mut worst = 0.0f64;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        for x in xgrid.points() {
            if x.axpy(t, &ones).norm() > radius {
                continue;
            }
            worst = worst.max((hp.hopf_eval(t, x)? - (x.trace() + 2.0 * t)).abs());
        }
    }
    Ok(worst)
}

pub fn concentration_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Experiment::Concentration.name());
    let g = &cfg.grids;
    let m = g.h_radius;
    check_t_grid(&g.t)?;
    let xgrid = cone_grid(cfg.model.k, m, g.h_step)?;
    let grid: Vec<(f64, SymMatrix)> =
        g.t.iter()
            .flat_map(|&t| xgrid.points().iter().map(move |x| (t, x.clone())))
            .collect();
    let mut rows = Vec::new();
    for n in sorted_n(cfg)? {
        let ms = cfg.model.spec(n, cfg.seed)?;
        let r = concentration_khat(&ms, m, &grid, cfg.nsamples)?;
        rows.push(vec![n as f64, r.khat, r.khat * (n as f64).sqrt()]);
    }
    let scaled: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.checks.push(CheckRow::at_most(
        format!("max/min of khat sqrt(N) at M={m}"),
        hi / lo,
        KHAT_FACTOR,
    ));
    let worst_step = rows
        .windows(2)
        .map(|w| w[1][1] - w[0][1])
        .fold(f64::NEG_INFINITY, f64::max);
    if rows.len() >= 2 {
        rep.checks.push(CheckRow::new(
            "khat increment between consecutive N",
            worst_step,
            Relation::Below,
            0.0,
        ));
    }
    rep.tables.push(Table {
        name: "khat".into(),
        header: ["n", "khat", "khat_sqrt_n"].map(String::from).to_vec(),
        rows,
    });
    Ok(rep)
}

pub fn nonsym_checks(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Experiment::NonsymDemo.name());
    let n = sorted_n(cfg)?[0];
    let p1 = cfg.model.prior.build(1)?;
    let p2 = cfg
        .model
        .prior2
        .as_ref()
        .unwrap_or(&cfg.model.prior)
        .build(1)?;
    let ms = build_nonsym_spec(n, &p1, &p2, cfg.seed)?;
    let tilted = SymMatrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.4]])?;
    let mut rows = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        for h in [scaled_identity(2, 0.3), tilted.clone()] {
            let cd = cross_derivative(&ms, t, &h, cfg.nsamples)?;
            rep.checks.push(CheckRow::at_least(
                format!("cross derivative N={n} t={t} h={}", fmt_h(&h)),
                cd.mean,
                -Z_BOUND * cd.stderr,
            ));
            let mut r = vec![t];
            r.extend_from_slice(h.coords());
            r.extend([cd.mean, cd.stderr]);
            rows.push(r);
        }
    }
    let e11 = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]])?;
    let e22 = SymMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]])?;
    let cd = cross_derivative(&ms, 1.0, &tilted, cfg.nsamples)?;
    let fd = mixed_second_difference(&ms, 1.0, &tilted, &e11, &e22, cfg.nsamples, FD_STEP_MATRIX)?;
    rep.checks.push(CheckRow::at_most(
        format!(
            "cross derivative vs mixed difference N={n} t=1 h={}",
            fmt_h(&tilted)
        ),
        (cd.mean - fd.mean).abs(),
        Z_BOUND * (cd.stderr * cd.stderr + fd.stderr * fd.stderr).sqrt(),
    ));

    let ia = Interaction::nonsym_demo();
    let mut rng = stream(cfg.seed, Purpose::Probe, 3);
    let probe = convexity_probe(&ia, CONVEXITY_TRIALS, &mut rng);
    rep.checks.push(CheckRow::new(
        "midpoint convexity violation of q11 q22",
        probe.worst_violation,
        Relation::Above,
        0.0,
    ));
    let hess = ia.hessian_coords(&SymMatrix::identity(2));
    let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    rep.checks.push(CheckRow::at_most(
        "Hessian of q11 q22 entry deviation",
        (&hess - &expected).abs().max(),
        0.0,
    ));
    let mut eig: Vec<f64> = hess.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eig.sort_by(f64::total_cmp);
    let dev = eig
        .iter()
        .zip([-1.0, 0.0, 1.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    rep.checks.push(CheckRow::at_most(
        "Hessian eigenvalues deviation from {-1, 0, 1}",
        dev,
        HESSIAN_TOL,
    ));
    rep.tables.push(Table {
        name: "cross-derivative".into(),
        header: ["t", "coord_1", "coord_2", "coord_3", "mean", "stderr"]
            .map(String::from)
            .to_vec(),
        rows,
    });
    Ok(rep)
}
