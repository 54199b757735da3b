//! The Hopf variational formula for `d_t f = H(grad f)` on the PSD cone,
//!
//! ```text
//! f(t, x) = sup_{z PSD} { z . x - psi*(z) + t H(z) },
//! ```
//!
//! evaluated by scanning a dual grid of `z` values, with an optional local
//! refinement around the coarse maximizer.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coneconjugate::{fenchel, monotone_convex_report, GridFunction};
use crate::error::{HjError, Result};
use crate::nonlinearity::Interaction;
use crate::symcone::{is_psd, sym_dim, ConeGrid, SymMatrix, PSD_TOL};

/// Subdivision of the dual step used by the refinement pass.
const REFINE_DIVISIONS: i64 = 4;
/// Half-width of the refinement box, in fine steps.
const REFINE_HALF_WIDTH: i64 = 2;

#[derive(Debug, Clone)]
pub struct HopfProblem {
    ia: Interaction,
    psi: GridFunction,
    zgrid: Arc<ConeGrid>,
    psistar: GridFunction,
    hz: Vec<f64>,
    refine: bool,
}

impl HopfProblem {
    /// Checks that `psi` is nondecreasing and midpoint-convex on its grid and
    /// that the dual grid covers its Lipschitz ball.
    pub fn new(ia: Interaction, psi: GridFunction, zgrid: Arc<ConeGrid>) -> Result<Self> {
        if psi.grid().dim() != ia.k() || zgrid.dim() != ia.k() {
            return Err(HjError::DimensionMismatch {
                expected: ia.k(),
                got: psi.grid().dim(),
            });
        }
        let rep = monotone_convex_report(&psi);
        if !rep.is_clean() {
            return Err(HjError::InvalidArgument(format!(
                "initial condition is not nondecreasing and convex on its grid ({} order, {} convexity violations)",
                rep.nondecreasing_violations, rep.midpoint_convexity_violations
            )));
        }
        let lip = psi.lipschitz_estimate();
        if zgrid.radius() < lip {
            return Err(HjError::InvalidArgument(format!(
                "dual grid radius {} is below the Lipschitz estimate {lip}",
                zgrid.radius()
            )));
        }
        let psistar = fenchel(&psi, &zgrid)?;
        let hz = zgrid
            .points()
            .par_iter()
            .map(|z| ia.hval(z).expect("dims checked"))
            .collect();
        Ok(HopfProblem {
            ia,
            psi,
            zgrid,
            psistar,
            hz,
            refine: true,
        })
    }

    /// Enables or disables the local refinement pass (on by default).
    pub fn with_refinement(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    pub fn interaction(&self) -> &Interaction {
        &self.ia
    }
    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }
    pub fn psistar(&self) -> &GridFunction {
        &self.psistar
    }
    pub fn zgrid(&self) -> &Arc<ConeGrid> {
        &self.zgrid
    }
    pub fn refines(&self) -> bool {
        self.refine
    }

    fn check_point(&self, x: &SymMatrix) -> Result<()> {
        if x.dim() != self.ia.k() {
            return Err(HjError::DimensionMismatch {
                expected: self.ia.k(),
                got: x.dim(),
            });
        }
        if !is_psd(x, PSD_TOL) {
            return Err(HjError::NotPsd {
                min_eigenvalue: x.min_eigenvalue(),
            });
        }
        let radius = self.psi.grid().radius();
        if x.norm() > radius * (1.0 + 1e-12) {
            return Err(HjError::OutsideGrid {
                norm: x.norm(),
                radius,
            });
        }
        Ok(())
    }

    /// `f(t, x)`.
    pub fn hopf_eval(&self, t: f64, x: &SymMatrix) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(HjError::InvalidArgument(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        self.check_point(x)?;
        Ok(self.variational_sup(&self.psi, &self.psistar, t, x))
    }

    /// `sup_z { z . x - g*(z) + t H(z) }` with `g*` tabulated on the dual grid
    /// as `dual`; refinement evaluates `g*` off-grid from `primal`.
    fn variational_sup(
        &self,
        primal: &GridFunction,
        dual: &GridFunction,
        t: f64,
        x: &SymMatrix,
    ) -> f64 {
        let xc = x.coords();
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for j in 0..self.zgrid.len() {
            let s = dual.value(j);
            if !s.is_finite() {
                continue;
            }
            let v = dot(self.zgrid.coords_of(j), xc) - s + t * self.hz[j];
            if v > best {
                best = v;
                arg = j;
            }
        }
        if !self.refine {
            return best;
        }
        let k = self.ia.k();
        let d = sym_dim(k);
        let fine = self.zgrid.step() / REFINE_DIVISIONS as f64;
        let center = self.zgrid.coords_of(arg).to_vec();
        let span = 2 * REFINE_HALF_WIDTH + 1;
        let total = (span as usize).pow(d as u32);
        let zmax = self.zgrid.radius() * (1.0 + 1e-12);
        for idx in 0..total {
            let mut rem = idx;
            let mut offsets = vec![0i64; d];
            for o in offsets.iter_mut().rev() {
                *o = (rem % span as usize) as i64 - REFINE_HALF_WIDTH;
                rem /= span as usize;
            }
            // lattice points of the coarse grid were already scanned
            if offsets.iter().all(|o| o % REFINE_DIVISIONS == 0) {
                continue;
            }
            let coords: Vec<f64> = center
                .iter()
                .zip(&offsets)
                .map(|(c, &o)| c + o as f64 * fine)
                .collect();
            let z = SymMatrix::from_coords(k, &coords).expect("coordinate count");
            if z.norm() > zmax || !is_psd(&z, 0.0) {
                continue;
            }
            let s = primal.conjugate_at(&coords);
            let v = dot(&coords, xc) - s + t * self.ia.hval(&z).expect("dims checked");
            if v > best {
                best = v;
            }
        }
        best
    }

    /// `f` on every `(t, x)` pair, `t` outer.
    pub fn hopf_surface(&self, tgrid: &[f64], xgrid: &Arc<ConeGrid>) -> Result<HopfSurface> {
        if let Some(bad) = tgrid.iter().find(|t| !(**t >= 0.0)) {
            return Err(HjError::InvalidArgument(format!("negative time {bad}")));
        }
        for x in xgrid.points() {
            self.check_point(x)?;
        }
        let n = xgrid.len();
        let values: Vec<f64> = (0..tgrid.len() * n)
            .into_par_iter()
            .map(|cell| {
                self.variational_sup(
                    &self.psi,
                    &self.psistar,
                    tgrid[cell / n],
                    xgrid.point(cell % n),
                )
            })
            .collect();
        Ok(HopfSurface {
            tgrid: tgrid.to_vec(),
            xgrid: xgrid.clone(),
            values,
        })
    }

    /// `max_x |f(t+s, x) - sup_z { z . x - f(t,.)*(z) + s H(z) }|`, with
    /// `f(t, .)` tabulated on the initial-condition grid.
    pub fn semigroup_gap(&self, t: f64, s: f64, xgrid: &Arc<ConeGrid>) -> Result<f64> {
        if !(t >= 0.0 && s >= 0.0) {
            return Err(HjError::InvalidArgument("times must be nonnegative".into()));
        }
        let base = self.psi.grid().clone();
        let ft = GridFunction::tabulate(base, format!("f({t})"), |x| {
            self.variational_sup(&self.psi, &self.psistar, t, x)
        })?;
        let ftstar = fenchel(&ft, &self.zgrid)?;
        for x in xgrid.points() {
            self.check_point(x)?;
        }
        let gaps: Vec<f64> = xgrid
            .points()
            .par_iter()
            .map(|x| {
                let direct = self.variational_sup(&self.psi, &self.psistar, t + s, x);
                let stepped = self.variational_sup(&ft, &ftstar, s, x);
                (direct - stepped).abs()
            })
            .collect();
        Ok(gaps.into_iter().fold(0.0, f64::max))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tabulated `f(t, x)`, row-major with `t` outer.
#[derive(Debug, Clone)]
pub struct HopfSurface {
    pub tgrid: Vec<f64>,
    pub xgrid: Arc<ConeGrid>,
    pub values: Vec<f64>,
}

impl HopfSurface {
    pub fn value(&self, ti: usize, xi: usize) -> f64 {
        self.values[ti * self.xgrid.len() + xi]
    }

    /// Slice `f(t_i, .)` as a grid function.
    pub fn slice(&self, ti: usize) -> Result<GridFunction> {
        let n = self.xgrid.len();
        GridFunction::new(
            self.xgrid.clone(),
            self.values[ti * n..(ti + 1) * n].to_vec(),
            format!("f({})", self.tgrid[ti]),
        )
    }

    /// Header `t,coord_1,..,value`, one row per cell in storage order.
    pub fn to_csv_string(&self) -> String {
        let d = sym_dim(self.xgrid.dim());
        let mut out = String::from("t");
        for i in 1..=d {
            write!(out, ",coord_{i}").unwrap();
        }
        out.push_str(",value\n");
        for (ti, t) in self.tgrid.iter().enumerate() {
            for xi in 0..self.xgrid.len() {
                write!(out, "{t}").unwrap();
                for c in self.xgrid.coords_of(xi) {
                    write!(out, ",{c}").unwrap();
                }
                writeln!(out, ",{}", self.value(ti, xi)).unwrap();
            }
        }
        out
    }
}

/// Largest difference quotient between neighbours: consecutive times at a
/// fixed `x`, and lattice neighbours (one step apart) at a fixed `t`.
pub fn lipschitz_estimate(surface: &HopfSurface) -> Result<f64> {
    let nt = surface.tgrid.len();
    let nx = surface.xgrid.len();
    if nt < 2 || nx < 2 {
        return Err(HjError::InvalidArgument(
            "need at least two times and two points".into(),
        ));
    }
    let mut lip_t = 0.0f64;
    for ti in 1..nt {
        let dt = surface.tgrid[ti] - surface.tgrid[ti - 1];
        for xi in 0..nx {
            lip_t = lip_t.max((surface.value(ti, xi) - surface.value(ti - 1, xi)).abs() / dt.abs());
        }
    }
    let grid = &surface.xgrid;
    let mut lip_x = 0.0f64;
    for a in 0..nx {
        let la = grid.lattice_of(a);
        for slot in 0..la.len() {
            let mut nb = la.to_vec();
            nb[slot] += 1;
            if let Some(b) = grid.find(&nb) {
                for ti in 0..nt {
                    let slope = (surface.value(ti, a) - surface.value(ti, b)).abs() / grid.step();
                    lip_x = lip_x.max(slope);
                }
            }
        }
    }
    Ok(lip_t.max(lip_x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcone::cone_grid;

    fn grid(k: usize, m: f64, step: f64) -> Arc<ConeGrid> {
        Arc::new(cone_grid(k, m, step).unwrap())
    }

    #[test]
    fn scalar_linear_initial_condition_translates() {
        // psi(x) = x, H(z) = z^2: f(t, x) = x + t with maximizer z = 1
        let psi = GridFunction::tabulate(grid(1, 4.0, 0.125), "x", |x| x.trace()).unwrap();
        let hp = HopfProblem::new(
            Interaction::special_diagonal(1, 2),
            psi,
            grid(1, 2.0, 0.125),
        )
        .unwrap();
        for &(t, x) in &[(0.0, 0.5), (0.25, 1.0), (0.5, 0.0), (0.4, 0.75)] {
            let f = hp.hopf_eval(t, &SymMatrix::diag(&[x])).unwrap();
            assert!((f - (x + t)).abs() < 1e-12, "t = {t}, x = {x}: {f}");
        }
    }

    #[test]
    fn initial_condition_is_recovered() {
        let psi = GridFunction::tabulate(grid(1, 3.0, 0.125), "quad", |x| {
            0.25 * x.trace().powi(2) + x.trace()
        })
        .unwrap();
        let hp = HopfProblem::new(
            Interaction::special_diagonal(1, 2),
            psi.clone(),
            grid(1, 3.0, 0.0625),
        )
        .unwrap()
        .with_refinement(false);
        for i in 0..psi.grid().len() {
            let f0 = hp.hopf_eval(0.0, psi.grid().point(i)).unwrap();
            assert!((f0 - psi.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let psi = GridFunction::tabulate(grid(1, 2.0, 0.25), "x", |x| x.trace()).unwrap();
        let hp =
            HopfProblem::new(Interaction::special_diagonal(1, 2), psi, grid(1, 2.0, 0.25)).unwrap();
        assert!(matches!(
            hp.hopf_eval(0.0, &SymMatrix::diag(&[3.0])),
            Err(HjError::OutsideGrid { .. })
        ));
        assert!(hp.hopf_eval(-1.0, &SymMatrix::diag(&[1.0])).is_err());
        assert!(matches!(
            hp.hopf_eval(0.0, &SymMatrix::diag(&[-1.0])),
            Err(HjError::NotPsd { .. })
        ));

        let bumpy = GridFunction::tabulate(grid(1, 2.0, 0.25), "-x", |x| -x.trace()).unwrap();
        assert!(HopfProblem::new(
            Interaction::special_diagonal(1, 2),
            bumpy,
            grid(1, 2.0, 0.25)
        )
        .is_err());
        let steep = GridFunction::tabulate(grid(1, 2.0, 0.25), "3x", |x| 3.0 * x.trace()).unwrap();
        assert!(HopfProblem::new(
            Interaction::special_diagonal(1, 2),
            steep,
            grid(1, 2.0, 0.25)
        )
        .is_err());
    }

    #[test]
    fn surface_order_and_lipschitz() {
        let psi = GridFunction::tabulate(grid(1, 4.0, 0.25), "x", |x| x.trace()).unwrap();
        let hp =
            HopfProblem::new(Interaction::special_diagonal(1, 1), psi, grid(1, 2.0, 0.25)).unwrap();
        let xg = grid(1, 1.0, 0.25);
        let surf = hp.hopf_surface(&[0.0, 0.5, 1.0], &xg).unwrap();
        assert_eq!(surf.values.len(), 15);
        // p = 1, K = 1: f(t, x) = x + t
        for (ti, t) in surf.tgrid.iter().enumerate() {
            for xi in 0..xg.len() {
                let x = xg.point(xi).trace();
                assert!((surf.value(ti, xi) - (x + t)).abs() < 1e-12);
            }
        }
        let lip = lipschitz_estimate(&surf).unwrap();
        assert!((lip - 1.0).abs() < 1e-12);
        let csv = surf.to_csv_string();
        assert!(csv.starts_with("t,coord_1,value\n0,0,0\n"));
    }
}
