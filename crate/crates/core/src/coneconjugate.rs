//! Fenchel conjugation restricted to the PSD cone, on finite grids.
//!
//! For `u` tabulated on a [`ConeGrid`], the conjugate is the exact finite
//! maximization
//!
//! ```text
//! u*(z) = max_{y in grid, u(y) < inf} { y . z - u(y) }
//! ```
//!
//! Ties resolve to the lowest grid index. `+inf` values are stored as
//! `f64::INFINITY` and never enter a maximization.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{HjError, Result};
use crate::symcone::{is_psd, sym_dim, ConeGrid, SymMatrix, PSD_TOL};

/// Slack used by the order and convexity scans.
pub const SCAN_TOL: f64 = 1e-10;

/// Real values (or `+inf`) on the points of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<ConeGrid>,
    values: Vec<f64>,
    label: String,
}

impl GridFunction {
    pub fn new(grid: Arc<ConeGrid>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HjError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(HjError::InvalidArgument(
                "values must be real or +inf".into(),
            ));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(HjError::AllInfinite);
        }
        Ok(GridFunction {
            grid,
            values,
            label: label.into(),
        })
    }

    /// Tabulates `f` on every grid point.
    pub fn tabulate(
        grid: Arc<ConeGrid>,
        label: impl Into<String>,
        f: impl Fn(&SymMatrix) -> f64 + Sync,
    ) -> Result<Self> {
        let values: Vec<f64> = grid.points().par_iter().map(&f).collect();
        Self::new(grid, values, label)
    }

    pub fn grid(&self) -> &Arc<ConeGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `u*(z)` at an arbitrary point `z`.
    pub fn conjugate_at(&self, z: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (i, &u) in self.values.iter().enumerate() {
            if !u.is_finite() {
                continue;
            }
            let v = dot(self.grid.coords_of(i), z) - u;
            if v > best {
                best = v;
            }
        }
        best
    }

    /// Largest difference quotient `|u(a) - u(b)| / |a - b|` over finite pairs.
    pub fn lipschitz_estimate(&self) -> f64 {
        let n = self.grid.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut m = 0.0f64;
                if !self.values[i].is_finite() {
                    return m;
                }
                for j in (i + 1)..n {
                    if !self.values[j].is_finite() {
                        continue;
                    }
                    let dist = dist(self.grid.coords_of(i), self.grid.coords_of(j));
                    m = m.max((self.values[i] - self.values[j]).abs() / dist);
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }

    /// CSV: a `# dim=.. radius=.. step=.. label=..` comment line, a header
    /// `coord_1,..,coord_d,value`, then one row per grid point. `+inf` is
    /// written as `inf`.
    pub fn to_csv_string(&self) -> String {
        let d = sym_dim(self.grid.dim());
        let mut out = String::new();
        writeln!(
            out,
            "# dim={} radius={} step={} label={}",
            self.grid.dim(),
            self.grid.radius(),
            self.grid.step(),
            self.label.replace(['\n', '\r'], " ")
        )
        .unwrap();
        let header: Vec<String> = (1..=d)
            .map(|i| format!("coord_{i}"))
            .chain(["value".to_string()])
            .collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for i in 0..self.grid.len() {
            let row: Vec<String> = self
                .grid
                .coords_of(i)
                .iter()
                .map(|c| format!("{c}"))
                .chain([format!("{}", self.values[i])])
                .collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').ok_or(HjError::Parse {
            line: 1,
            message: "missing metadata line".into(),
        })?;
        let meta = first
            .trim_end_matches('\r')
            .strip_prefix("# ")
            .ok_or(HjError::Parse {
                line: 1,
                message: "expected '# ' metadata line".into(),
            })?;
        let (dim, radius, step, label) = parse_meta(meta)?;
        let d = sym_dim(dim);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(rest.as_bytes());
        let headers = reader.headers().map_err(|e| HjError::Parse {
            line: 2,
            message: e.to_string(),
        })?;
        if headers.len() != d + 1 {
            return Err(HjError::Parse {
                line: 2,
                message: format!("expected {} columns, found {}", d + 1, headers.len()),
            });
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let line = row + 3;
            let rec = rec.map_err(|e| HjError::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != d + 1 {
                return Err(HjError::Parse {
                    line,
                    message: "wrong column count".into(),
                });
            }
            let mut nums = Vec::with_capacity(d + 1);
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| HjError::Parse {
                    line,
                    message: format!("bad number {field:?}"),
                })?;
                nums.push(v);
            }
            let value = nums.pop().unwrap();
            points.push(SymMatrix::from_coords(dim, &nums)?);
            values.push(value);
        }
        let grid = ConeGrid::from_points(dim, radius, step, points)?;
        GridFunction::new(Arc::new(grid), values, label)
    }
}

fn parse_meta(meta: &str) -> Result<(usize, f64, f64, String)> {
    let bad = |m: &str| HjError::Parse {
        line: 1,
        message: m.to_string(),
    };
    let (head, label) = meta
        .split_once("label=")
        .ok_or_else(|| bad("missing label"))?;
    let mut dim = None;
    let mut radius = None;
    let mut step = None;
    for tok in head.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad("expected key=value"))?;
        match k {
            "dim" => dim = v.parse::<usize>().ok(),
            "radius" => radius = v.parse::<f64>().ok(),
            "step" => step = v.parse::<f64>().ok(),
            _ => return Err(bad("unknown metadata key")),
        }
    }
    let dim = dim
        .filter(|&d| (1..=8).contains(&d))
        .ok_or_else(|| bad("bad dim"))?;
    Ok((
        dim,
        radius.ok_or_else(|| bad("bad radius"))?,
        step.ok_or_else(|| bad("bad step"))?,
        label.to_string(),
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `u*` tabulated on `zgrid`.
pub fn fenchel(u: &GridFunction, zgrid: &Arc<ConeGrid>) -> Result<GridFunction> {
    if zgrid.is_empty() || u.grid.is_empty() {
        return Err(HjError::EmptyGrid);
    }
    if zgrid.dim() != u.grid.dim() {
        return Err(HjError::DimensionMismatch {
            expected: u.grid.dim(),
            got: zgrid.dim(),
        });
    }
    let values: Vec<f64> = (0..zgrid.len())
        .into_par_iter()
        .map(|j| u.conjugate_at(zgrid.coords_of(j)))
        .collect();
    GridFunction::new(zgrid.clone(), values, format!("{}*", u.label))
}

/// `u**`, conjugated through `zgrid` and back onto `u`'s grid.
pub fn biconjugate(u: &GridFunction, zgrid: &Arc<ConeGrid>) -> Result<GridFunction> {
    let star = fenchel(u, zgrid)?;
    fenchel(&star, &u.grid)
}

/// `max |u** - u|` over the finite values of `u`.
pub fn fm_gap(u: &GridFunction, zgrid: &Arc<ConeGrid>) -> Result<f64> {
    let bi = biconjugate(u, zgrid)?;
    Ok(u.values
        .iter()
        .zip(&bi.values)
        .filter(|(a, _)| a.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotoneConvexReport {
    pub nondecreasing_violations: usize,
    pub midpoint_convexity_violations: usize,
    pub worst_monotone_violation: f64,
    pub worst_convexity_violation: f64,
}

impl MonotoneConvexReport {
    pub fn is_clean(&self) -> bool {
        self.nondecreasing_violations == 0 && self.midpoint_convexity_violations == 0
    }
}

/// Scans all ordered pairs `a >= b` (Loewner) for `u(a) < u(b) - tol`, and
/// all pairs whose lattice midpoint is a grid point for midpoint convexity.
pub fn monotone_convex_report(u: &GridFunction) -> MonotoneConvexReport {
    let g = &u.grid;
    let n = g.len();
    let partial: Vec<MonotoneConvexReport> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rep = MonotoneConvexReport::default();
            let ui = u.values[i];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let uj = u.values[j];
                if ui < uj - SCAN_TOL && is_psd(&(g.point(i) - g.point(j)), PSD_TOL) {
                    rep.nondecreasing_violations += 1;
                    let v = if uj.is_finite() {
                        uj - ui
                    } else {
                        f64::INFINITY
                    };
                    rep.worst_monotone_violation = rep.worst_monotone_violation.max(v);
                }
                if j > i {
                    let li = g.lattice_of(i);
                    let lj = g.lattice_of(j);
                    if li.iter().zip(lj).all(|(a, b)| (a + b) % 2 == 0) {
                        let mid: Vec<i64> = li.iter().zip(lj).map(|(a, b)| (a + b) / 2).collect();
                        if let Some(m) = g.find(&mid) {
                            let excess = u.values[m] - 0.5 * (ui + uj);
                            if excess > SCAN_TOL {
                                rep.midpoint_convexity_violations += 1;
                                rep.worst_convexity_violation =
                                    rep.worst_convexity_violation.max(excess);
                            }
                        }
                    }
                }
            }
            rep
        })
        .collect();
    partial
        .into_iter()
        .fold(MonotoneConvexReport::default(), |mut acc, r| {
            acc.nondecreasing_violations += r.nondecreasing_violations;
            acc.midpoint_convexity_violations += r.midpoint_convexity_violations;
            acc.worst_monotone_violation =
                acc.worst_monotone_violation.max(r.worst_monotone_violation);
            acc.worst_convexity_violation = acc
                .worst_convexity_violation
                .max(r.worst_convexity_violation);
            acc
        })
}
