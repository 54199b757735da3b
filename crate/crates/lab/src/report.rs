use serde::Serialize;

use hjcone::hopf::HopfSurface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `statistic <= threshold`.
    AtMost,
    /// `statistic >= threshold`.
    AtLeast,
    /// `statistic < threshold`.
    Below,
    /// `statistic > threshold`.
    Above,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }

    fn holds(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => statistic <= threshold,
            Relation::AtLeast => statistic >= threshold,
            Relation::Below => statistic < threshold,
            Relation::Above => statistic > threshold,
        }
    }
}

/// One named check with its statistic, threshold and verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub statistic: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckRow {
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        relation: Relation,
        threshold: f64,
    ) -> Self {
        CheckRow {
            name: name.into(),
            statistic,
            relation,
            threshold,
            passed: relation.holds(statistic, threshold),
        }
    }
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self::new(name, statistic, Relation::AtMost, threshold)
    }
    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self::new(name, statistic, Relation::AtLeast, threshold)
    }
}

/// Numeric table emitted as CSV next to the checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckRow>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>) -> Self {
        SuiteReport {
            suite: suite.into(),
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
    }
}

/// Gaps between `F-bar_N` and the Hopf solution for one `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `max |F-bar_N - f|` over the grid.
    pub sup_gap: f64,
    /// `max_t mean_h |F-bar_N - f|`.
    pub l1_gap: f64,
    /// Largest standard error over the grid.
    pub max_stderr: f64,
    /// `max (F-bar_N - f)`.
    pub max_signed_gap: f64,
    /// `max (F-bar_N - f) / stderr` over points with positive stderr.
    pub max_signed_z: f64,
}

/// One grid cell of the convergence run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCell {
    pub n: usize,
    pub t: f64,
    pub h: Vec<f64>,
    pub fbar: f64,
    pub stderr: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub p: u32,
    /// Odd `p >= 3`: only the one-sided bound `F-bar_N <= f` is expected.
    pub upper_bound_only: bool,
    pub rows: Vec<ConvergenceRow>,
    pub cells: Vec<ConvergenceCell>,
    pub surface: HopfSurface,
}
