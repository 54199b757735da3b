use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::report::{SuiteReport, Table};
use crate::{LabError, Result};

fn hash_line(cfg: &ExperimentConfig) -> String {
    format!("# config-sha256: {}\n", cfg.content_hash())
}

fn checks_csv(cfg: &ExperimentConfig, rep: &SuiteReport) -> String {
    let mut s = hash_line(cfg);
    s.push_str("name,statistic,relation,threshold,verdict\n");
    for c in &rep.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{},{},{},{},{verdict}",
            c.name,
            c.statistic,
            c.relation.symbol(),
            c.threshold
        );
    }
    s
}

fn table_csv(cfg: &ExperimentConfig, t: &Table) -> String {
    let mut s = hash_line(cfg);
    s.push_str(&t.header.join(","));
    s.push('\n');
    for r in &t.rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// File names and contents of every output, byte-stable for a given config
/// and report.
pub fn render(cfg: &ExperimentConfig, rep: &SuiteReport) -> Vec<(String, String)> {
    let stem = cfg.experiment.name();
    let mut out = vec![(format!("{stem}-checks.csv"), checks_csv(cfg, rep))];
    for t in &rep.tables {
        out.push((format!("{stem}-{}.csv", t.name), table_csv(cfg, t)));
    }
    let summary = serde_json::json!({
        "config_hash": cfg.content_hash(),
        "config": cfg,
        "passed": rep.passed(),
        "checks": rep.checks,
    });
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    out.push((format!("{stem}.json"), json));
    out
}

pub fn emit(cfg: &ExperimentConfig, rep: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for (name, body) in render(cfg, rep) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| LabError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
