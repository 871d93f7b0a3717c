//! Run reports: named checks with measured values and thresholds.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `value < bound`
    Lt,
    /// `value ≤ bound`
    Le,
    /// `value > bound`
    Gt,
    /// `value ≥ bound`
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound,
            Relation::Gt => value > bound,
            Relation::Ge => value >= bound,
        };
        Check {
            name: name.into(),
            value,
            relation,
            bound,
            pass,
        }
    }

    /// A yes/no outcome recorded as 1 (true) or 0 against `≥ 1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Relation::Ge, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub version: String,
    pub os: String,
    pub arch: String,
    pub workers: usize,
}

impl Fingerprint {
    pub fn current() -> Self {
        Fingerprint {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            workers: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub checks: Vec<Check>,
    pub fingerprint: Fingerprint,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
    /// Notes such as fallback choices; not checks.
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        RunReport {
            command: command.into(),
            checks: vec![],
            fingerprint: Fingerprint::current(),
            timings: vec![],
            warnings: vec![],
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn sorted(&self) -> Vec<&Check> {
        let mut v: Vec<&Check> = self.checks.iter().collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }

    pub const CSV_HEADER: &'static str = "check,value,relation,bound,pass";

    /// Checks sorted by name. Timings are left out so reruns compare equal.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for c in self.sorted() {
            writeln!(w, "{},{:e},{},{:e},{}", c.name, c.value, c.relation, c.bound, c.pass)?;
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for c in self.sorted() {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            writeln!(w, "{verdict} {} = {:.6e} ({} {:e})", c.name, c.value, c.relation, c.bound)?;
        }
        for warning in &self.warnings {
            writeln!(w, "warning: {warning}")?;
        }
        let f = &self.fingerprint;
        writeln!(w, "# {} {} {}-{} workers={}", self.command, f.version, f.os, f.arch, f.workers)?;
        for (stage, secs) in &self.timings {
            writeln!(w, "# time {stage} {secs:.3}s")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

/// Writes `report.txt` or `report.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &RunReport, format: ReportFormat, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(match format {
        ReportFormat::Text => "report.txt",
        ReportFormat::Csv => "report.csv",
    });
    let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Text => report.write_text(&mut w)?,
        ReportFormat::Csv => report.write_csv(&mut w)?,
    }
    w.flush()?;
    Ok(path)
}
