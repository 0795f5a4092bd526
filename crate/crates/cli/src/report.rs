use std::fs;
use std::path::Path;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Config,
    Check,
}

/// One violated invariant, named by module.
#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub module: String,
    pub invariant: String,
    pub detail: String,
}

impl Failure {
    pub fn config(module: &str, invariant: &str, detail: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Config,
            module: module.into(),
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }

    pub fn check(module: &str, invariant: &str, detail: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Check,
            module: module.into(),
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }

    /// Input problems are configuration errors; anything else the library
    /// reports mid-computation is a failed check.
    pub fn from_core(module: &str, invariant: &str, e: minpair::Error) -> Self {
        use minpair::Error::*;
        match e {
            InvalidModel(_) | InvalidPolicy(_) | InvalidDistribution(_) | InvalidArgument(_) | Format(_) => {
                Failure::config(module, invariant, e.to_string())
            }
            other => Failure::check(module, invariant, other.to_string()),
        }
    }
}

/// A row of the composite reproduction report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub module: &'static str,
}

impl CheckRow {
    /// |value − target| ≤ tolerance
    pub fn near(module: &'static str, check: &str, value: f64, target: f64, tolerance: f64) -> Self {
        CheckRow {
            check: check.into(),
            value,
            target,
            tolerance,
            passed: (value - target).abs() <= tolerance,
            module,
        }
    }

    /// value ≤ target + tolerance
    pub fn at_most(module: &'static str, check: &str, value: f64, target: f64, tolerance: f64) -> Self {
        CheckRow {
            check: check.into(),
            value,
            target,
            tolerance,
            passed: value <= target + tolerance,
            module,
        }
    }

    /// value ≥ target
    pub fn at_least(module: &'static str, check: &str, value: f64, target: f64) -> Self {
        CheckRow {
            check: check.into(),
            value,
            target,
            tolerance: 0.0,
            passed: value >= target,
            module,
        }
    }

    /// A yes/no outcome: value 1 means the property holds.
    pub fn holds(module: &'static str, check: &str, ok: bool) -> Self {
        CheckRow {
            check: check.into(),
            value: if ok { 1.0 } else { 0.0 },
            target: 1.0,
            tolerance: 0.0,
            passed: ok,
            module,
        }
    }

    pub fn failure(&self) -> Option<Failure> {
        (!self.passed).then(|| {
            Failure::check(
                self.module,
                &self.check,
                format!("value {} target {} tolerance {}", self.value, self.target, self.tolerance),
            )
        })
    }
}

pub fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::config("cli", "output-writable", format!("{}: {e}", path.display()))
}

pub fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::config("cli", "output-writable", format!("{}: {e}", path.display()))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::check("cli", "serializable-output", e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(io_err(path))
}
