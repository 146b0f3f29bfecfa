use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// How a check is judged. Fixed when the experiment is created, before any
/// data exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Tolerance {
    /// Residuals must be exactly zero.
    Exact,
    Absolute { value: f64 },
}

impl Tolerance {
    pub fn abs(value: f64) -> Self {
        Tolerance::Absolute { value }
    }

    fn admits(self, deviation: f64) -> bool {
        match self {
            Tolerance::Exact => deviation == 0.0,
            Tolerance::Absolute { value } => deviation <= value,
        }
    }
}

/// A named per-level data series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, levels: Vec<usize>, values: Vec<f64>) -> Self {
        Series { name: name.into(), levels, values }
    }

    /// `values[i] / values[i − 1]`, empty for the first row.
    pub fn ratio(&self, i: usize) -> Option<f64> {
        (i > 0).then(|| self.values[i] / self.values[i - 1])
    }

    /// CSV with columns `level,value,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,value,ratio\n");
        for (i, (l, v)) in self.levels.iter().zip(&self.values).enumerate() {
            let r = self.ratio(i).filter(|r| r.is_finite()).map(|r| format!("{r:e}")).unwrap_or_default();
            let _ = writeln!(out, "{l},{v:e},{r}");
        }
        out
    }
}

/// One judged comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub deviation: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub inputs: BTreeMap<String, String>,
    pub tolerance: Tolerance,
    pub levels: Vec<usize>,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub skipped: bool,
    pub pass: bool,
    pub summary: String,
    pub elapsed_ms: u64,
}

impl ExperimentReport {
    /// Starts a report; the tolerance every default check is judged against
    /// is fixed here.
    pub fn declare(id: impl Into<String>, tolerance: Tolerance) -> Self {
        ExperimentReport {
            id: id.into(),
            inputs: BTreeMap::new(),
            tolerance,
            levels: Vec::new(),
            series: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            skipped: false,
            pass: true,
            summary: String::new(),
            elapsed_ms: 0,
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn levels(&mut self, levels: impl IntoIterator<Item = usize>) -> &mut Self {
        self.levels = levels.into_iter().collect();
        self
    }

    pub fn series(&mut self, s: Series) -> &mut Self {
        self.series.push(s);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    /// Compares against the declared tolerance.
    pub fn check(&mut self, name: &str, measured: f64, expected: f64) -> bool {
        self.check_with(name, measured, expected, self.tolerance)
    }

    /// Compares against a tolerance fixed by the caller in advance, for
    /// reports that mix exact and floating comparisons.
    pub fn check_with(&mut self, name: &str, measured: f64, expected: f64, tolerance: Tolerance) -> bool {
        let deviation = (measured - expected).abs();
        let pass = deviation.is_finite() && tolerance.admits(deviation);
        self.checks.push(Check { name: name.to_string(), measured, expected, deviation, tolerance, pass });
        self.pass &= pass;
        pass
    }

    /// A yes/no condition, recorded as `measured = 1` against `expected = 1`.
    pub fn require(&mut self, name: &str, holds: bool) -> bool {
        self.check_with(name, if holds { 1.0 } else { 0.0 }, 1.0, Tolerance::Exact)
    }

    pub fn skip(&mut self, reason: impl Into<String>) -> &mut Self {
        self.skipped = true;
        self.notes.push(reason.into());
        self
    }

    pub fn finish(mut self, started: std::time::Instant) -> Self {
        self.elapsed_ms = started.elapsed().as_millis() as u64;
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        self.summary = if self.skipped {
            format!("{}: skipped ({})", self.id, self.notes.last().map(String::as_str).unwrap_or(""))
        } else if failed.is_empty() {
            format!("{}: pass ({} checks)", self.id, self.checks.len())
        } else {
            format!("{}: FAIL ({})", self.id, failed.join(", "))
        };
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are serializable")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn find(&self, check: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == check)
    }
}
