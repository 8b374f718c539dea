//! Condition and rank reports.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The condition could not be decided (e.g. an untested branch).
    Unverified,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unverified => "UNVERIFIED",
        }
    }
}

/// One checked condition: the worst residual over the grid and where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRecord {
    pub name: String,
    pub residual: f64,
    pub location: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    pub detail: String,
    /// `(s, residual)` samples, for CSV export.
    pub series: Vec<(f64, f64)>,
}

impl ConditionRecord {
    /// Worst of the samples, PASS when it is within `tolerance`.
    pub fn from_series(name: &str, series: Vec<(f64, f64)>, tolerance: f64) -> Self {
        let mut residual = 0.0;
        let mut location = None;
        for &(s, r) in &series {
            if location.is_none() || r > residual || r.is_nan() {
                residual = r;
                location = Some(s);
            }
        }
        ConditionRecord {
            name: name.to_string(),
            residual,
            location,
            tolerance,
            status: Status::from_bool(residual <= tolerance),
            detail: String::new(),
            series,
        }
    }

    pub fn scalar(name: &str, residual: f64, tolerance: f64) -> Self {
        ConditionRecord {
            name: name.to_string(),
            residual,
            location: None,
            tolerance,
            status: Status::from_bool(residual <= tolerance),
            detail: String::new(),
            series: Vec::new(),
        }
    }

    pub fn unverified(name: &str, detail: &str) -> Self {
        ConditionRecord {
            name: name.to_string(),
            residual: f64::NAN,
            location: None,
            tolerance: 0.0,
            status: Status::Unverified,
            detail: detail.to_string(),
            series: Vec::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    pub title: String,
    pub records: Vec<ConditionRecord>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn new(title: &str) -> Self {
        ConditionReport {
            title: title.to_string(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, r: ConditionRecord) {
        self.records.push(r);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    /// FAIL iff some condition exceeds its tolerance.
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed())
    }

    pub fn get(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.status != Status::Unverified)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }

    pub fn extend(&mut self, other: ConditionReport) {
        self.records.extend(other.records);
        self.notes.extend(other.notes);
    }

    /// `key: value` blocks, one per condition.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report: {}", self.title);
        let _ = writeln!(out, "verdict: {}", if self.passed() { "PASS" } else { "FAIL" });
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        for r in &self.records {
            let _ = writeln!(out);
            let _ = writeln!(out, "condition: {}", r.name);
            let _ = writeln!(out, "status: {}", r.status.as_str());
            let _ = writeln!(out, "residual: {:e}", r.residual);
            let _ = writeln!(out, "tolerance: {:e}", r.tolerance);
            if let Some(s) = r.location {
                let _ = writeln!(out, "location: {s}");
            }
            if !r.detail.is_empty() {
                let _ = writeln!(out, "detail: {}", r.detail);
            }
        }
        out
    }

    /// `condition,s,residual` rows of every residual series.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("condition,s,residual\n");
        for r in &self.records {
            for (s, v) in &r.series {
                let _ = writeln!(out, "{},{s},{v:e}", r.name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCondition {
    I1,
    I2,
    Kalman,
}

impl RankCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            RankCondition::I1 => "I.1",
            RankCondition::I2 => "I.2",
            RankCondition::Kalman => "Kalman",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankPoint {
    pub x: Vec<f64>,
    /// Control index, for conditions that depend on it.
    pub a: Option<usize>,
    pub rank: usize,
    /// Labels of a spanning subset of the evaluated columns.
    pub witness: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub condition: RankCondition,
    pub dim: usize,
    pub points: Vec<RankPoint>,
    pub verdict: bool,
}

impl RankReport {
    pub fn min_rank(&self) -> usize {
        self.points.iter().map(|p| p.rank).min().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rank condition: {}", self.condition.as_str());
        let _ = writeln!(out, "dimension: {}", self.dim);
        let _ = writeln!(out, "verdict: {}", if self.verdict { "TRUE" } else { "FALSE" });
        for p in &self.points {
            let _ = writeln!(out);
            let xs: Vec<String> = p.x.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "point: ({})", xs.join(", "));
            if let Some(a) = p.a {
                let _ = writeln!(out, "control: {}", a + 1);
            }
            let _ = writeln!(out, "rank: {}", p.rank);
            let _ = writeln!(out, "witness: {}", p.witness.join(" "));
        }
        out
    }
}
