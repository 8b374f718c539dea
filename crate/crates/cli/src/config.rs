use std::fmt::Write as _;
use std::path::PathBuf;

use impulsive_core::checker::Tolerances;
use impulsive_core::variations::DEFAULT_LADDER;

/// Settings shared by every command; echoed verbatim into each report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Integration steps over the reference parameter interval (`max_step = S/grid`).
    pub grid: usize,
    pub tol_eq: f64,
    pub tol_ineq: f64,
    pub ladder: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        RunConfig {
            grid: 1000,
            tol_eq: tol.eq,
            tol_ineq: tol.ineq,
            ladder: DEFAULT_LADDER.to_vec(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.grid < 16 {
            return Err(format!("--grid must be at least 16, got {}", self.grid));
        }
        for (name, v) in [("--tol-eq", self.tol_eq), ("--tol-ineq", self.tol_ineq)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err("--ladder entries must be positive".into());
        }
        if self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err("--ladder must be strictly decreasing".into());
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            eq: self.tol_eq,
            ineq: self.tol_ineq,
            ..Tolerances::default()
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "grid: {}", self.grid);
        let _ = writeln!(s, "step policy: fixed RK4, max step = S/grid, aligned to breakpoints");
        let _ = writeln!(s, "tol_eq: {:e}", self.tol_eq);
        let _ = writeln!(s, "tol_ineq: {:e}", self.tol_ineq);
        let ladder: Vec<String> = self.ladder.iter().map(|e| format!("{e:e}")).collect();
        let _ = writeln!(s, "ladder: {}", ladder.join(", "));
        s
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", t.trim())))
        .collect()
}
