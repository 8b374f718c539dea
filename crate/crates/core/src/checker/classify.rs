//! Sufficient conditions forcing an optimal process to evolve in zero time.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::higher_order::BracketSpec;
use super::linear::linear_structure;
use super::rank::{kalman_check, I1Columns, I2Columns};
use super::{normalized, sites, Tolerances};
use crate::adjoint::Multiplier;
use crate::error::{Error, Result};
use crate::integrate::SpaceTimeTrajectory;
use crate::linalg;
use crate::problem::{Hp1Info, ProblemSpec};

/// Pieces with `w0` above this count as drift.
const DRIFT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptionVerdict {
    /// `"a"`, `"b"` or `"c"`.
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullyImpulsiveReport {
    pub hp1: Hp1Info,
    pub options: Vec<OptionVerdict>,
    /// First option that holds.
    pub selected: Option<&'static str>,
    /// Total parameter length of pieces with `w0 > 1e-9`.
    pub drift_measure: f64,
    /// `Some(drift_measure == 0)` when an option holds.
    pub consistent: Option<bool>,
}

impl FullyImpulsiveReport {
    /// False only when an option holds and the process nevertheless drifts.
    pub fn passed(&self) -> bool {
        self.consistent != Some(false)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "title: fully impulsive classification");
        let _ = writeln!(
            out,
            "hp1: time rate {} min running cost {:e}",
            self.hp1.time_rate, self.hp1.min_cost
        );
        for o in &self.options {
            let _ = writeln!(out);
            let _ = writeln!(out, "option: {}", o.name);
            let _ = writeln!(out, "holds: {}", if o.holds { "TRUE" } else { "FALSE" });
            let _ = writeln!(out, "detail: {}", o.detail);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "selected: {}", self.selected.unwrap_or("none"));
        let _ = writeln!(out, "drift measure: {:e}", self.drift_measure);
        let verdict = match self.consistent {
            Some(true) => "consistent (w0 = 0 a.e.)",
            Some(false) => "INCONSISTENT (drift on positive measure contradicts the selected option)",
            None => "no prediction",
        };
        let _ = writeln!(out, "verdict: {verdict}");
        out
    }
}

/// Sites where `|λ ∂ℓ^e/∂x|` exceeds `tol`, restricted to nodes in `mask`.
fn lambda_lx_violation(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    m: &Multiplier,
    mask: &[bool],
    tol: f64,
) -> Result<(f64, usize)> {
    let mut worst = 0.0f64;
    let mut count = 0;
    if m.lambda == 0.0 {
        return Ok((0.0, 0));
    }
    for (k, piece) in sites(traj) {
        if !mask[k] {
            continue;
        }
        let p = &traj.control.pieces[piece];
        let g = spec.le_grad(traj.y(k), p.w0, &p.w, p.a)?;
        let v = libm::fabs(m.lambda) * linalg::norm(&g);
        if v > tol {
            count += 1;
        }
        worst = worst.max(v);
    }
    Ok((worst, count))
}

/// Evaluates options (a), (b), (c) and cross-checks the process against the
/// zero-time prediction when one of them holds.
pub fn classify_fully_impulsive(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    mult: &Multiplier,
    pool0: &[BracketSpec],
    pool1: &[BracketSpec],
    tol: &Tolerances,
) -> Result<FullyImpulsiveReport> {
    mult.check_grid(traj)?;
    let hp1 = spec.hp1()?;
    let last = traj.steps();
    if !(traj.beta(last) < spec.budget) {
        return Err(Error::HypothesisViolated(format!(
            "beta(S) = {} reaches the budget K",
            traj.beta(last)
        )));
    }
    let (m, _) = normalized(mult);
    let n = spec.n;
    let nodes = last + 1;

    let i1 = I1Columns::new(spec, pool0)?;
    let mut i1_fail = alloc::vec![false; nodes];
    let mut i1_min = n;
    for (k, flag) in i1_fail.iter_mut().enumerate() {
        let pt = i1.point(traj.y(k))?;
        i1_min = i1_min.min(pt.rank);
        *flag = pt.rank < n;
    }
    let j_count = i1_fail.iter().filter(|f| **f).count();
    let mut options = Vec::new();
    options.push(OptionVerdict {
        name: "a",
        holds: j_count == 0,
        detail: format!("I.1 at {} of {nodes} nodes, minimum rank {i1_min}", nodes - j_count),
    });

    let b = if j_count == 0 {
        OptionVerdict {
            name: "b",
            holds: false,
            detail: "I.1 holds everywhere, so the set J is empty".into(),
        }
    } else if spec.m1 != spec.m() {
        OptionVerdict {
            name: "b",
            holds: false,
            detail: format!("m1 = {} differs from m = {}", spec.m1, spec.m()),
        }
    } else {
        let i2 = I2Columns::new(spec, pool0, pool1)?;
        let mut i2_min = n;
        for k in 0..nodes {
            for a in 0..spec.control_set.len() {
                i2_min = i2_min.min(i2.point(spec, traj.y(k), a)?.rank);
            }
        }
        let (worst, count) = lambda_lx_violation(spec, traj, &m, &i1_fail, tol.eq)?;
        OptionVerdict {
            name: "b",
            holds: i2_min == n && count == 0,
            detail: format!(
                "I.2 minimum rank {i2_min}; J has {j_count} nodes; max |lambda dl/dx| on J = {worst:e}"
            ),
        }
    };
    options.push(b);

    let c = match linear_structure(spec) {
        None => OptionVerdict {
            name: "c",
            holds: false,
            detail: "system is not linear".into(),
        },
        Some((cm, em)) => {
            let kal = kalman_check(&cm, &em)?;
            let all = alloc::vec![true; nodes];
            let (worst, count) = lambda_lx_violation(spec, traj, &m, &all, tol.eq)?;
            OptionVerdict {
                name: "c",
                holds: kal.verdict && count == 0,
                detail: format!("Kalman rank {} of {n}; max |lambda dl/dx| = {worst:e}", kal.min_rank()),
            }
        }
    };
    options.push(c);

    let drift_measure: f64 = traj
        .control
        .pieces
        .iter()
        .filter(|p| p.w0 > DRIFT_THRESHOLD)
        .fold(0.0, |acc, p| acc + p.duration);
    let selected = options.iter().find(|o| o.holds).map(|o| o.name);
    let consistent = selected.map(|_| drift_measure == 0.0);
    Ok(FullyImpulsiveReport {
        hp1,
        options,
        selected,
        drift_measure,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlPiece, SpaceTimeControl};
    use crate::expr::Expr;
    use crate::field::VectorField;
    use crate::integrate::{integrate_extended, IntegratorConfig};
    use crate::problem::fixtures::scalar_jump;
    use crate::problem::{ProblemData, Target};
    use alloc::vec;

    fn integrate(spec: &ProblemSpec, pieces: Vec<ControlPiece>) -> SpaceTimeTrajectory {
        let ctrl = SpaceTimeControl::new(pieces).unwrap();
        integrate_extended(spec, &ctrl, &IntegratorConfig::with_step(0.05)).unwrap()
    }

    fn jump_mult(steps: usize) -> Multiplier {
        Multiplier {
            p0: -1.0,
            pi: 0.0,
            lambda: 1.0,
            p: vec![vec![0.0]; steps + 1],
        }
    }

    #[test]
    fn scalar_jump_selects_a() {
        let spec = scalar_jump();
        let traj = integrate(&spec, vec![ControlPiece::new(1.0, 0.0, vec![1.0], 0)]);
        let rep = classify_fully_impulsive(&spec, &traj, &jump_mult(traj.steps()), &[], &[], &Tolerances::default())
            .unwrap();
        assert_eq!(rep.selected, Some("a"));
        assert_eq!(rep.drift_measure, 0.0);
        assert_eq!(rep.consistent, Some(true));
        assert!(rep.passed());
    }

    #[test]
    fn drifting_process_is_inconsistent() {
        let spec = scalar_jump();
        let traj = integrate(
            &spec,
            vec![
                ControlPiece::new(0.3, 1.0, vec![0.0], 0),
                ControlPiece::new(1.0, 0.0, vec![1.0], 0),
            ],
        );
        let rep = classify_fully_impulsive(&spec, &traj, &jump_mult(traj.steps()), &[], &[], &Tolerances::default())
            .unwrap();
        assert_eq!(rep.selected, Some("a"));
        assert!((rep.drift_measure - 0.3).abs() < 1e-15);
        assert_eq!(rep.consistent, Some(false));
        assert!(rep.to_text().contains("INCONSISTENT"));
    }

    fn double_integrator(l0: &str) -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 2,
            m1: 1,
            q: 0,
            f: VectorField::parse(&["x2", "0"]).unwrap(),
            g: vec![VectorField::parse(&["0", "1"]).unwrap()],
            control_set: vec![],
            l0: Expr::parse(l0).unwrap(),
            lhat1: Expr::parse("0").unwrap(),
            psi: Expr::parse("0").unwrap(),
            c2_generators: vec![],
            target: Target {
                rows: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                rhs: vec![0.0, 1.0],
                gamma: vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]],
            },
            budget: 5.0,
            xcheck: vec![0.0, 0.0],
        })
        .unwrap()
    }

    #[test]
    fn kalman_system_option_c() {
        let spec = double_integrator("1");
        let traj = integrate(&spec, vec![ControlPiece::new(1.0, 0.0, vec![1.0], 0)]);
        let m = Multiplier {
            p0: -1.0,
            pi: 0.0,
            lambda: 1.0,
            p: vec![vec![0.0, 0.0]; traj.steps() + 1],
        };
        let rep = classify_fully_impulsive(&spec, &traj, &m, &[], &[], &Tolerances::default()).unwrap();
        assert!(!rep.options[0].holds);
        assert!(rep.options[2].holds, "{}", rep.to_text());
        assert_eq!(rep.selected, Some("b"));
        assert_eq!(rep.consistent, Some(true));

        // with a state-dependent cost and λ > 0 the premise of (c) fails
        let spec = double_integrator("1 + x1^2");
        let traj = integrate(
            &spec,
            vec![
                ControlPiece::new(0.5, 0.0, vec![1.0], 0),
                ControlPiece::new(0.5, 1.0, vec![0.0], 0),
            ],
        );
        let m = Multiplier {
            p: vec![vec![0.0, 0.0]; traj.steps() + 1],
            ..m
        };
        let rep = classify_fully_impulsive(&spec, &traj, &m, &[], &[], &Tolerances::default()).unwrap();
        assert!(!rep.options[2].holds);
    }

    #[test]
    fn option_b_from_drift_brackets() {
        // I.1 fails (g alone spans a line), I.2 holds via [f, g1]
        let spec = double_integrator("1");
        let traj = integrate(&spec, vec![ControlPiece::new(1.0, 0.0, vec![1.0], 0)]);
        let m = Multiplier {
            p0: -1.0,
            pi: 0.0,
            lambda: 1.0,
            p: vec![vec![0.0, 0.0]; traj.steps() + 1],
        };
        let rep = classify_fully_impulsive(&spec, &traj, &m, &[], &[], &Tolerances::default()).unwrap();
        assert!(rep.options[1].holds, "{}", rep.to_text());
    }

    #[test]
    fn hypotheses_required() {
        let spec = crate::problem::fixtures::smooth();
        let ctrl = SpaceTimeControl::new(vec![ControlPiece::new(0.5, 1.0, vec![0.0], 1)]).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &IntegratorConfig::with_step(0.05)).unwrap();
        let m = Multiplier {
            p0: -1.0,
            pi: 0.0,
            lambda: 1.0,
            p: vec![vec![0.0, 0.0]; traj.steps() + 1],
        };
        assert!(matches!(
            classify_fully_impulsive(&spec, &traj, &m, &[], &[], &Tolerances::default()),
            Err(Error::HypothesisViolated(_))
        ));
    }
}
