//! Linear systems `dx/dt = Cx + Eu`: structure detection and the chain
//! conditions `p·C^kE = 0`.

use alloc::format;
use alloc::vec::Vec;

use super::normalized;
use super::rank::kalman_matrix;
use super::report::{ConditionRecord, ConditionReport};
use super::{Tolerances, RANK_TOL};
use crate::adjoint::Multiplier;
use crate::error::Result;
use crate::expr::Var;
use crate::linalg::{self, Matrix};
use crate::problem::ProblemSpec;

/// `(C, E)` when `f(x) = Cx` does not depend on `a`, the `g_i` are constant
/// and `C = R^m`.
pub fn linear_structure(spec: &ProblemSpec) -> Option<(Matrix, Matrix)> {
    if spec.m2 > 0 {
        return None;
    }
    let n = spec.n;
    let mut c = Vec::with_capacity(n);
    for (comp, row) in spec.f.components().iter().zip(spec.f.jacobian_exprs()) {
        if comp.depends_on(|v| !matches!(v, Var::X(_))) {
            return None;
        }
        let r: Option<Vec<f64>> = row.iter().map(|e| e.as_const()).collect();
        c.push(r?);
    }
    let c = Matrix::from_rows(&c);
    let zero = alloc::vec![0.0; n];
    if spec.f.eval(&zero).ok()?.iter().any(|v| *v != 0.0) {
        return None;
    }
    let mut cols = Vec::with_capacity(spec.m());
    for g in &spec.g {
        let col: Option<Vec<f64>> = g.components().iter().map(|e| e.as_const()).collect();
        cols.push(col?);
    }
    Some((c, Matrix::from_columns(&cols)))
}

/// `max_s ‖p(s)·C^kE‖` for `k = 0..n−1`, and the bound on `‖p‖` they force
/// when the pair is controllable: `‖p‖ ≤ n·tol/σ_min` of the Kalman matrix.
pub fn linear_chain_conditions(c: &Matrix, e: &Matrix, mult: &Multiplier, tol: &Tolerances) -> Result<ConditionReport> {
    let k = kalman_matrix(c, e)?;
    let n = c.rows();
    let (m, _) = normalized(mult);
    let mut rep = ConditionReport::new("linear chain conditions");
    let mut block = e.clone();
    let mut all_pass = true;
    for power in 0..n {
        let series: Vec<(f64, f64)> = m
            .p
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64, linalg::norm(&block.vec_mul(p))))
            .collect();
        let name = match power {
            0 => "p.E".into(),
            1 => "p.CE".into(),
            p => format!("p.C^{p}E"),
        };
        let rec = ConditionRecord::from_series(&name, series, tol.eq);
        all_pass &= rec.passed();
        rep.push(rec);
        block = c.mul(&block);
    }
    rep.note("series locations are grid node indices");
    let sv = linalg::singular_values(&k);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| **s > RANK_TOL * smax && **s > 0.0).count();
    let p_sup = m.p.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max);
    if rank < n {
        rep.push(ConditionRecord::unverified("p_bound", "pair is not controllable"));
    } else if !all_pass {
        rep.push(ConditionRecord::unverified("p_bound", "chain conditions fail, no bound implied"));
    } else {
        let smin = sv[n - 1];
        let bound = n as f64 * tol.eq / smin;
        rep.push(
            ConditionRecord::scalar("p_bound", (p_sup - bound).max(0.0), 0.0)
                .with_detail(format!("sup |p| = {p_sup:e}, bound n*tol/sigma_min = {bound:e}")),
        );
    }
    Ok(rep)
}
