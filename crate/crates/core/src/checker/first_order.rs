//! Conditions of the first order maximum principle and the drift/impulse split.

use alloc::format;
use alloc::vec::Vec;

use super::report::{ConditionRecord, ConditionReport};
use super::{normalized, sites, Tolerances};
use crate::adjoint::{adjoint_step, Multiplier};
use crate::error::Result;
use crate::hamiltonian::{drift_impulse_hamiltonians, hamiltonian_unchecked, maximize_hamiltonian};
use crate::integrate::SpaceTimeTrajectory;
use crate::linalg;
use crate::problem::ProblemSpec;

fn data_scale(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, m: &Multiplier) -> Result<f64> {
    let mut scale = 0.0f64;
    for (k, piece) in sites(traj) {
        let p = &traj.control.pieces[piece];
        let x = traj.y(k);
        let fe = spec.fe(x, p.w0, &p.w, p.a)?;
        let le = spec.le(x, p.w0, &p.w, p.a)?;
        let t = libm::fabs(m.p0 * p.w0)
            + libm::fabs(linalg::dot(&m.p[k], &fe))
            + libm::fabs(m.lambda * le)
            + libm::fabs(m.pi) * linalg::norm(&p.w);
        scale = scale.max(t);
    }
    Ok(scale)
}

/// Distance of `(p0, p(S̄)) + λ∇Ψ` to `−Γ^⊥`, computed as the norm of its
/// projection onto the polar cone `−Γ`.
pub(crate) fn transversality_defect(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, m: &Multiplier) -> Result<f64> {
    let last = traj.steps();
    let (dt, dx) = spec.psi_grad(traj.y0(last), traj.y(last))?;
    let mut z = Vec::with_capacity(spec.n + 1);
    z.push(m.p0 + m.lambda * dt);
    z.extend(m.terminal_p().iter().zip(&dx).map(|(p, d)| p + m.lambda * d));
    let gens: Vec<Vec<f64>> = spec
        .target
        .cone_generators(spec.n)
        .iter()
        .map(|g| g.iter().map(|v| -v).collect())
        .collect();
    if gens.is_empty() {
        return Ok(0.0);
    }
    let (proj, _) = linalg::project_onto_cone(&z, &gens);
    Ok(linalg::norm(&proj))
}

/// Residuals of non-triviality, transversality, the adjoint equation, the
/// maximization condition and the vanishing of the maximized Hamiltonian.
pub fn check_first_order(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    mult: &Multiplier,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    mult.check_grid(traj)?;
    let mut rep = ConditionReport::new("first order maximum principle");
    let raw_norm = mult.sup_norm();
    let (m, scale) = normalized(mult);
    rep.note(format!("multiplier scaled by 1/{scale:e} to unit norm of (p0, p(S), lambda)"));
    let eq_tol = tol.eq * (1.0 + data_scale(spec, traj, &m)?);

    let trivial = !(raw_norm > 0.0);
    rep.push(
        ConditionRecord::scalar("nontriviality", if trivial { 1.0 } else { 0.0 }, 0.0)
            .with_detail(format!("sup norm of (p0, p, lambda) = {raw_norm:e}")),
    );
    let last = traj.steps();
    if traj.y0(last) > tol.ineq {
        let p_sup = m.p.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max);
        let size = p_sup + libm::fabs(m.lambda);
        rep.push(
            ConditionRecord::scalar("nontriviality_strong", if size > eq_tol { 0.0 } else { 1.0 }, 0.0)
                .with_detail(format!("y0(S) > 0; sup |p| + lambda = {size:e}")),
        );
    }
    rep.push(ConditionRecord::scalar("lambda_nonnegative", (-m.lambda).max(0.0), tol.ineq));
    rep.push(ConditionRecord::scalar("pi_nonpositive", m.pi.max(0.0), tol.ineq));
    rep.push(ConditionRecord::scalar(
        "transversality",
        transversality_defect(spec, traj, &m)?,
        eq_tol,
    ));
    if traj.beta(last) < spec.budget - tol.ineq {
        rep.push(ConditionRecord::scalar("pi_in_J", libm::fabs(m.pi), tol.ineq).with_detail("beta(S) < K, J = {0}"));
    } else {
        rep.push(ConditionRecord::unverified(
            "pi_in_J",
            "beta(S) = K: only the pi = 0 branch is certified",
        ));
    }

    let mut adj = Vec::with_capacity(last);
    let mut rate = 0.0f64;
    for k in 0..last {
        let h = traj.nodes[k + 1] - traj.nodes[k];
        let back = adjoint_step(spec, traj, k, &m.p[k + 1], m.lambda)?;
        adj.push((traj.nodes[k], linalg::norm(&linalg::sub(&m.p[k], &back)) / h));
        rate = rate.max(linalg::norm(&linalg::sub(&m.p[k + 1], &m.p[k])) / h);
    }
    rep.push(ConditionRecord::from_series("adjoint_equation", adj, tol.eq * (1.0 + rate)));

    let mut gap = Vec::new();
    let mut vanish = Vec::new();
    let mut last_node = usize::MAX;
    let mut hmax = 0.0;
    for (k, piece) in sites(traj) {
        let c = m.at(k);
        let x = traj.y(k);
        if k != last_node {
            hmax = maximize_hamiltonian(spec, x, &c, tol.resolution)?.value;
            vanish.push((traj.nodes[k], libm::fabs(hmax)));
            last_node = k;
        }
        let p = &traj.control.pieces[piece];
        let href = hamiltonian_unchecked(spec, x, &c, p.w0, &p.w, p.a)?;
        gap.push((traj.nodes[k], (hmax - href).max(0.0)));
    }
    rep.push(ConditionRecord::from_series("maximization", gap, eq_tol));
    rep.push(ConditionRecord::from_series("hamiltonian_vanishes", vanish, eq_tol));
    Ok(rep)
}

/// Drift/impulse complementarity and the two implications of the split.
pub fn check_complementarity(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    mult: &Multiplier,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    mult.check_grid(traj)?;
    let mut rep = ConditionReport::new("drift/impulse complementarity");
    let (m, _) = normalized(mult);
    let eq_tol = tol.eq * (1.0 + data_scale(spec, traj, &m)?);
    let zero = alloc::vec![0.0; spec.m()];
    let mut cdr = Vec::new();
    let mut cimp = Vec::new();
    let mut split = Vec::new();
    let mut imp_i = Vec::new();
    let mut imp_ii = Vec::new();
    for (k, piece) in sites(traj) {
        let s = traj.nodes[k];
        let c = m.at(k);
        let x = traj.y(k);
        let p = &traj.control.pieces[piece];
        let drift_term = p.w0 * hamiltonian_unchecked(spec, x, &c, 1.0, &zero, p.a)?;
        let href = hamiltonian_unchecked(spec, x, &c, p.w0, &p.w, p.a)?;
        cdr.push((s, libm::fabs(drift_term)));
        cimp.push((s, libm::fabs(href - drift_term)));
        let (hdr, himp) = drift_impulse_hamiltonians(spec, x, &c)?;
        split.push((s, libm::fabs(hdr.max(himp))));
        if hdr < -eq_tol {
            imp_i.push((s, p.w0.max(libm::fabs(himp))));
        }
        if himp < -eq_tol {
            imp_ii.push((s, linalg::norm(&p.w).max(libm::fabs(hdr))));
        }
    }
    rep.push(ConditionRecord::from_series("drift_complementarity", cdr, eq_tol));
    rep.push(ConditionRecord::from_series("impulse_complementarity", cimp, eq_tol));
    rep.push(ConditionRecord::from_series("max_drift_impulse_vanishes", split, eq_tol));
    for (name, series) in [("drift_negative_implies_impulse", imp_i), ("impulse_negative_implies_drift", imp_ii)] {
        if series.is_empty() {
            rep.push(ConditionRecord::scalar(name, 0.0, eq_tol).with_detail("premise never holds"));
        } else {
            let count = series.len();
            rep.push(
                ConditionRecord::from_series(name, series, eq_tol)
                    .with_detail(format!("premise holds at {count} sites")),
            );
        }
    }
    Ok(rep)
}
