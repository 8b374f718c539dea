//! Fixed-step RK4 integration of the extended and rescaled systems.
//!
//! State layout: `[y0, y_1..y_n, yℓ, β]`. Steps never straddle a control
//! breakpoint, so the only error is ODE truncation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::{SpaceTimeControl, StrictControl};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Upper bound on the step length; each piece uses equal substeps.
    pub max_step: f64,
    /// `BlowUp` is raised when a state entry exceeds this in magnitude.
    pub blow_up: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            max_step: 1e-2,
            blow_up: 1e8,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(max_step: f64) -> Self {
        IntegratorConfig {
            max_step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpaceTimeTrajectory {
    pub n: usize,
    pub control: SpaceTimeControl,
    /// Parameter values of the integration nodes.
    pub nodes: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Hermite-interpolated state at the midpoint of each step.
    pub mids: Vec<Vec<f64>>,
    /// Control piece driving each step.
    pub step_piece: Vec<usize>,
}

impl SpaceTimeTrajectory {
    pub fn steps(&self) -> usize {
        self.step_piece.len()
    }

    pub fn endpoint(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn y0(&self, k: usize) -> f64 {
        self.states[k][0]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.states[k][1..=self.n]
    }

    pub fn yl(&self, k: usize) -> f64 {
        self.states[k][self.n + 1]
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.states[k][self.n + 2]
    }

    pub fn total_duration(&self) -> f64 {
        *self.nodes.last().unwrap_or(&0.0)
    }

    /// Index of the node at `s`, if one lies within `tol`.
    pub fn node_index(&self, s: f64, tol: f64) -> Option<usize> {
        let k = self.nearest_node(s);
        (libm::fabs(self.nodes[k] - s) <= tol).then_some(k)
    }

    pub fn nearest_node(&self, s: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v < s);
        if k == 0 {
            0
        } else if k >= self.nodes.len() {
            self.nodes.len() - 1
        } else if s - self.nodes[k - 1] <= self.nodes[k] - s {
            k - 1
        } else {
            k
        }
    }

    /// `yℓ(S) + Ψ(y0(S), y(S))`.
    pub fn cost(&self, spec: &ProblemSpec) -> Result<f64> {
        let last = self.states.len() - 1;
        Ok(self.yl(last) + spec.psi_value(self.y0(last), self.y(last))?)
    }

    /// Control piece in force on `(nodes[k-1], nodes[k]]`, or the first piece at `k = 0`.
    pub fn piece_left_of_node(&self, k: usize) -> usize {
        if k == 0 {
            self.step_piece[0]
        } else {
            self.step_piece[k - 1]
        }
    }

    /// Control piece in force on `[nodes[k], nodes[k+1])`, or the last piece at the end.
    pub fn piece_right_of_node(&self, k: usize) -> usize {
        if k >= self.step_piece.len() {
            *self.step_piece.last().unwrap_or(&0)
        } else {
            self.step_piece[k]
        }
    }

    /// Node indices that are control breakpoints (including both ends).
    pub fn breakpoint_nodes(&self) -> Vec<usize> {
        let mut out = vec![0];
        for k in 1..self.steps() {
            if self.step_piece[k] != self.step_piece[k - 1] {
                out.push(k);
            }
        }
        out.push(self.steps());
        out
    }
}

/// Right-hand side `(1+ζ)(w0, F^e, ℓ^e, |w|)` for one control piece.
pub(crate) fn extended_field(
    spec: &ProblemSpec,
    state: &[f64],
    w0: f64,
    w: &[f64],
    a: usize,
    zeta: f64,
) -> Result<Vec<f64>> {
    let n = spec.n;
    let x = &state[1..=n];
    let k = 1.0 + zeta;
    let mut out = Vec::with_capacity(n + 3);
    out.push(k * w0);
    for v in spec.fe(x, w0, w, a)? {
        out.push(k * v);
    }
    out.push(k * spec.le(x, w0, w, a)?);
    out.push(k * linalg::norm(w));
    Ok(out)
}

pub(crate) fn rk4_step<F>(f: &F, y: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(y)?;
    let mut tmp = y.to_vec();
    linalg::axpy(0.5 * h, &k1, &mut tmp);
    let k2 = f(&tmp)?;
    let mut tmp = y.to_vec();
    linalg::axpy(0.5 * h, &k2, &mut tmp);
    let k3 = f(&tmp)?;
    let mut tmp = y.to_vec();
    linalg::axpy(h, &k3, &mut tmp);
    let k4 = f(&tmp)?;
    let mut out = y.to_vec();
    for i in 0..out.len() {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok((out, k1))
}

/// Substep count for a piece of length `d`.
pub(crate) fn substeps(d: f64, max_step: f64) -> usize {
    let k = libm::ceil(d / max_step - 1e-9);
    (k as usize).max(1)
}

fn integrate_from(
    spec: &ProblemSpec,
    ctrl: &SpaceTimeControl,
    init: Vec<f64>,
    cfg: &IntegratorConfig,
) -> Result<SpaceTimeTrajectory> {
    if !(cfg.max_step > 0.0) {
        return Err(Error::InvalidControl("max_step must be positive".into()));
    }
    ctrl.validate(spec)?;
    let mut nodes = vec![0.0];
    let mut states = vec![init];
    let mut mids = Vec::new();
    let mut step_piece = Vec::new();
    let mut s = 0.0;
    for (pi, p) in ctrl.pieces.iter().enumerate() {
        if p.duration == 0.0 {
            continue;
        }
        let f = |y: &[f64]| extended_field(spec, y, p.w0, &p.w, p.a, p.zeta);
        let steps = substeps(p.duration, cfg.max_step);
        let h = p.duration / steps as f64;
        let start = s;
        for j in 0..steps {
            let y = states.last().unwrap();
            let (next, f0) = rk4_step(&f, y, h)?;
            let f1 = f(&next)?;
            let mid: Vec<f64> = (0..next.len())
                .map(|i| 0.5 * (y[i] + next[i]) + h / 8.0 * (f0[i] - f1[i]))
                .collect();
            let node = if j + 1 == steps { start + p.duration } else { start + (j + 1) as f64 * h };
            if linalg::norm_inf(&next) > cfg.blow_up || next.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp(node));
            }
            nodes.push(node);
            states.push(next);
            mids.push(mid);
            step_piece.push(pi);
        }
        s = start + p.duration;
    }
    Ok(SpaceTimeTrajectory {
        n: spec.n,
        control: ctrl.clone(),
        nodes,
        states,
        mids,
        step_piece,
    })
}

fn initial_state(spec: &ProblemSpec) -> Vec<f64> {
    let mut init = vec![0.0];
    init.extend_from_slice(&spec.xcheck);
    init.push(0.0);
    init.push(0.0);
    init
}

/// Integrates the extended system from `(0, x̌, 0, 0)`; every `zeta` must be zero.
pub fn integrate_extended(spec: &ProblemSpec, ctrl: &SpaceTimeControl, cfg: &IntegratorConfig) -> Result<SpaceTimeTrajectory> {
    if ctrl.pieces.iter().any(|p| p.zeta != 0.0) {
        return Err(Error::InvalidControl("extended system takes no rescaling; use integrate_rescaled".into()));
    }
    integrate_from(spec, ctrl, initial_state(spec), cfg)
}

/// Integrates the rescaled system with `|zeta| <= rho < 1` on every piece.
pub fn integrate_rescaled(
    spec: &ProblemSpec,
    ctrl: &SpaceTimeControl,
    rho: f64,
    cfg: &IntegratorConfig,
) -> Result<SpaceTimeTrajectory> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidControl(format!("rho = {rho} must lie in [0, 1)")));
    }
    if let Some(p) = ctrl.pieces.iter().find(|p| libm::fabs(p.zeta) > rho) {
        return Err(Error::InvalidControl(format!("zeta = {} exceeds rho = {rho}", p.zeta)));
    }
    integrate_from(spec, ctrl, initial_state(spec), cfg)
}

/// Canonical parameterization of a process, re-integrated on the new control.
pub fn canonicalize(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    cfg: &IntegratorConfig,
) -> Result<(SpaceTimeControl, SpaceTimeTrajectory)> {
    let ctrl = traj.control.canonical()?;
    if ctrl == traj.control {
        return Ok((ctrl, traj.clone()));
    }
    let t = integrate_from(spec, &ctrl, initial_state(spec), cfg)?;
    Ok((ctrl, t))
}

/// Original-system trajectory: `x`, total variation `𝓋` and running cost.
#[derive(Debug, Clone)]
pub struct StrictTrajectory {
    pub n: usize,
    pub nodes: Vec<f64>,
    /// `[x_1..x_n, 𝓋, J]` at each node.
    pub states: Vec<Vec<f64>>,
}

impl StrictTrajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn variation(&self) -> f64 {
        self.endpoint()[self.n]
    }

    /// `J + Ψ(T, x(T))`.
    pub fn cost(&self, spec: &ProblemSpec) -> Result<f64> {
        let e = self.endpoint();
        let t = *self.nodes.last().unwrap_or(&0.0);
        Ok(e[self.n + 1] + spec.psi_value(t, &e[..self.n])?)
    }
}

pub fn integrate_strict(spec: &ProblemSpec, ctrl: &StrictControl, cfg: &IntegratorConfig) -> Result<StrictTrajectory> {
    let n = spec.n;
    let mut init = spec.xcheck.clone();
    init.push(0.0);
    init.push(0.0);
    let mut nodes = vec![0.0];
    let mut states = vec![init];
    let mut t = 0.0;
    for p in &ctrl.pieces {
        if p.duration == 0.0 {
            continue;
        }
        spec.check_control(1.0, &p.u, p.a)?;
        let nu = linalg::norm(&p.u);
        let f = |y: &[f64]| -> Result<Vec<f64>> {
            let x = &y[..n];
            let mut out = spec.fe(x, 1.0, &p.u, p.a)?;
            out.push(nu);
            out.push(spec.running_cost(x, &p.u, p.a)?);
            Ok(out)
        };
        let steps = substeps(p.duration, cfg.max_step);
        let h = p.duration / steps as f64;
        for j in 0..steps {
            let (next, _) = rk4_step(&f, states.last().unwrap(), h)?;
            let node = if j + 1 == steps { t + p.duration } else { t + (j + 1) as f64 * h };
            if linalg::norm_inf(&next) > cfg.blow_up {
                return Err(Error::BlowUp(node));
            }
            nodes.push(node);
            states.push(next);
        }
        t += p.duration;
    }
    Ok(StrictTrajectory { n, nodes, states })
}
