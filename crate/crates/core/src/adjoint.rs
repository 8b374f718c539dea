//! Adjoint paths and the augmented fundamental matrix of the variational equation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hamiltonian::Costate;
use crate::integrate::{rk4_step, SpaceTimeTrajectory};
use crate::linalg::{self, Matrix};
use crate::problem::ProblemSpec;

/// `(p0, p(·), π, λ)` with `p` stored at every trajectory node.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub p0: f64,
    pub pi: f64,
    pub lambda: f64,
    pub p: Vec<Vec<f64>>,
}

impl Multiplier {
    pub fn at(&self, k: usize) -> Costate<'_> {
        Costate {
            p0: self.p0,
            p: &self.p[k],
            pi: self.pi,
            lambda: self.lambda,
        }
    }

    pub fn terminal_p(&self) -> &[f64] {
        self.p.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn scaled(&self, c: f64) -> Multiplier {
        Multiplier {
            p0: c * self.p0,
            pi: c * self.pi,
            lambda: c * self.lambda,
            p: self.p.iter().map(|v| v.iter().map(|x| c * x).collect()).collect(),
        }
    }

    /// `‖(p0, p(S̄), λ)‖`.
    pub fn terminal_norm(&self) -> f64 {
        let mut v = vec![self.p0, self.lambda];
        v.extend_from_slice(self.terminal_p());
        linalg::norm(&v)
    }

    /// `max_s ‖(p0, p(s), λ)‖`.
    pub fn sup_norm(&self) -> f64 {
        self.p
            .iter()
            .map(|p| libm::sqrt(self.p0 * self.p0 + self.lambda * self.lambda + linalg::dot(p, p)))
            .fold(0.0, f64::max)
    }

    pub fn check_grid(&self, traj: &SpaceTimeTrajectory) -> Result<()> {
        if self.p.len() != traj.nodes.len() {
            return Err(Error::GridMismatch(format!(
                "{} adjoint samples for {} trajectory nodes",
                self.p.len(),
                traj.nodes.len()
            )));
        }
        if let Some(v) = self.p.iter().find(|v| v.len() != traj.n) {
            return Err(Error::GridMismatch(format!("adjoint sample of length {} in R^{}", v.len(), traj.n)));
        }
        Ok(())
    }

    /// Integrates the adjoint equation backward from `p(S̄)`.
    pub fn from_terminal(
        spec: &ProblemSpec,
        traj: &SpaceTimeTrajectory,
        p0: f64,
        p_terminal: &[f64],
        pi: f64,
        lambda: f64,
    ) -> Result<Self> {
        Ok(Multiplier {
            p0,
            pi,
            lambda,
            p: integrate_adjoint(spec, traj, p_terminal, lambda)?,
        })
    }
}

fn state_x(state: &[f64], n: usize) -> &[f64] {
    &state[1..=n]
}

/// `dp/ds = (1+ζ)(−p·∂F^e/∂x + λ ∂ℓ^e/∂x)`, evaluated on a stored state.
fn adjoint_rhs(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, step: usize, state: &[f64], p: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let piece = &traj.control.pieces[traj.step_piece[step]];
    let x = state_x(state, spec.n);
    let a = spec.fe_jacobian(x, piece.w0, &piece.w, piece.a)?;
    let mut out: Vec<f64> = a.vec_mul(p).iter().map(|v| -v).collect();
    if lambda != 0.0 {
        let g = spec.le_grad(x, piece.w0, &piece.w, piece.a)?;
        linalg::axpy(lambda, &g, &mut out);
    }
    let k = 1.0 + piece.zeta;
    if k != 1.0 {
        out.iter_mut().for_each(|v| *v *= k);
    }
    Ok(out)
}

/// One backward RK4 step of the adjoint from node `step + 1` to node `step`.
pub(crate) fn adjoint_step(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    step: usize,
    p_end: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let h = traj.nodes[step + 1] - traj.nodes[step];
    let end = &traj.states[step + 1];
    let mid = &traj.mids[step];
    let start = &traj.states[step];
    let k1 = adjoint_rhs(spec, traj, step, end, p_end, lambda)?;
    let mut tmp = p_end.to_vec();
    linalg::axpy(-0.5 * h, &k1, &mut tmp);
    let k2 = adjoint_rhs(spec, traj, step, mid, &tmp, lambda)?;
    let mut tmp = p_end.to_vec();
    linalg::axpy(-0.5 * h, &k2, &mut tmp);
    let k3 = adjoint_rhs(spec, traj, step, mid, &tmp, lambda)?;
    let mut tmp = p_end.to_vec();
    linalg::axpy(-h, &k3, &mut tmp);
    let k4 = adjoint_rhs(spec, traj, step, start, &tmp, lambda)?;
    Ok((0..p_end.len())
        .map(|i| p_end[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Backward integration of the adjoint path on the trajectory nodes.
pub fn integrate_adjoint(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, p_terminal: &[f64], lambda: f64) -> Result<Vec<Vec<f64>>> {
    if p_terminal.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: p_terminal.len(),
        });
    }
    let steps = traj.steps();
    let mut out = vec![Vec::new(); steps + 1];
    out[steps] = p_terminal.to_vec();
    for k in (0..steps).rev() {
        out[k] = adjoint_step(spec, traj, k, &out[k + 1], lambda)?;
    }
    Ok(out)
}

/// Adjoint paths spanning every multiplier with `π = 0`:
/// `p(s) = Σ_i p̄_i·rows[i](s) + λ·forced(s)`.
#[derive(Debug, Clone)]
pub struct AdjointBasis {
    /// `rows[i][k]` is the adjoint with terminal `e_i` and `λ = 0`, i.e. row `i` of `M(S̄, s_k)`.
    pub rows: Vec<Vec<Vec<f64>>>,
    /// Adjoint with zero terminal value and `λ = 1`, i.e. `−μ(S̄, s_k)`.
    pub forced: Vec<Vec<f64>>,
}

impl AdjointBasis {
    pub fn new(spec: &ProblemSpec, traj: &SpaceTimeTrajectory) -> Result<Self> {
        let n = spec.n;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rows.push(integrate_adjoint(spec, traj, &e, 0.0)?);
        }
        let forced = integrate_adjoint(spec, traj, &vec![0.0; n], 1.0)?;
        Ok(AdjointBasis { rows, forced })
    }

    pub fn p_at(&self, k: usize, p_bar: &[f64], lambda: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.forced[k].iter().map(|v| lambda * v).collect();
        for (row, c) in self.rows.iter().zip(p_bar) {
            linalg::axpy(*c, &row[k], &mut out);
        }
        out
    }

    pub fn multiplier(&self, p0: f64, p_bar: &[f64], lambda: f64) -> Multiplier {
        Multiplier {
            p0,
            pi: 0.0,
            lambda,
            p: (0..self.forced.len()).map(|k| self.p_at(k, p_bar, lambda)).collect(),
        }
    }
}

/// `M(s, s1)` and `μ(s, s1)` for every node `s ≥ s1`.
#[derive(Debug, Clone)]
pub struct FundamentalRecord {
    pub base: usize,
    pub base_s: f64,
    /// `m[j]` is `M(nodes[base + j], s1)`.
    pub m: Vec<Matrix>,
    pub mu: Vec<Vec<f64>>,
}

impl FundamentalRecord {
    /// `M(s_k, s1)` for a node index `k ≥ base`.
    pub fn matrix_at(&self, k: usize) -> &Matrix {
        &self.m[k - self.base]
    }

    pub fn mu_at(&self, k: usize) -> &[f64] {
        &self.mu[k - self.base]
    }

    pub fn terminal_matrix(&self) -> &Matrix {
        self.m.last().unwrap()
    }

    pub fn terminal_mu(&self) -> &[f64] {
        self.mu.last().unwrap()
    }
}

/// Integrates `dV/ds = ∂F^e/∂x·V`, `dμ/ds = ∂ℓ^e/∂x·V` from `V = I`, `μ = 0` at node `base`,
/// jointly with the state so `M` is the Jacobian of the discrete flow.
pub fn fundamental_matrix(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, base: usize) -> Result<FundamentalRecord> {
    let n = spec.n;
    if base >= traj.nodes.len() {
        return Err(Error::GridMismatch(format!("node {base} outside the trajectory")));
    }
    let mut z = vec![0.0; n + n * n + n];
    z[..n].copy_from_slice(traj.y(base));
    for i in 0..n {
        z[n + i * n + i] = 1.0;
    }
    let mut m = vec![Matrix::identity(n)];
    let mut mu = vec![vec![0.0; n]];
    for step in base..traj.steps() {
        let piece = &traj.control.pieces[traj.step_piece[step]];
        let k = 1.0 + piece.zeta;
        let rhs = |z: &[f64]| -> Result<Vec<f64>> {
            let x = &z[..n];
            let fe = spec.fe(x, piece.w0, &piece.w, piece.a)?;
            let a = spec.fe_jacobian(x, piece.w0, &piece.w, piece.a)?;
            let g = spec.le_grad(x, piece.w0, &piece.w, piece.a)?;
            let v = Matrix::from_rows(&(0..n).map(|i| z[n + i * n..n + (i + 1) * n].to_vec()).collect::<Vec<_>>());
            let av = a.mul(&v);
            let gv = v.vec_mul(&g);
            let mut out = Vec::with_capacity(z.len());
            out.extend(fe.iter().map(|x| k * x));
            out.extend(av.as_slice().iter().map(|x| k * x));
            out.extend(gv.iter().map(|x| k * x));
            Ok(out)
        };
        let h = traj.nodes[step + 1] - traj.nodes[step];
        let (next, _) = rk4_step(&rhs, &z, h)?;
        z = next;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| z[n + i * n..n + (i + 1) * n].to_vec()).collect();
        m.push(Matrix::from_rows(&rows));
        mu.push(z[n + n * n..].to_vec());
    }
    Ok(FundamentalRecord {
        base,
        base_s: traj.nodes[base],
        m,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlPiece, SpaceTimeControl};
    use crate::field::VectorField;
    use crate::integrate::{integrate_extended, IntegratorConfig};
    use crate::problem::fixtures::{scalar_jump, smooth};
    use crate::problem::{ProblemData, Target};

    fn smooth_process() -> (ProblemSpec, SpaceTimeTrajectory) {
        let spec = smooth();
        let ctrl = SpaceTimeControl::new(vec![
            ControlPiece::new(0.3, 1.0, vec![0.0], 2),
            ControlPiece::new(0.2, 0.0, vec![1.0], 0),
            ControlPiece::new(0.4, 0.5, vec![-0.5], 0),
            ControlPiece::new(0.3, 1.0, vec![0.0], 1),
        ])
        .unwrap();
        let traj = integrate_extended(&spec, &ctrl, &IntegratorConfig::with_step(1e-3)).unwrap();
        (spec, traj)
    }

    #[test]
    fn constant_fields_give_constant_adjoint() {
        let spec = scalar_jump();
        let ctrl = SpaceTimeControl::uniform(1.0, 4, |k| ((k % 2) as f64, vec![1.0 - (k % 2) as f64], 0)).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &IntegratorConfig::default()).unwrap();
        let p = integrate_adjoint(&spec, &traj, &[0.7], 1.0).unwrap();
        assert!(p.iter().all(|v| v == &vec![0.7]));
        let rec = fundamental_matrix(&spec, &traj, 10).unwrap();
        assert!(rec.m.iter().all(|m| m == &Matrix::identity(1)));
        assert!(rec.mu.iter().all(|v| v == &vec![0.0]));
    }

    #[test]
    fn linear_adjoint_matches_matrix_exponential() {
        // dx/ds = C x w0, p(s) = p(S)·exp(C(S − s)).
        let spec = ProblemSpec::new(ProblemData {
            n: 2,
            m1: 1,
            q: 0,
            f: VectorField::parse(&["-0.5*x1 + x2", "-x1 - 0.3*x2"]).unwrap(),
            g: vec![VectorField::parse(&["0", "1"]).unwrap()],
            control_set: vec![],
            l0: crate::expr::Expr::parse("0").unwrap(),
            lhat1: crate::expr::Expr::parse("0").unwrap(),
            psi: crate::expr::Expr::parse("x1").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 10.0,
            xcheck: vec![1.0, 0.0],
        })
        .unwrap();
        let s_total = 1.5;
        let ctrl = SpaceTimeControl::uniform(s_total, 3, |_| (1.0, vec![0.0], 0)).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &IntegratorConfig::with_step(1e-2)).unwrap();
        let pt = [0.4, -1.1];
        let p = integrate_adjoint(&spec, &traj, &pt, 0.0).unwrap();
        let c = Matrix::from_rows(&[vec![-0.5, 1.0], vec![-1.0, -0.3]]);
        let expm = |t: f64| {
            let mut term = Matrix::identity(2);
            let mut sum = Matrix::identity(2);
            for k in 1..40 {
                term = term.mul(&c.scale(t / k as f64));
                sum = sum.add(&term);
            }
            sum
        };
        for k in (0..traj.nodes.len()).step_by(17) {
            let exact = expm(s_total - traj.nodes[k]).vec_mul(&pt);
            assert!((exact[0] - p[k][0]).abs() < 1e-7 && (exact[1] - p[k][1]).abs() < 1e-7);
        }
    }

    #[test]
    fn fundamental_matrix_is_flow_jacobian() {
        let (spec, traj) = smooth_process();
        let base = traj.nearest_node(0.45);
        let rec = fundamental_matrix(&spec, &traj, base).unwrap();
        let h = 1e-6;
        let tail = SpaceTimeControl {
            pieces: traj.control.window(traj.nodes[base], traj.total_duration()),
        };
        let flow = |x: &[f64]| {
            let mut d = spec.to_data();
            d.xcheck = x.to_vec();
            let sp = ProblemSpec::new(d).unwrap();
            integrate_extended(&sp, &tail, &IntegratorConfig::with_step(1e-3)).unwrap().endpoint().to_vec()
        };
        let x = traj.y(base).to_vec();
        for j in 0..2 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let (ep, em) = (flow(&xp), flow(&xm));
            for i in 0..2 {
                let fd = (ep[1 + i] - em[1 + i]) / (2.0 * h);
                assert!((rec.terminal_matrix()[(i, j)] - fd).abs() < 1e-5);
            }
            let fd_mu = (ep[3] - em[3]) / (2.0 * h);
            assert!((rec.terminal_mu()[j] - fd_mu).abs() < 1e-5);
        }
    }

    #[test]
    fn cocycle_and_pairing() {
        let (spec, traj) = smooth_process();
        let k0 = traj.nearest_node(0.1);
        let k1 = traj.nearest_node(0.55);
        let k2 = traj.nearest_node(1.1);
        let r0 = fundamental_matrix(&spec, &traj, k0).unwrap();
        let r1 = fundamental_matrix(&spec, &traj, k1).unwrap();
        let lhs = r0.matrix_at(k2);
        let rhs = r1.matrix_at(k2).mul(r0.matrix_at(k1));
        assert!(lhs.max_abs_diff(&rhs) < 1e-8);

        let lambda = 0.8;
        let p = integrate_adjoint(&spec, &traj, &[0.3, -0.9], lambda).unwrap();
        let back = r1.matrix_at(k2).vec_mul(&p[k2]);
        for i in 0..2 {
            let v = back[i] - lambda * r1.mu_at(k2)[i];
            assert!((v - p[k1][i]).abs() < 1e-6);
        }
    }

    #[test]
    fn basis_reproduces_direct_integration() {
        let (spec, traj) = smooth_process();
        let basis = AdjointBasis::new(&spec, &traj).unwrap();
        let direct = integrate_adjoint(&spec, &traj, &[0.2, 0.5], 0.7).unwrap();
        let via = basis.multiplier(-1.0, &[0.2, 0.5], 0.7);
        for k in 0..traj.nodes.len() {
            for i in 0..2 {
                assert!((direct[k][i] - via.p[k][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairing_derivative_along_variations() {
        // d/ds [p·V] = λ ∂ℓ^e/∂x·V along the trajectory.
        let (spec, traj) = smooth_process();
        let lambda = 0.6;
        let p = integrate_adjoint(&spec, &traj, &[1.0, 0.4], lambda).unwrap();
        let base = 0;
        let rec = fundamental_matrix(&spec, &traj, base).unwrap();
        let v0 = [0.3, -0.7];
        let pair: Vec<f64> = (0..traj.nodes.len())
            .map(|k| linalg::dot(&p[k], &rec.matrix_at(k).mul_vec(&v0)))
            .collect();
        let forcing: Vec<f64> = (0..traj.nodes.len()).map(|k| lambda * linalg::dot(rec.mu_at(k), &v0)).collect();
        for k in [100, 400, 700, 1100] {
            let lhs = pair[k] - pair[0];
            let rhs = forcing[k] - forcing[0];
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }
}
