//! Multiplier search in the `π = 0` branch.
//!
//! Every condition is linear in `z = (p0, p(S̄), λ)` once the adjoint basis is
//! known, so the search reduces to a null space of equality rows followed by a
//! scan of its unit sphere for inequality feasibility.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::first_order::transversality_defect;
use super::higher_order::BracketSpec;
use super::sites;
use crate::adjoint::{AdjointBasis, Multiplier};
use crate::error::{Error, Result};
use crate::hamiltonian::maximize_hamiltonian;
use crate::integrate::SpaceTimeTrajectory;
use crate::linalg::{self, Matrix};
use crate::problem::ProblemSpec;
use crate::sampling;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Grid nodes sampled for the Hamiltonian rows (breakpoints are always added).
    pub sample_nodes: usize,
    pub sphere_samples: usize,
    /// Cap on pattern-search iterations per candidate.
    pub refine_iters: usize,
    /// Largest residual accepted for a certificate.
    pub tol: f64,
    pub pivot_tol: f64,
    /// `λ ≥ lambda_margin` on the unit sphere counts as normal.
    pub lambda_margin: f64,
    /// Add `p·g_i = 0` and `p·B = 0` rows.
    pub higher_order: bool,
    pub brackets: Vec<BracketSpec>,
    pub resolution: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            sample_nodes: 64,
            sphere_samples: 4096,
            refine_iters: 4000,
            tol: 1e-8,
            pivot_tol: 1e-10,
            lambda_margin: 1e-6,
            higher_order: false,
            brackets: Vec::new(),
            resolution: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSearch {
    Found { multiplier: Multiplier, residual: f64 },
    Infeasible { best_residual: f64 },
}

impl MultiplierSearch {
    pub fn multiplier(&self) -> Option<&Multiplier> {
        match self {
            MultiplierSearch::Found { multiplier, .. } => Some(multiplier),
            MultiplierSearch::Infeasible { .. } => None,
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            MultiplierSearch::Found { residual, .. } => *residual,
            MultiplierSearch::Infeasible { best_residual } => *best_residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abnormality {
    NormalFound,
    AbnormalFound,
    BothFound,
    NoneFound,
}

impl Abnormality {
    pub fn as_str(self) -> &'static str {
        match self {
            Abnormality::NormalFound => "normal-found",
            Abnormality::AbnormalFound => "abnormal-found",
            Abnormality::BothFound => "both-rays-found",
            Abnormality::NoneFound => "none-found",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub result: MultiplierSearch,
    pub abnormality: Abnormality,
    /// Dimension of the equality null space (0 means the least-squares ray was used).
    pub null_dim: usize,
    pub equality_rows: usize,
    pub inequality_rows: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum LambdaMode {
    Free,
    Positive,
    Zero,
}

struct System<'a> {
    spec: &'a ProblemSpec,
    traj: &'a SpaceTimeTrajectory,
    basis: AdjointBasis,
    nodes: Vec<usize>,
    eq: Vec<Vec<f64>>,
    ineq: Vec<Vec<f64>>,
    resolution: usize,
}

impl System<'_> {
    fn dim(&self) -> usize {
        self.spec.n + 2
    }

    fn multiplier(&self, z: &[f64]) -> Multiplier {
        let n = self.spec.n;
        self.basis.multiplier(z[0], &z[1..=n], z[n + 1])
    }

    /// Coefficients of `H(w0, w, a)` at node `k` as a linear form in `z`.
    fn h_row(&self, k: usize, w0: f64, w: &[f64], a: usize) -> Result<Vec<f64>> {
        let x = self.traj.y(k);
        let fe = self.spec.fe(x, w0, w, a)?;
        let le = self.spec.le(x, w0, w, a)?;
        let mut row = Vec::with_capacity(self.dim());
        row.push(w0);
        for r in &self.basis.rows {
            row.push(linalg::dot(&r[k], &fe));
        }
        row.push(linalg::dot(&self.basis.forced[k], &fe) - le);
        Ok(row)
    }

    /// `max(equality residuals, inequality violations)` with the exact
    /// Hamiltonian maximization at the sampled nodes.
    fn residual(&self, z: &[f64], mode: LambdaMode, margin: f64) -> Result<f64> {
        let n = self.spec.n;
        let mut r = 0.0f64;
        for row in &self.eq {
            r = r.max(libm::fabs(linalg::dot(row, z)));
        }
        let lambda = z[n + 1];
        r = r.max(-lambda);
        match mode {
            LambdaMode::Positive => r = r.max(margin - lambda),
            LambdaMode::Zero => r = r.max(libm::fabs(lambda)),
            LambdaMode::Free => {}
        }
        let m = self.multiplier(z);
        r = r.max(transversality_defect(self.spec, self.traj, &m)?);
        for &k in &self.nodes {
            let best = maximize_hamiltonian(self.spec, self.traj.y(k), &m.at(k), self.resolution)?;
            r = r.max(best.value);
        }
        Ok(r)
    }

    /// Cheap proxy: violation of the sampled linear inequality rows.
    fn proxy(&self, z: &[f64], mode: LambdaMode, margin: f64) -> f64 {
        let n = self.spec.n;
        let mut r = self.ineq.iter().map(|row| linalg::dot(row, z)).fold(0.0, f64::max);
        if mode == LambdaMode::Positive {
            r = r.max(margin - z[n + 1]);
        }
        r
    }
}

fn sampled_nodes(traj: &SpaceTimeTrajectory, count: usize) -> Vec<usize> {
    let steps = traj.steps();
    let count = count.max(2);
    let mut nodes: Vec<usize> = (0..count).map(|i| (i * steps + (count - 1) / 2) / (count - 1)).collect();
    nodes.push(steps);
    nodes.extend(traj.breakpoint_nodes());
    nodes.sort_unstable();
    nodes.dedup();
    nodes.retain(|k| *k <= steps);
    nodes
}

/// Unit directions in `C` used for the linear impulse rows.
fn impulse_samples(spec: &ProblemSpec, count: u64) -> Vec<Vec<f64>> {
    let m = spec.m();
    let mut dirs = spec.cone.rays();
    if m == 0 {
        return dirs;
    }
    for i in 0..count {
        let mut u = sampling::sphere_point(i + 1, m);
        if spec.m2 > 0 {
            let (c2, _) = linalg::project_onto_cone(&u[spec.m1..], &spec.cone.c2_generators);
            u.truncate(spec.m1);
            u.extend(c2);
        }
        let nu = linalg::norm(&u);
        if nu > 1e-12 {
            dirs.push(u.iter().map(|v| v / nu).collect());
        }
    }
    dirs
}

fn build_system<'a>(spec: &'a ProblemSpec, traj: &'a SpaceTimeTrajectory, cfg: &SearchConfig) -> Result<System<'a>> {
    let basis = AdjointBasis::new(spec, traj)?;
    let nodes = sampled_nodes(traj, cfg.sample_nodes);
    let mut sys = System {
        spec,
        traj,
        basis,
        nodes,
        eq: Vec::new(),
        ineq: Vec::new(),
        resolution: cfg.resolution,
    };
    let n = spec.n;
    let dim = sys.dim();

    let mut sampled = vec![false; traj.steps() + 1];
    for &k in &sys.nodes {
        sampled[k] = true;
    }
    for (k, piece) in sites(traj) {
        if !sampled[k] {
            continue;
        }
        let p = &traj.control.pieces[piece];
        let row = sys.h_row(k, p.w0, &p.w, p.a)?;
        sys.eq.push(row);
    }

    // (p0 + λψ_t, p̄ + λψ_x)·γ ≥ 0 for each generator; opposite pairs become equalities.
    let last = traj.steps();
    let (dt, dx) = spec.psi_grad(traj.y0(last), traj.y(last))?;
    let gens = spec.target.cone_generators(n);
    for (j, g) in gens.iter().enumerate() {
        let mut row = vec![0.0; dim];
        row[0] = g[0];
        row[1..=n].copy_from_slice(&g[1..]);
        row[n + 1] = g[0] * dt + linalg::dot(&g[1..], &dx);
        let paired = gens.iter().enumerate().any(|(i, h)| {
            i != j && h.iter().zip(g).all(|(a, b)| libm::fabs(a + b) <= 1e-12 * (1.0 + libm::fabs(*b)))
        });
        if paired {
            sys.eq.push(row);
        } else {
            sys.ineq.push(row.iter().map(|v| -v).collect());
        }
    }

    if cfg.higher_order {
        let mut fields = Vec::new();
        for g in spec.g.iter().take(spec.m1) {
            fields.push(g.clone());
        }
        for b in &cfg.brackets {
            fields.push(b.field(spec, 0)?);
        }
        for &k in &sys.nodes {
            let x = traj.y(k);
            for f in &fields {
                let v = f.eval(x)?;
                let mut row = vec![0.0; dim];
                for (i, r) in sys.basis.rows.iter().enumerate() {
                    row[1 + i] = linalg::dot(&r[k], &v);
                }
                row[n + 1] = linalg::dot(&sys.basis.forced[k], &v);
                sys.eq.push(row);
            }
        }
    }

    let m = spec.m();
    let zero = vec![0.0; m];
    let dirs = impulse_samples(spec, 16);
    let res = cfg.resolution.max(1);
    for &k in &sys.nodes {
        for a in 0..spec.control_set.len() {
            let row = sys.h_row(k, 1.0, &zero, a)?;
            sys.ineq.push(row);
        }
        for u in &dirs {
            let row = sys.h_row(k, 0.0, u, 0)?;
            sys.ineq.push(row);
            for j in 1..res {
                let theta = j as f64 / res as f64;
                let w: Vec<f64> = u.iter().map(|v| (1.0 - theta) * v).collect();
                for a in 0..spec.control_set.len() {
                    let row = sys.h_row(k, theta, &w, a)?;
                    sys.ineq.push(row);
                }
            }
        }
    }
    let mut lam = vec![0.0; dim];
    lam[n + 1] = -1.0;
    sys.ineq.push(lam);
    Ok(sys)
}

/// Unit vector minimizing `‖Az‖` by inverse iteration on `AᵀA`.
fn least_singular_vector(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut g = Matrix::zeros(dim, dim);
    for r in rows {
        let nr = linalg::norm(r);
        if nr == 0.0 {
            continue;
        }
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] += r[i] * r[j] / (nr * nr);
            }
        }
    }
    let trace: f64 = (0..dim).map(|i| g[(i, i)]).sum();
    let shift = 1e-12 * trace.max(1e-300);
    for i in 0..dim {
        g[(i, i)] += shift;
    }
    let mut v = sampling::sphere_point(7, dim);
    for _ in 0..60 {
        let Some(next) = linalg::solve(&g, &v) else { break };
        let nn = linalg::norm(&next);
        if !(nn > 0.0) || !nn.is_finite() {
            break;
        }
        v = next.iter().map(|x| x / nn).collect();
    }
    v
}

fn combine(basis: &[Vec<f64>], c: &[f64], dim: usize) -> Vec<f64> {
    let mut z = vec![0.0; dim];
    for (b, ci) in basis.iter().zip(c) {
        linalg::axpy(*ci, b, &mut z);
    }
    let nz = linalg::norm(&z);
    if nz > 0.0 {
        z.iter_mut().for_each(|v| *v /= nz);
    }
    z
}

fn search(sys: &System<'_>, basis: &[Vec<f64>], cfg: &SearchConfig, mode: LambdaMode) -> Result<(Vec<f64>, f64)> {
    let dim = sys.dim();
    let d = basis.len();
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    let push = |c: Vec<f64>, candidates: &mut Vec<(f64, Vec<f64>)>| {
        let z = combine(basis, &c, dim);
        candidates.push((sys.proxy(&z, mode, cfg.lambda_margin), c));
    };
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; d];
            c[i] = s;
            push(c, &mut candidates);
        }
    }
    if d > 1 {
        for i in 0..cfg.sphere_samples as u64 {
            push(sampling::sphere_point(i + 1, d), &mut candidates);
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    candidates.truncate(4);

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (_, mut c) in candidates {
        let mut z = combine(basis, &c, dim);
        let mut r = sys.residual(&z, mode, cfg.lambda_margin)?;
        let mut step = 0.25;
        let mut iters = 0;
        while d > 1 && step > 1e-13 && iters < cfg.refine_iters && r > 0.0 {
            let mut improved = false;
            for i in 0..d {
                for s in [step, -step] {
                    iters += 1;
                    let mut trial = c.clone();
                    trial[i] += s;
                    let zt = combine(basis, &trial, dim);
                    let rt = sys.residual(&zt, mode, cfg.lambda_margin)?;
                    if rt < r {
                        (c, z, r) = (trial, zt, rt);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(_, br)| r < *br) {
            best = Some((z, r));
        }
    }
    Ok(best.unwrap_or((vec![0.0; dim], f64::INFINITY)))
}

fn run(sys: &System<'_>, cfg: &SearchConfig, mode: LambdaMode) -> Result<(MultiplierSearch, usize)> {
    let n = sys.spec.n;
    let dim = sys.dim();
    let mut eq = sys.eq.clone();
    if mode == LambdaMode::Zero {
        let mut row = vec![0.0; dim];
        row[n + 1] = 1.0;
        eq.push(row);
    }
    let mut basis = linalg::null_space(&eq, dim, cfg.pivot_tol);
    let null_dim = basis.len();
    if basis.is_empty() {
        basis.push(least_singular_vector(&eq, dim));
    }
    let (mut z, mut r) = search(sys, &basis, cfg, mode)?;
    if r <= cfg.tol && z[n + 1] < 0.0 {
        z[n + 1] = 0.0;
        let nz = linalg::norm(&z);
        z.iter_mut().for_each(|v| *v /= nz);
        r = sys.residual(&z, mode, cfg.lambda_margin)?;
    }
    let out = if r <= cfg.tol {
        MultiplierSearch::Found {
            multiplier: sys.multiplier(&z),
            residual: r,
        }
    } else {
        MultiplierSearch::Infeasible { best_residual: r }
    };
    Ok((out, null_dim))
}

/// Searches for a unit multiplier with `π = 0` satisfying the first order
/// conditions (and the higher order ones when configured), then repeats the
/// search with `λ = 0` and with `λ > 0` to classify abnormality.
pub fn find_multiplier(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let last = traj.steps();
    if traj.beta(last) >= spec.budget {
        return Err(Error::HypothesisViolated(format!(
            "total variation {} reaches the budget {}; the search covers the pi = 0 branch only",
            traj.beta(last),
            spec.budget
        )));
    }
    let sys = build_system(spec, traj, cfg)?;
    let (result, null_dim) = run(&sys, cfg, LambdaMode::Free)?;
    let (normal, _) = run(&sys, cfg, LambdaMode::Positive)?;
    let (abnormal, _) = run(&sys, cfg, LambdaMode::Zero)?;
    let abnormality = match (normal.multiplier().is_some(), abnormal.multiplier().is_some()) {
        (true, true) => Abnormality::BothFound,
        (true, false) => Abnormality::NormalFound,
        (false, true) => Abnormality::AbnormalFound,
        (false, false) => Abnormality::NoneFound,
    };
    Ok(SearchOutcome {
        result,
        abnormality,
        null_dim,
        equality_rows: sys.eq.len(),
        inequality_rows: sys.ineq.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{check_first_order, check_higher_order, Tolerances};
    use crate::control::{ControlPiece, SpaceTimeControl};
    use crate::expr::Expr;
    use crate::field::VectorField;
    use crate::integrate::{integrate_extended, IntegratorConfig};
    use crate::problem::fixtures::scalar_jump;
    use crate::problem::{ProblemData, Target};

    fn jump_traj(spec: &ProblemSpec) -> SpaceTimeTrajectory {
        let ctrl = SpaceTimeControl::new(vec![ControlPiece::new(1.0, 0.0, vec![1.0], 0)]).unwrap();
        integrate_extended(spec, &ctrl, &IntegratorConfig::with_step(0.05)).unwrap()
    }

    fn drift_problem() -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 1,
            m1: 0,
            q: 1,
            f: VectorField::parse(&["a1"]).unwrap(),
            g: vec![],
            control_set: vec![vec![-1.0], vec![1.0]],
            l0: Expr::parse("0").unwrap(),
            lhat1: Expr::parse("0").unwrap(),
            psi: Expr::parse("x1").unwrap(),
            c2_generators: vec![],
            target: Target {
                rows: vec![vec![1.0, 0.0]],
                rhs: vec![1.0],
                gamma: vec![vec![0.0, 1.0], vec![0.0, -1.0]],
            },
            budget: f64::INFINITY,
            xcheck: vec![0.0],
        })
        .unwrap()
    }

    fn drift_traj(spec: &ProblemSpec, a: usize) -> SpaceTimeTrajectory {
        let ctrl = SpaceTimeControl::new(vec![ControlPiece::new(1.0, 1.0, vec![], a)]).unwrap();
        integrate_extended(spec, &ctrl, &IntegratorConfig::with_step(0.05)).unwrap()
    }

    #[test]
    fn scalar_jump_ray() {
        let spec = scalar_jump();
        let traj = jump_traj(&spec);
        let out = find_multiplier(&spec, &traj, &SearchConfig::default()).unwrap();
        let m = out.result.multiplier().expect("found").clone();
        let r = libm::sqrt(0.5);
        assert!((m.p0 + r).abs() < 1e-10 && (m.lambda - r).abs() < 1e-10, "{m:?}");
        assert!(m.p.iter().all(|p| p[0].abs() < 1e-12));
        assert!(out.result.residual() <= 1e-8);
        assert!((m.terminal_norm() - 1.0).abs() < 1e-12);
        assert_eq!(out.abnormality, Abnormality::NormalFound);
        let tol = Tolerances::default();
        assert!(check_first_order(&spec, &traj, &m, &tol).unwrap().passed());
        assert!(check_higher_order(&spec, &traj, &m, &[], &tol).unwrap().passed());
    }

    #[test]
    fn classical_drift_multiplier() {
        let spec = drift_problem();
        let traj = drift_traj(&spec, 0);
        let out = find_multiplier(&spec, &traj, &SearchConfig::default()).unwrap();
        let m = out.result.multiplier().expect("found").clone();
        let s = 1.0 / libm::sqrt(3.0);
        // p(S) = −λ∇Ψ and H = p0 + p·a vanishes along a = −1
        assert!((m.lambda - s).abs() < 1e-10);
        assert!((m.terminal_p()[0] + s).abs() < 1e-10);
        assert!((m.p0 + s).abs() < 1e-10);
        assert!(m.pi == 0.0 && m.lambda >= 0.0);
    }

    #[test]
    fn suboptimal_drift_is_infeasible() {
        let spec = drift_problem();
        let traj = drift_traj(&spec, 1);
        let out = find_multiplier(&spec, &traj, &SearchConfig::default()).unwrap();
        match out.result {
            MultiplierSearch::Infeasible { best_residual } => assert!(best_residual > 1e-3),
            other => panic!("{other:?}"),
        }
        assert_eq!(out.abnormality, Abnormality::NoneFound);
    }

    #[test]
    fn budget_exhausted_is_rejected() {
        let spec = scalar_jump();
        let ctrl = SpaceTimeControl::new(vec![ControlPiece::new(2.0, 0.0, vec![1.0], 0)]).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &IntegratorConfig::with_step(0.1)).unwrap();
        assert!(matches!(
            find_multiplier(&spec, &traj, &SearchConfig::default()),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn least_singular_vector_finds_kernel() {
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0 + 1e-9]];
        let v = least_singular_vector(&rows, 3);
        assert!(linalg::dot(&rows[0], &v).abs() < 1e-8 && linalg::dot(&rows[1], &v).abs() < 1e-8);
    }
}
