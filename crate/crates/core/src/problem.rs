//! Problem data: dynamics, costs, cone, control set, target and budget.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::field::VectorField;
use crate::linalg::{self, Matrix};
use crate::sampling;

/// `C = R^{m1} × cone(c2_generators)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    pub m1: usize,
    pub c2_generators: Vec<Vec<f64>>,
}

impl ConeSpec {
    pub fn full(m1: usize) -> Self {
        ConeSpec {
            m1,
            c2_generators: Vec::new(),
        }
    }

    pub fn m2(&self) -> usize {
        self.c2_generators.first().map_or(0, |g| g.len())
    }

    /// Euclidean distance of `w` from the cone.
    pub fn distance(&self, w: &[f64]) -> f64 {
        if w.len() <= self.m1 {
            return 0.0;
        }
        linalg::distance_to_cone(&w[self.m1..], &self.c2_generators)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        self.distance(w) <= tol * (1.0 + linalg::norm(w))
    }

    /// Unit rays spanning the cone: `±e_i` for `i < m1`, then the `C2` generators.
    pub fn rays(&self) -> Vec<Vec<f64>> {
        let m = self.m1 + self.m2();
        let mut out = Vec::new();
        for i in 0..self.m1 {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; m];
                e[i] = s;
                out.push(e);
            }
        }
        for g in &self.c2_generators {
            let mut e = vec![0.0; self.m1];
            e.extend_from_slice(g);
            out.push(e);
        }
        out
    }

    /// `C2` contains no line: no generator's negative lies in the cone.
    pub fn is_pointed(&self) -> bool {
        self.c2_generators.iter().all(|g| {
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            linalg::distance_to_cone(&neg, &self.c2_generators) > 1e-9
        })
    }
}

/// Affine target `{(t,x) : A_T (t,x) = b_T}` with an approximating cone `Γ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Target {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

impl Target {
    pub fn residual(&self, t: f64, x: &[f64]) -> f64 {
        let mut tx = vec![t];
        tx.extend_from_slice(x);
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| libm::fabs(linalg::dot(r, &tx) - b))
            .fold(0.0, f64::max)
    }

    /// Generators of `Γ` in `R^{1+n}`; a target with no equations and no
    /// generators is the whole space.
    pub fn cone_generators(&self, n: usize) -> Vec<Vec<f64>> {
        if !self.rows.is_empty() || !self.gamma.is_empty() {
            return self.gamma.clone();
        }
        let mut out = Vec::with_capacity(2 * (n + 1));
        for i in 0..=n {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; n + 1];
                e[i] = sign;
                out.push(e);
            }
        }
        out
    }

    /// The time column of `A_T` vanishes and `Γ` contains both time directions.
    pub fn is_time_invariant(&self) -> bool {
        let rows_ok = self.rows.iter().all(|r| r[0] == 0.0);
        let dim = self.rows.first().map(|r| r.len()).or(self.gamma.first().map(|g| g.len()));
        let Some(d) = dim else { return true };
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        rows_ok
            && linalg::distance_to_cone(&e, &self.gamma) < 1e-9
            && linalg::distance_to_cone(&neg, &self.gamma) < 1e-9
    }
}

/// Raw problem description as read from a file or built in code.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub n: usize,
    pub m1: usize,
    pub q: usize,
    /// Drift `f(x, a)`; components may reference `a1..aq`.
    pub f: VectorField,
    pub g: Vec<VectorField>,
    /// Finite control set `A`; with `q = 0` a single empty point.
    pub control_set: Vec<Vec<f64>>,
    pub l0: Expr,
    pub lhat1: Expr,
    pub psi: Expr,
    pub c2_generators: Vec<Vec<f64>>,
    pub target: Target,
    pub budget: f64,
    pub xcheck: Vec<f64>,
}

/// Validated problem with precomputed partial derivatives.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub q: usize,
    pub f: VectorField,
    pub g: Vec<VectorField>,
    pub control_set: Vec<Vec<f64>>,
    pub l0: Expr,
    pub lhat1: Expr,
    pub psi: Expr,
    pub cone: ConeSpec,
    pub target: Target,
    pub budget: f64,
    pub xcheck: Vec<f64>,
    dl0: Vec<Expr>,
    dlhat1: Vec<Expr>,
    dpsi_dt: Expr,
    dpsi_dx: Vec<Expr>,
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationItem {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

/// Facts established by the strengthened hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct Hp1Info {
    /// Constant `c` in `Ψ = c·t + Ψ̂(x)`; zero when `Ψ` is time-independent.
    pub time_rate: f64,
    /// Smallest sampled running cost (including `c`).
    pub min_cost: f64,
}

fn dim_err(expected: usize, found: usize) -> Error {
    Error::DimensionMismatch { expected, found }
}

impl ProblemSpec {
    pub fn new(d: ProblemData) -> Result<Self> {
        let n = d.n;
        if n == 0 {
            return Err(Error::InvalidProblem("n must be positive".to_string()));
        }
        if d.f.dim() != n {
            return Err(dim_err(n, d.f.dim()));
        }
        for g in &d.g {
            if g.dim() != n {
                return Err(dim_err(n, g.dim()));
            }
        }
        if d.xcheck.len() != n {
            return Err(dim_err(n, d.xcheck.len()));
        }
        let m = d.g.len();
        if d.m1 > m {
            return Err(Error::InvalidProblem(format!("m1 = {} exceeds the {m} control fields", d.m1)));
        }
        let m2 = m - d.m1;
        let mut gens = Vec::new();
        for gen in &d.c2_generators {
            if gen.len() != m2 {
                return Err(dim_err(m2, gen.len()));
            }
            let nr = linalg::norm(gen);
            if nr == 0.0 {
                return Err(Error::InvalidProblem("zero cone generator".to_string()));
            }
            gens.push(gen.iter().map(|v| v / nr).collect::<Vec<f64>>());
        }
        if m2 > 0 && gens.is_empty() {
            return Err(Error::InvalidProblem(format!("{m2} cone fields but no C2 generators")));
        }
        let control_set = if d.control_set.is_empty() && d.q == 0 {
            vec![Vec::new()]
        } else {
            d.control_set.clone()
        };
        if control_set.is_empty() {
            return Err(Error::InvalidProblem("empty control set".to_string()));
        }
        for a in &control_set {
            if a.len() != d.q {
                return Err(dim_err(d.q, a.len()));
            }
        }
        for r in d.target.rows.iter().chain(&d.target.gamma) {
            if r.len() != n + 1 {
                return Err(dim_err(n + 1, r.len()));
            }
        }
        if d.target.rows.len() != d.target.rhs.len() {
            return Err(dim_err(d.target.rows.len(), d.target.rhs.len()));
        }
        if !(d.budget > 0.0) {
            return Err(Error::InvalidProblem("budget K must be positive".to_string()));
        }
        let check_vars = |name: &str, e: &Expr, allowed: &dyn Fn(Var) -> bool| -> Result<()> {
            for v in e.variables() {
                if !allowed(v) {
                    return Err(Error::InvalidProblem(format!("{name} may not reference {v}")));
                }
            }
            Ok(())
        };
        let q = d.q;
        let state = |v: Var| matches!(v, Var::X(i) if i < n);
        for (i, c) in d.f.components().iter().enumerate() {
            check_vars(&format!("f.{}", i + 1), c, &|v| state(v) || matches!(v, Var::A(k) if k < q))?;
        }
        for (j, g) in d.g.iter().enumerate() {
            for (i, c) in g.components().iter().enumerate() {
                check_vars(&format!("g{}.{}", j + 1, i + 1), c, &state)?;
            }
        }
        check_vars("l0", &d.l0, &|v| state(v) || matches!(v, Var::A(k) if k < q))?;
        check_vars("lhat1", &d.lhat1, &|v| state(v) || v == Var::W0 || matches!(v, Var::W(i) if i < m))?;
        check_vars("Psi", &d.psi, &|v| state(v) || v == Var::T)?;

        let dx = |e: &Expr| (0..n).map(|i| e.diff(Var::X(i))).collect::<Vec<_>>();
        Ok(ProblemSpec {
            n,
            m1: d.m1,
            m2,
            q,
            dl0: dx(&d.l0),
            dlhat1: dx(&d.lhat1),
            dpsi_dt: d.psi.diff(Var::T),
            dpsi_dx: dx(&d.psi),
            f: d.f,
            g: d.g,
            control_set,
            l0: d.l0,
            lhat1: d.lhat1,
            psi: d.psi,
            cone: ConeSpec {
                m1: d.m1,
                c2_generators: gens,
            },
            target: d.target,
            budget: d.budget,
            xcheck: d.xcheck,
        })
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    /// The raw description this problem was built from.
    pub fn to_data(&self) -> ProblemData {
        ProblemData {
            n: self.n,
            m1: self.m1,
            q: self.q,
            f: self.f.clone(),
            g: self.g.clone(),
            control_set: self.control_set.clone(),
            l0: self.l0.clone(),
            lhat1: self.lhat1.clone(),
            psi: self.psi.clone(),
            c2_generators: self.cone.c2_generators.clone(),
            target: self.target.clone(),
            budget: self.budget,
            xcheck: self.xcheck.clone(),
        }
    }

    fn ctx<'a>(&'a self, x: &'a [f64], w0: f64, w: &'a [f64], a: usize) -> EvalContext<'a> {
        EvalContext {
            x,
            a: &self.control_set[a],
            w0,
            w,
            t: 0.0,
        }
    }

    pub fn drift(&self, x: &[f64], a: usize) -> Result<Vec<f64>> {
        self.f.eval_ctx(&self.ctx(x, 0.0, &[], a))
    }

    /// `F^e = f(x,a) w0 + Σ g_i(x) w^i`.
    pub fn fe(&self, x: &[f64], w0: f64, w: &[f64], a: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        if w0 != 0.0 {
            linalg::axpy(w0, &self.drift(x, a)?, &mut out);
        }
        for (gi, wi) in self.g.iter().zip(w) {
            if *wi != 0.0 {
                linalg::axpy(*wi, &gi.eval(x)?, &mut out);
            }
        }
        Ok(out)
    }

    /// `ℓ^e = ℓ0(x,a) w0 + ℓ̂1(x, w0, w)`.
    pub fn le(&self, x: &[f64], w0: f64, w: &[f64], a: usize) -> Result<f64> {
        let c = self.ctx(x, w0, w, a);
        let l0 = if w0 != 0.0 { self.l0.eval(&c)? * w0 } else { 0.0 };
        Ok(l0 + self.lhat1.eval(&c)?)
    }

    /// `∂F^e/∂x`.
    pub fn fe_jacobian(&self, x: &[f64], w0: f64, w: &[f64], a: usize) -> Result<Matrix> {
        let mut j = Matrix::zeros(self.n, self.n);
        if w0 != 0.0 {
            j = j.add(&self.f.jacobian_ctx(&self.ctx(x, 0.0, &[], a))?.scale(w0));
        }
        for (gi, wi) in self.g.iter().zip(w) {
            if *wi != 0.0 {
                j = j.add(&gi.jacobian(x)?.scale(*wi));
            }
        }
        Ok(j)
    }

    /// `∂ℓ^e/∂x`.
    pub fn le_grad(&self, x: &[f64], w0: f64, w: &[f64], a: usize) -> Result<Vec<f64>> {
        let c = self.ctx(x, w0, w, a);
        (0..self.n)
            .map(|i| {
                let d0 = if w0 != 0.0 { self.dl0[i].eval(&c)? * w0 } else { 0.0 };
                Ok(d0 + self.dlhat1[i].eval(&c)?)
            })
            .collect()
    }

    /// The extended right-hand side `(w0, F^e, ℓ^e, |w|)` after a cone check.
    pub fn extended_rhs(&self, x: &[f64], w0: f64, w: &[f64], a: usize) -> Result<(f64, Vec<f64>, f64, f64)> {
        self.check_control(w0, w, a)?;
        Ok((w0, self.fe(x, w0, w, a)?, self.le(x, w0, w, a)?, linalg::norm(w)))
    }

    pub fn check_control(&self, w0: f64, w: &[f64], a: usize) -> Result<()> {
        if w.len() != self.m() {
            return Err(dim_err(self.m(), w.len()));
        }
        if a >= self.control_set.len() {
            return Err(Error::InvalidControl(format!("control index {a} outside A")));
        }
        if w0 < 0.0 || !w0.is_finite() {
            return Err(Error::ConeViolation(format!("w0 = {w0} is negative")));
        }
        if !self.cone.contains(w, 1e-9) {
            return Err(Error::ConeViolation(format!(
                "w = {w:?} is at distance {:e} from C",
                self.cone.distance(w)
            )));
        }
        Ok(())
    }

    /// Strict-sense running cost `ℓ0(x,a) + ℓ1(x,u)` with `ℓ1(x,u) = ℓ̂1(x,1,u)`.
    pub fn running_cost(&self, x: &[f64], u: &[f64], a: usize) -> Result<f64> {
        let c = self.ctx(x, 1.0, u, a);
        Ok(self.l0.eval(&c)? + self.lhat1.eval(&c)?)
    }

    pub fn psi_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.psi.eval(&EvalContext {
            x,
            t,
            ..Default::default()
        })
    }

    /// `(∂Ψ/∂t, ∂Ψ/∂x)`.
    pub fn psi_grad(&self, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = EvalContext {
            x,
            t,
            ..Default::default()
        };
        let dt = self.dpsi_dt.eval(&c)?;
        let dx = self.dpsi_dx.iter().map(|e| e.eval(&c)).collect::<Result<Vec<_>>>()?;
        Ok((dt, dx))
    }

    /// True when `ℓ^e` does not depend on the state.
    pub fn cost_is_state_independent(&self) -> bool {
        self.dl0.iter().chain(&self.dlhat1).all(|e| e.is_zero())
    }

    /// Sample points: states in a box around `x̌`, cone directions and scales.
    fn sample_states(&self, count: u64, radius: f64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|k| {
                sampling::halton_box(k, self.n, -radius, radius)
                    .iter()
                    .zip(&self.xcheck)
                    .map(|(d, c)| c + d)
                    .collect()
            })
            .collect()
    }

    fn sample_cone_direction(&self, k: u64) -> Vec<f64> {
        let m = self.m();
        let u = sampling::halton(k + 7, self.m1 + self.cone.c2_generators.len());
        let mut w = vec![0.0; m];
        for i in 0..self.m1 {
            w[i] = 4.0 * u[i] - 2.0;
        }
        for (j, g) in self.cone.c2_generators.iter().enumerate() {
            let c = 2.0 * u[self.m1 + j];
            for (wi, gi) in w[self.m1..].iter_mut().zip(g) {
                *wi += c * gi;
            }
        }
        w
    }

    /// Sampled check that `ℓ̂1` is positively 1-homogeneous in `(w0, w)`.
    pub fn homogeneity_defect(&self, count: u64) -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, x) in self.sample_states(count, 2.0).iter().enumerate() {
            let w = self.sample_cone_direction(k as u64);
            let w0 = sampling::radical_inverse(k as u64 + 3, 7) * 2.0;
            for r in [0.5, 2.5] {
                let rw: Vec<f64> = w.iter().map(|v| r * v).collect();
                let c1 = EvalContext {
                    x,
                    w0,
                    w: &w,
                    ..Default::default()
                };
                let c2 = EvalContext {
                    x,
                    w0: r * w0,
                    w: &rw,
                    ..Default::default()
                };
                let base = self.lhat1.eval(&c1)?;
                let scaled = self.lhat1.eval(&c2)?;
                worst = worst.max(libm::fabs(scaled - r * base) / (1.0 + libm::fabs(r * base)));
            }
        }
        Ok(worst)
    }

    /// Sampled check of `ℓ̂1(·, 0, ·) ≡ 0`.
    pub fn lhat1_vanishes_without_drift(&self) -> bool {
        self.sample_states(64, 2.0).iter().enumerate().all(|(k, x)| {
            let w = self.sample_cone_direction(k as u64);
            let c = EvalContext {
                x,
                w0: 0.0,
                w: &w,
                ..Default::default()
            };
            matches!(self.lhat1.eval(&c), Ok(v) if libm::fabs(v) <= 1e-12)
        })
    }

    /// The standing hypotheses as individual checks.
    pub fn validate(&self) -> Vec<ValidationItem> {
        let mut out = Vec::new();
        let mut push = |name: &str, ok: bool, detail: String| {
            out.push(ValidationItem {
                name: name.to_string(),
                ok,
                detail,
            })
        };
        push(
            "cone_c2_pointed",
            self.cone.is_pointed(),
            format!("{} generators in R^{}", self.cone.c2_generators.len(), self.m2),
        );
        match self.homogeneity_defect(64) {
            Ok(d) => push("lhat1_homogeneous", d <= 1e-10, format!("max relative defect {d:e}")),
            Err(e) => push("lhat1_homogeneous", false, format!("{e}")),
        }
        let gamma_defect = self
            .target
            .gamma
            .iter()
            .flat_map(|g| self.target.rows.iter().map(move |r| libm::fabs(linalg::dot(r, g))))
            .fold(0.0, f64::max);
        push(
            "gamma_tangent_to_target",
            gamma_defect <= 1e-12,
            format!("max |A_T gamma| = {gamma_defect:e}"),
        );
        let mut eval_err = None;
        'outer: for x in self.sample_states(32, 1.0) {
            for a in 0..self.control_set.len() {
                let w0 = 1.0;
                let w = vec![0.0; self.m()];
                if let Err(e) = self.fe(&x, w0, &w, a).and_then(|_| self.fe_jacobian(&x, 1.0, &vec![1.0; self.m()], a)) {
                    eval_err = Some(format!("{e} at x = {x:?}"));
                    break 'outer;
                }
            }
        }
        let ok = eval_err.is_none();
        push(
            "dynamics_evaluable",
            ok,
            eval_err.unwrap_or_else(|| "f, g and Jacobians evaluable near xcheck".to_string()),
        );
        push(
            "lhat1_zero_without_drift",
            self.lhat1_vanishes_without_drift(),
            "sampled lhat1(x,0,w)".to_string(),
        );
        match self.hp1() {
            Ok(info) => push(
                "hp1",
                true,
                format!("time rate {} min running cost {:e}", info.time_rate, info.min_cost),
            ),
            Err(e) => push("hp1", false, format!("{e}")),
        }
        out
    }

    /// Strengthened hypotheses used by the fully impulsive classification.
    ///
    /// A final cost `Ψ = c·t + Ψ̂(x)` with constant `c ≥ 0` is accepted: the time
    /// term equals a running cost `c·w0`, so positivity is checked on
    /// `ℓ0 + c + ℓ1`.
    pub fn hp1(&self) -> Result<Hp1Info> {
        if !self.target.is_time_invariant() {
            return Err(Error::HypothesisViolated(
                "target is not time-invariant (A_T has a time column or Gamma lacks ±e_t)".to_string(),
            ));
        }
        let dt = &self.dpsi_dt;
        let time_rate = match dt.as_const() {
            Some(c) if c >= 0.0 => c,
            _ => {
                return Err(Error::HypothesisViolated(
                    "final cost depends on time other than through a constant non-negative rate".to_string(),
                ))
            }
        };
        if !self.lhat1_vanishes_without_drift() {
            return Err(Error::HypothesisViolated("lhat1(x,0,w) is not identically zero".to_string()));
        }
        let mut min_cost = f64::INFINITY;
        for (k, x) in self.sample_states(128, 2.0).iter().enumerate() {
            let u = self.sample_cone_direction(k as u64);
            for (a, _) in self.control_set.iter().enumerate() {
                for scale in [0.0, 1.0, 10.0] {
                    let us: Vec<f64> = u.iter().map(|v| v * scale).collect();
                    let c = self.running_cost(x, &us, a)? + time_rate;
                    min_cost = min_cost.min(c);
                }
            }
        }
        if !(min_cost > 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "running cost is not strictly positive (sampled minimum {min_cost:e})"
            )));
        }
        Ok(Hp1Info { time_rate, min_cost })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    /// `n = 1`, `f = 0`, `g1 = 1`, `ℓ = 0`, `Ψ = t`, target `x = 1`, `K = 2`.
    pub fn scalar_jump() -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 1,
            m1: 1,
            q: 0,
            f: VectorField::parse(&["0"]).unwrap(),
            g: vec![VectorField::parse(&["1"]).unwrap()],
            control_set: vec![],
            l0: e("0"),
            lhat1: e("0"),
            psi: e("t"),
            c2_generators: vec![],
            target: Target {
                rows: vec![vec![0.0, 1.0]],
                rhs: vec![1.0],
                gamma: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            },
            budget: 2.0,
            xcheck: vec![0.0],
        })
        .unwrap()
    }

    /// A smooth two-dimensional problem with state-dependent data everywhere.
    pub fn smooth() -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 2,
            m1: 1,
            q: 1,
            f: VectorField::parse(&["x2", "-sin(x1) + a1"]).unwrap(),
            g: vec![VectorField::parse(&["1 + 0.2*x2^2", "0.5*x1"]).unwrap()],
            control_set: vec![vec![-1.0], vec![0.0], vec![1.0]],
            l0: e("1 + x1^2"),
            lhat1: e("abs(w1)*(1 + 0.5*x2^2)"),
            psi: e("x1^2 + t"),
            c2_generators: vec![],
            target: Target::default(),
            budget: f64::INFINITY,
            xcheck: vec![0.3, -0.2],
        })
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn extended_rhs_examples() {
        let p = smooth();
        let x = [0.4, 0.7];
        let (w0, fe, le, nw) = p.extended_rhs(&x, 1.0, &[0.0], 2).unwrap();
        assert_eq!(w0, 1.0);
        assert_eq!(fe, p.drift(&x, 2).unwrap());
        assert!((le - (1.0 + 0.16)).abs() < 1e-15);
        assert_eq!(nw, 0.0);

        let j = scalar_jump();
        let (w0, fe, le, nw) = j.extended_rhs(&[0.3], 0.0, &[1.0], 0).unwrap();
        assert_eq!((w0, fe, le, nw), (0.0, vec![1.0], 0.0, 1.0));

        let (a0, af, al, an) = p.extended_rhs(&x, 0.3, &[-0.4], 0).unwrap();
        let (b0, bf, bl, bn) = p.extended_rhs(&x, 2.5 * 0.3, &[2.5 * -0.4], 0).unwrap();
        assert!((b0 - 2.5 * a0).abs() < 1e-10 && (bl - 2.5 * al).abs() < 1e-10 && (bn - 2.5 * an).abs() < 1e-10);
        for i in 0..2 {
            assert!((bf[i] - 2.5 * af[i]).abs() < 1e-10);
        }
        assert!(matches!(p.extended_rhs(&x, -1.0, &[0.0], 0), Err(Error::ConeViolation(_))));
    }

    #[test]
    fn cone_checks() {
        let c = ConeSpec {
            m1: 1,
            c2_generators: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(c.is_pointed());
        assert!(c.contains(&[-5.0, 1.0, 2.0], 1e-12));
        assert!(!c.contains(&[0.0, -1.0, 2.0], 1e-12));
        let line = ConeSpec {
            m1: 0,
            c2_generators: vec![vec![1.0], vec![-1.0]],
        };
        assert!(!line.is_pointed());
    }

    #[test]
    fn validation_of_fixtures() {
        let p = smooth();
        let items = p.validate();
        let get = |n: &str| items.iter().find(|i| i.name == n).unwrap().ok;
        assert!(get("lhat1_homogeneous"));
        assert!(get("cone_c2_pointed"));
        assert!(!get("lhat1_zero_without_drift"));
        assert!(get("dynamics_evaluable"));

        let j = scalar_jump();
        let info = j.hp1().unwrap();
        assert_eq!(info.time_rate, 1.0);
        assert!(j.validate().iter().all(|i| i.ok), "{:?}", j.validate());
    }

    #[test]
    fn non_homogeneous_lagrangian_is_flagged() {
        let mut d = ProblemData {
            n: 1,
            m1: 1,
            q: 0,
            f: VectorField::parse(&["0"]).unwrap(),
            g: vec![VectorField::parse(&["1"]).unwrap()],
            control_set: vec![],
            l0: Expr::parse("1").unwrap(),
            lhat1: Expr::parse("w1^2").unwrap(),
            psi: Expr::parse("x1").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 1.0,
            xcheck: vec![0.0],
        };
        let p = ProblemSpec::new(d.clone()).unwrap();
        assert!(p.homogeneity_defect(16).unwrap() > 1e-3);
        d.lhat1 = Expr::parse("x2*w1").unwrap();
        assert!(matches!(ProblemSpec::new(d), Err(Error::InvalidProblem(_))));
    }
}
