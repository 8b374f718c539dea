//! Vector fields built from [`Expr`] components, Jacobians and Lie brackets.
//!
//! Bracket convention: `[F, G] = DG·F − DF·G`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bracket::FormalBracket;
use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::linalg::Matrix;

/// Declared differentiability class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothness {
    Finite(u32),
    #[default]
    Infinite,
}

impl Smoothness {
    pub fn at_least(self, order: u32) -> bool {
        match self {
            Smoothness::Finite(k) => k >= order,
            Smoothness::Infinite => true,
        }
    }

    fn minus(self, d: u32) -> Smoothness {
        match self {
            Smoothness::Finite(k) => Smoothness::Finite(k.saturating_sub(d)),
            Smoothness::Infinite => Smoothness::Infinite,
        }
    }

    fn min(self, other: Smoothness) -> Smoothness {
        match (self, other) {
            (Smoothness::Finite(a), Smoothness::Finite(b)) => Smoothness::Finite(a.min(b)),
            (Smoothness::Finite(a), _) | (_, Smoothness::Finite(a)) => Smoothness::Finite(a),
            _ => Smoothness::Infinite,
        }
    }

    /// Declared order as a number; `u32::MAX` for `Infinite`.
    pub fn order(self) -> u32 {
        match self {
            Smoothness::Finite(k) => k,
            Smoothness::Infinite => u32::MAX,
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(k) => write!(f, "C^{k}"),
            Smoothness::Infinite => f.write_str("C^inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    smoothness: Smoothness,
}

impl VectorField {
    pub fn new(components: Vec<Expr>, smoothness: Smoothness) -> Self {
        let n = components.len();
        let jacobian = components
            .iter()
            .map(|c| (0..n).map(|j| c.diff(Var::X(j))).collect())
            .collect();
        VectorField {
            components,
            jacobian,
            smoothness,
        }
    }

    pub fn parse(components: &[&str]) -> Result<Self> {
        let cs = components.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        Ok(VectorField::new(cs, Smoothness::Infinite))
    }

    pub fn constant(v: &[f64]) -> Self {
        VectorField::new(v.iter().map(|c| Expr::constant(*c)).collect(), Smoothness::Infinite)
    }

    pub fn zero(n: usize) -> Self {
        VectorField::constant(&alloc::vec![0.0; n])
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn jacobian_exprs(&self) -> &[Vec<Expr>] {
        &self.jacobian
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_ctx(&EvalContext::state(x))
    }

    pub fn eval_ctx(&self, ctx: &EvalContext<'_>) -> Result<Vec<f64>> {
        check_dim(self.dim(), ctx.x.len())?;
        self.components.iter().map(|c| c.eval(ctx)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.jacobian_ctx(&EvalContext::state(x))
    }

    pub fn jacobian_ctx(&self, ctx: &EvalContext<'_>) -> Result<Matrix> {
        let n = self.dim();
        check_dim(n, ctx.x.len())?;
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.jacobian.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                m[(i, j)] = e.eval(ctx)?;
            }
        }
        Ok(m)
    }

    /// True when no component depends on the state.
    pub fn is_state_independent(&self) -> bool {
        self.jacobian.iter().flatten().all(|e| e.is_zero())
    }

    /// Symbolic bracket field `[self, other]`.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField> {
        let n = self.dim();
        check_dim(n, other.dim())?;
        let comps = (0..n)
            .map(|i| {
                let mut acc = Expr::zero();
                for j in 0..n {
                    let t1 = other.jacobian[i][j].mul(&self.components[j]);
                    let t2 = self.jacobian[i][j].mul(&other.components[j]);
                    acc = acc.add(&t1).sub(&t2);
                }
                acc
            })
            .collect();
        let s = self.smoothness.min(other.smoothness).minus(1);
        Ok(VectorField::new(comps, s))
    }

    pub fn component_strings(&self) -> Vec<String> {
        self.components.iter().map(|c| format!("{c}")).collect()
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Numeric bracket `DG(x)·F(x) − DF(x)·G(x)`.
pub fn lie_bracket(f: &VectorField, g: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    lie_bracket_ctx(f, g, &EvalContext::state(x))
}

pub fn lie_bracket_ctx(f: &VectorField, g: &VectorField, ctx: &EvalContext<'_>) -> Result<Vec<f64>> {
    check_dim(f.dim(), g.dim())?;
    let fv = f.eval_ctx(ctx)?;
    let gv = g.eval_ctx(ctx)?;
    let dg = g.jacobian_ctx(ctx)?.mul_vec(&fv);
    let df = f.jacobian_ctx(ctx)?.mul_vec(&gv);
    Ok(dg.iter().zip(&df).map(|(a, b)| a - b).collect())
}

/// Binding of bracket variables `X_j` to field indices (0-based into `g`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldAssignment(pub BTreeMap<u32, usize>);

impl FieldAssignment {
    /// `X_j ↦ g_j` for every leaf of `b`.
    pub fn identity(b: &FormalBracket) -> Self {
        FieldAssignment(b.seq().into_iter().map(|j| (j, j as usize - 1)).collect())
    }

    /// Binds the leaves of `b`, in order, to the given 0-based field indices.
    pub fn from_seq(b: &FormalBracket, fields: &[usize]) -> Result<Self> {
        let seq = b.seq();
        if seq.len() != fields.len() {
            return Err(Error::DimensionMismatch {
                expected: seq.len(),
                found: fields.len(),
            });
        }
        Ok(FieldAssignment(seq.into_iter().zip(fields.iter().copied()).collect()))
    }

    pub fn get(&self, j: u32) -> Option<usize> {
        self.0.get(&j).copied()
    }

    /// 1-based field indices in leaf order, e.g. `1,2,1`.
    pub fn seq_string(&self) -> String {
        let parts: Vec<String> = self.0.values().map(|i| format!("{}", i + 1)).collect();
        parts.join(",")
    }
}

/// Builds the field `b(σ)` symbolically after the `C^{b+k}` check.
pub fn bracket_field(b: &FormalBracket, sigma: &FieldAssignment, fields: &[VectorField], k: u32) -> Result<VectorField> {
    let req = b.required_smoothness(k);
    for (j, order) in req.iter() {
        let idx = sigma.get(j).ok_or(Error::UnassignedVariable(j))?;
        let field = fields.get(idx).ok_or(Error::UnassignedVariable(j))?;
        if !field.smoothness().at_least(order) {
            return Err(Error::InsufficientSmoothness {
                index: j,
                required: order,
                declared: field.smoothness().order(),
            });
        }
    }
    build(b, sigma, fields)
}

fn build(b: &FormalBracket, sigma: &FieldAssignment, fields: &[VectorField]) -> Result<VectorField> {
    match b {
        FormalBracket::Leaf(j) => {
            let idx = sigma.get(*j).ok_or(Error::UnassignedVariable(*j))?;
            fields.get(idx).cloned().ok_or(Error::UnassignedVariable(*j))
        }
        FormalBracket::Pair(l, r) => build(l, sigma, fields)?.bracket(&build(r, sigma, fields)?),
    }
}

pub fn eval_iterated_bracket(
    b: &FormalBracket,
    sigma: &FieldAssignment,
    fields: &[VectorField],
    x: &[f64],
) -> Result<Vec<f64>> {
    bracket_field(b, sigma, fields, 0)?.eval(x)
}
