//! Pointwise rank conditions and the Kalman test.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::higher_order::BracketSpec;
use super::report::{RankCondition, RankPoint, RankReport};
use super::RANK_TOL;
use crate::bracket::FormalBracket;
use crate::error::{Error, Result};
use crate::expr::EvalContext;
use crate::field::{lie_bracket_ctx, FieldAssignment, VectorField};
use crate::linalg::{self, Matrix};
use crate::problem::ProblemSpec;

/// Every bracket of length `2..=max_len` over `g_1..g_{m1}` that passes the
/// `C^{b+k}` check. Brackets whose two factors coincide (hence vanish) are skipped.
pub fn bracket_pool(spec: &ProblemSpec, max_len: usize, k: u32) -> Vec<BracketSpec> {
    let mut out = Vec::new();
    if spec.m1 == 0 {
        return out;
    }
    for h in 2..=max_len {
        for b in FormalBracket::enumerate(h, 1) {
            let total = spec.m1.pow(h as u32);
            for code in 0..total {
                let mut c = code;
                let fields: Vec<usize> = (0..h)
                    .map(|_| {
                        let f = c % spec.m1;
                        c /= spec.m1;
                        f
                    })
                    .collect();
                let sigma = FieldAssignment::from_seq(&b, &fields).unwrap();
                if trivially_zero(&b, &fields) {
                    continue;
                }
                let bs = BracketSpec { b: b.clone(), sigma };
                if bs.field(spec, k).is_ok() {
                    out.push(bs);
                }
            }
        }
    }
    out
}

fn trivially_zero(b: &FormalBracket, fields: &[usize]) -> bool {
    match b.factorize() {
        Ok((l, r)) => {
            let nl = l.length();
            l.renumbered(1) == r.renumbered(1) && fields[..nl] == fields[nl..]
        }
        Err(_) => false,
    }
}

/// Rank of the columns and a spanning subset picked greedily in column order.
fn rank_with_witness(columns: &[(String, Vec<f64>)], n: usize) -> (usize, Vec<String>) {
    if columns.is_empty() {
        return (0, Vec::new());
    }
    let all: Vec<Vec<f64>> = columns.iter().map(|(_, v)| v.clone()).collect();
    let scale = linalg::singular_values(&Matrix::from_columns(&all)).first().copied().unwrap_or(0.0);
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut witness = Vec::new();
    let mut rank = 0;
    for (label, v) in columns {
        if rank == n {
            break;
        }
        kept.push(v.clone());
        let sv = linalg::singular_values(&Matrix::from_columns(&kept));
        let r = sv.iter().filter(|s| **s > RANK_TOL * scale && **s > 0.0).count();
        if r > rank {
            rank = r;
            witness.push(label.clone());
        } else {
            kept.pop();
        }
    }
    (rank, witness)
}

pub(crate) struct I1Columns(Vec<(String, VectorField)>);

impl I1Columns {
    pub(crate) fn new(spec: &ProblemSpec, pool: &[BracketSpec]) -> Result<Self> {
        let mut cols: Vec<(String, VectorField)> = (0..spec.m1).map(|i| (format!("g{}", i + 1), spec.g[i].clone())).collect();
        for b in pool {
            cols.push((format!("{b}"), b.field(spec, 0)?));
        }
        Ok(I1Columns(cols))
    }

    pub(crate) fn point(&self, x: &[f64]) -> Result<RankPoint> {
        let cols = self
            .0
            .iter()
            .map(|(l, f)| Ok((l.clone(), f.eval(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let (rank, witness) = rank_with_witness(&cols, x.len());
        Ok(RankPoint {
            x: x.to_vec(),
            a: None,
            rank,
            witness,
        })
    }
}

/// `span{B_1..B_r, g_1..g_{m1}}(x) = R^n`.
pub fn rank_i1(spec: &ProblemSpec, x: &[f64], pool: &[BracketSpec]) -> Result<RankReport> {
    let point = I1Columns::new(spec, pool)?.point(x)?;
    Ok(RankReport {
        condition: RankCondition::I1,
        dim: spec.n,
        verdict: point.rank == spec.n,
        points: alloc::vec![point],
    })
}

pub(crate) struct I2Columns {
    plain: Vec<(String, VectorField)>,
    drift: Vec<(String, VectorField)>,
}

impl I2Columns {
    pub(crate) fn new(spec: &ProblemSpec, pool0: &[BracketSpec], pool1: &[BracketSpec]) -> Result<Self> {
        if !spec.f.smoothness().at_least(1) {
            return Err(Error::InsufficientSmoothness {
                index: 0,
                required: 1,
                declared: spec.f.smoothness().order(),
            });
        }
        let mut plain = Vec::new();
        for b in pool0 {
            plain.push((format!("{b}"), b.field(spec, 0)?));
        }
        let mut drift = Vec::new();
        for b in pool1 {
            drift.push((format!("[f,{b}]"), b.field(spec, 1)?));
        }
        for i in 0..spec.m1 {
            plain.push((format!("g{}", i + 1), spec.g[i].clone()));
        }
        for i in 0..spec.m1 {
            let g = &spec.g[i];
            if !g.smoothness().at_least(1) {
                return Err(Error::InsufficientSmoothness {
                    index: i as u32 + 1,
                    required: 1,
                    declared: g.smoothness().order(),
                });
            }
            drift.push((format!("[f,g{}]", i + 1), g.clone()));
        }
        Ok(I2Columns { plain, drift })
    }

    pub(crate) fn point(&self, spec: &ProblemSpec, x: &[f64], a: usize) -> Result<RankPoint> {
        let ctx = EvalContext::with_params(x, &spec.control_set[a]);
        let mut cols = Vec::with_capacity(self.plain.len() + self.drift.len());
        for (l, f) in &self.plain {
            cols.push((l.clone(), f.eval(x)?));
        }
        for (l, b) in &self.drift {
            cols.push((l.clone(), lie_bracket_ctx(&spec.f, b, &ctx)?));
        }
        let (rank, witness) = rank_with_witness(&cols, x.len());
        Ok(RankPoint {
            x: x.to_vec(),
            a: Some(a),
            rank,
            witness,
        })
    }
}

/// Condition (I.2) at `x` for one control value `a`.
pub fn rank_i2(spec: &ProblemSpec, x: &[f64], a: usize, pool0: &[BracketSpec], pool1: &[BracketSpec]) -> Result<RankReport> {
    if a >= spec.control_set.len() {
        return Err(Error::InvalidControl(format!("control index {a} outside A")));
    }
    let point = I2Columns::new(spec, pool0, pool1)?.point(spec, x, a)?;
    Ok(RankReport {
        condition: RankCondition::I2,
        dim: spec.n,
        verdict: point.rank == spec.n,
        points: alloc::vec![point],
    })
}

/// Condition (I.2) at `x` for every `a ∈ A`.
pub fn rank_i2_all(spec: &ProblemSpec, x: &[f64], pool0: &[BracketSpec], pool1: &[BracketSpec]) -> Result<RankReport> {
    let cols = I2Columns::new(spec, pool0, pool1)?;
    let points = (0..spec.control_set.len())
        .map(|a| cols.point(spec, x, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankReport {
        condition: RankCondition::I2,
        dim: spec.n,
        verdict: points.iter().all(|p| p.rank == spec.n),
        points,
    })
}

/// `[E, CE, …, C^{n−1}E]`.
pub fn kalman_matrix(c: &Matrix, e: &Matrix) -> Result<Matrix> {
    let n = c.rows();
    if c.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.cols(),
        });
    }
    if e.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.rows(),
        });
    }
    let mut cols = Vec::with_capacity(n * e.cols());
    let mut block = e.clone();
    for _ in 0..n {
        for j in 0..block.cols() {
            cols.push(block.column(j));
        }
        block = c.mul(&block);
    }
    Ok(Matrix::from_columns(&cols))
}

pub fn kalman_check(c: &Matrix, e: &Matrix) -> Result<RankReport> {
    let k = kalman_matrix(c, e)?;
    let n = c.rows();
    let cols: Vec<(String, Vec<f64>)> = (0..k.cols())
        .map(|j| {
            let power = j / e.cols().max(1);
            let label = match power {
                0 => format!("E[:,{}]", j % e.cols() + 1),
                1 => format!("CE[:,{}]", j % e.cols() + 1),
                p => format!("C^{p}E[:,{}]", j % e.cols() + 1),
            };
            (label, k.column(j))
        })
        .collect();
    let (rank, witness) = rank_with_witness(&cols, n);
    Ok(RankReport {
        condition: RankCondition::Kalman,
        dim: n,
        points: alloc::vec![RankPoint {
            x: Vec::new(),
            a: None,
            rank,
            witness,
        }],
        verdict: rank == n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::problem::{ProblemData, Target};
    use alloc::vec;

    fn problem(n: usize, f: &[&str], g: &[&[&str]]) -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n,
            m1: g.len(),
            q: 0,
            f: VectorField::parse(f).unwrap(),
            g: g.iter().map(|c| VectorField::parse(c).unwrap()).collect(),
            control_set: vec![],
            l0: Expr::parse("1").unwrap(),
            lhat1: Expr::parse("0").unwrap(),
            psi: Expr::parse("0").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 10.0,
            xcheck: vec![0.0; n],
        })
        .unwrap()
    }

    fn xy() -> BracketSpec {
        BracketSpec::identity(FormalBracket::parse("[X1,X2]").unwrap())
    }

    #[test]
    fn i1_examples() {
        let brockett = problem(3, &["0", "0", "0"], &[&["1", "0", "-x2"], &["0", "1", "x1"]]);
        let r = rank_i1(&brockett, &[0.0; 3], &[xy()]).unwrap();
        assert!(r.verdict);
        assert_eq!(r.points[0].rank, 3);
        assert_eq!(r.points[0].witness.len(), 3);
        let r = rank_i1(&brockett, &[0.0; 3], &[]).unwrap();
        assert!(!r.verdict && r.points[0].rank == 2);

        let single = problem(2, &["0", "0"], &[&["1", "0"]]);
        let r = rank_i1(&single, &[0.0; 2], &[]).unwrap();
        assert_eq!((r.points[0].rank, r.verdict), (1, false));

        let full = problem(2, &["0", "0"], &[&["1", "0"], &["0", "1"]]);
        assert!(rank_i1(&full, &[0.3, 0.1], &[]).unwrap().verdict);
    }

    #[test]
    fn i1_scale_invariance() {
        let a = problem(3, &["0", "0", "0"], &[&["1", "0", "-x2"], &["0", "1", "x1"]]);
        let b = problem(3, &["0", "0", "0"], &[&["1", "0", "-x2"], &["0", "-7", "-7*x1"]]);
        assert_eq!(
            rank_i1(&a, &[0.2, 0.1, 0.0], &[xy()]).unwrap().verdict,
            rank_i1(&b, &[0.2, 0.1, 0.0], &[xy()]).unwrap().verdict
        );
    }

    #[test]
    fn i2_examples() {
        // double integrator: [f, g] spans the missing direction
        let lin = problem(2, &["x2", "0"], &[&["0", "1"]]);
        for x in [[0.0, 0.0], [1.0, -2.0]] {
            let r = rank_i2_all(&lin, &x, &[], &[]).unwrap();
            assert!(r.verdict, "{}", r.to_text());
            assert!(!rank_i1(&lin, &x, &[]).unwrap().verdict);
        }
        let brockett = problem(3, &["0", "0", "0"], &[&["1", "0", "-x2"], &["0", "1", "x1"]]);
        assert!(rank_i2(&brockett, &[0.0; 3], 0, &[xy()], &[]).unwrap().verdict);
        assert!(!rank_i2(&brockett, &[0.0; 3], 0, &[], &[]).unwrap().verdict);
    }

    #[test]
    fn kalman_examples() {
        let c = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let e = Matrix::from_columns(&[vec![0.0, 1.0]]);
        let r = kalman_check(&c, &e).unwrap();
        assert!(r.verdict && r.points[0].rank == 2);
        let r = kalman_check(&Matrix::zeros(2, 2), &Matrix::from_columns(&[vec![1.0, 0.0]])).unwrap();
        assert!(!r.verdict && r.points[0].rank == 1);
        let r = kalman_check(&Matrix::from_rows(&[vec![3.0, -1.0], vec![2.0, 0.5]]), &Matrix::identity(2)).unwrap();
        assert!(r.verdict);
        assert!(matches!(
            kalman_check(&Matrix::zeros(2, 3), &Matrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pool_enumeration() {
        let brockett = problem(3, &["0", "0", "0"], &[&["1", "0", "-x2"], &["0", "1", "x1"]]);
        let pool = bracket_pool(&brockett, 3, 0);
        // length 2: (g1,g2), (g2,g1); length 3: 2 shapes × 8 assignments minus trivial ones
        assert_eq!(pool.iter().filter(|b| b.b.length() == 2).count(), 2);
        assert!(pool.iter().all(|b| b.b.length() <= 3));
        assert!(rank_i1(&brockett, &[0.5, -0.5, 1.0], &pool).unwrap().verdict);
    }
}
