//! Piecewise-constant space-time and strict-sense controls.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemSpec;

/// Breakpoints closer than this are treated as equal.
pub const BREAK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPiece {
    pub duration: f64,
    pub w0: f64,
    pub w: Vec<f64>,
    /// Index into the control set `A`.
    pub a: usize,
    /// Rescaling factor; the right-hand side is multiplied by `1 + zeta`.
    pub zeta: f64,
}

impl ControlPiece {
    pub fn new(duration: f64, w0: f64, w: Vec<f64>, a: usize) -> Self {
        ControlPiece {
            duration,
            w0,
            w,
            a,
            zeta: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.w0 + linalg::norm(&self.w)
    }

    fn with_duration(&self, duration: f64) -> Self {
        ControlPiece {
            duration,
            ..self.clone()
        }
    }

    /// Same value as `other` (duration ignored).
    pub fn same_value(&self, other: &ControlPiece) -> bool {
        self.w0 == other.w0 && self.w == other.w && self.a == other.a && self.zeta == other.zeta
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeControl {
    pub pieces: Vec<ControlPiece>,
}

impl SpaceTimeControl {
    pub fn new(pieces: Vec<ControlPiece>) -> Result<Self> {
        for (i, p) in pieces.iter().enumerate() {
            if !(p.duration >= 0.0) || !p.duration.is_finite() {
                return Err(Error::InvalidControl(format!("piece {i} has duration {}", p.duration)));
            }
        }
        if pieces.iter().all(|p| p.duration == 0.0) {
            return Err(Error::InvalidControl("total duration is zero".into()));
        }
        Ok(SpaceTimeControl { pieces })
    }

    /// `n` pieces of length `s_total / n`, values from `sample(k)`.
    pub fn uniform(s_total: f64, n: usize, mut sample: impl FnMut(usize) -> (f64, Vec<f64>, usize)) -> Result<Self> {
        let d = s_total / n as f64;
        let pieces = (0..n)
            .map(|k| {
                let (w0, w, a) = sample(k);
                ControlPiece::new(d, w0, w, a)
            })
            .collect();
        Self::new(pieces)
    }

    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    /// Cumulative breakpoints `0 = s_0 < s_1 < ... < s_N = S`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut s = 0.0;
        out.push(s);
        for p in &self.pieces {
            s += p.duration;
            out.push(s);
        }
        out
    }

    /// Index of the piece active just before `s` (piece 0 at `s = 0`).
    pub fn piece_index_left(&self, s: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            acc += p.duration;
            if s <= acc + BREAK_TOL && p.duration > 0.0 {
                return i;
            }
        }
        self.pieces.len() - 1
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        for p in &self.pieces {
            spec.check_control(p.w0, &p.w, p.a)?;
        }
        Ok(())
    }

    /// Essential infimum of `(1 + zeta)(w0 + |w|)` over pieces of positive length.
    pub fn min_speed(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.duration > 0.0)
            .map(|p| (1.0 + p.zeta) * p.speed())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_canonical(&self, tol: f64) -> bool {
        self.pieces
            .iter()
            .filter(|p| p.duration > 0.0)
            .all(|p| p.zeta == 0.0 && libm::fabs(p.speed() - 1.0) <= tol)
    }

    /// Canonical parameterization: every piece rescaled to unit speed.
    /// An already canonical control is returned unchanged.
    pub fn canonical(&self) -> Result<Self> {
        let min = self.min_speed();
        if !(min > 1e-14) {
            return Err(Error::DegenerateSpeed(min));
        }
        if self.is_canonical(1e-12) {
            return Ok(self.clone());
        }
        let pieces = self
            .pieces
            .iter()
            .filter(|p| p.duration > 0.0)
            .map(|p| {
                let c = (1.0 + p.zeta) * p.speed();
                let k = 1.0 + p.zeta;
                ControlPiece {
                    duration: p.duration * c,
                    w0: p.w0 * k / c,
                    w: p.w.iter().map(|v| v * k / c).collect(),
                    a: p.a,
                    zeta: 0.0,
                }
            })
            .collect();
        Ok(SpaceTimeControl { pieces })
    }

    /// Piecewise-linear change of parameter: on the old interval
    /// `[knots[k], knots[k+1]]` the new parameter runs `factors[k]` times slower,
    /// i.e. durations are divided and rates multiplied by `factors[k]`.
    /// `knots` are the interior breakpoints in old parameter.
    pub fn reparameterize(&self, knots: &[f64], factors: &[f64]) -> Result<Self> {
        if factors.len() != knots.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: knots.len() + 1,
                found: factors.len(),
            });
        }
        if factors.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidControl("reparameterization factors must be positive".into()));
        }
        let mut ctrl = self.clone();
        for &k in knots {
            ctrl = ctrl.split_at(k);
        }
        let mut out = Vec::with_capacity(ctrl.pieces.len());
        let mut s = 0.0;
        for p in &ctrl.pieces {
            let mid = s + 0.5 * p.duration;
            s += p.duration;
            let seg = knots.iter().filter(|&&k| k < mid).count();
            let c = factors[seg];
            out.push(ControlPiece {
                duration: p.duration / c,
                w0: p.w0 * c,
                w: p.w.iter().map(|v| v * c).collect(),
                a: p.a,
                zeta: p.zeta,
            });
        }
        Ok(SpaceTimeControl { pieces: out })
    }

    /// Inserts a breakpoint at `s` (no-op if one is within [`BREAK_TOL`]).
    pub fn split_at(&self, s: f64) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut start = 0.0;
        for p in &self.pieces {
            let end = start + p.duration;
            if s > start + BREAK_TOL && s < end - BREAK_TOL {
                out.push(p.with_duration(s - start));
                out.push(p.with_duration(end - s));
            } else {
                out.push(p.clone());
            }
            start = end;
        }
        SpaceTimeControl { pieces: out }
    }

    /// Pieces covering `[a, b]`, clipped to the window.
    pub fn window(&self, a: f64, b: f64) -> Vec<ControlPiece> {
        let mut out = Vec::new();
        let mut start = 0.0;
        for p in &self.pieces {
            let end = start + p.duration;
            let lo = start.max(a);
            let hi = end.min(b);
            if hi - lo > BREAK_TOL {
                out.push(p.with_duration(hi - lo));
            }
            start = end;
        }
        out
    }

    /// Replaces the restriction to `[a, b]` by `replacement`.
    pub fn replace_window(&self, a: f64, b: f64, replacement: Vec<ControlPiece>) -> Self {
        let s_total = self.total_duration();
        let mut pieces = self.window(0.0, a);
        pieces.extend(replacement.into_iter().filter(|p| p.duration > 0.0));
        pieces.extend(self.window(b, s_total));
        SpaceTimeControl { pieces }
    }

    /// Inverse of [`StrictControl::embed`]; needs `w0 > 0` on every piece.
    pub fn to_strict(&self) -> Result<StrictControl> {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            if p.duration == 0.0 {
                continue;
            }
            if !(p.w0 > 0.0) {
                return Err(Error::InvalidControl(format!("piece {i} is impulsive (w0 = 0)")));
            }
            let k = 1.0 + p.zeta;
            pieces.push(StrictPiece {
                duration: p.duration * p.w0 * k,
                u: p.w.iter().map(|v| v / p.w0).collect(),
                a: p.a,
            });
        }
        Ok(StrictControl { pieces })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrictPiece {
    pub duration: f64,
    pub u: Vec<f64>,
    pub a: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrictControl {
    pub pieces: Vec<StrictPiece>,
}

impl StrictControl {
    pub fn uniform(t_total: f64, n: usize, mut sample: impl FnMut(usize) -> (Vec<f64>, usize)) -> Self {
        let d = t_total / n as f64;
        let pieces = (0..n)
            .map(|k| {
                let (u, a) = sample(k);
                StrictPiece { duration: d, u, a }
            })
            .collect();
        StrictControl { pieces }
    }

    pub fn total_time(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    /// `∫|u| dt`.
    pub fn total_variation(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration * linalg::norm(&p.u)).sum()
    }

    /// Graph-completion embedding with `σ(t) = ∫_0^t (1 + |u|)`:
    /// canonical, `w0 = 1/(1+|u|)`, `w = u/(1+|u|)`.
    pub fn embed(&self) -> SpaceTimeControl {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let c = 1.0 + linalg::norm(&p.u);
                ControlPiece::new(p.duration * c, 1.0 / c, p.u.iter().map(|v| v / c).collect(), p.a)
            })
            .collect();
        SpaceTimeControl { pieces }
    }
}

/// Builds a control from `(duration, w0, w, a)` tuples.
pub fn pieces(spec: &[(f64, f64, Vec<f64>, usize)]) -> Vec<ControlPiece> {
    spec.iter()
        .map(|(d, w0, w, a)| ControlPiece::new(*d, *w0, w.clone(), *a))
        .collect()
}

/// Unit vector `±e_i` in `R^m`.
pub fn signed_unit(m: usize, i: usize, sign: f64) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = sign;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_examples() {
        let zero = StrictControl::uniform(1.0, 4, |_| (vec![0.0], 0)).embed();
        assert!((zero.total_duration() - 1.0).abs() < 1e-15);
        assert!(zero.pieces.iter().all(|p| p.w0 == 1.0 && p.w == vec![0.0]));

        let one = StrictControl::uniform(1.0, 4, |_| (vec![1.0], 0)).embed();
        assert!((one.total_duration() - 2.0).abs() < 1e-15);
        assert!(one.pieces.iter().all(|p| p.w0 == 0.5 && p.w == vec![0.5]));

        let three = StrictControl::uniform(1.0, 4, |_| (vec![3.0], 0)).embed();
        assert!((three.total_duration() - 4.0).abs() < 1e-15);
        assert!(three.pieces.iter().all(|p| p.w0 == 0.25 && p.w == vec![0.75]));
        assert!(three.is_canonical(1e-12));
    }

    #[test]
    fn strict_round_trip() {
        let s = StrictControl::uniform(2.0, 5, |k| (vec![k as f64 - 2.0, 0.5], k % 2));
        let back = s.embed().to_strict().unwrap();
        for (a, b) in s.pieces.iter().zip(&back.pieces) {
            assert!((a.duration - b.duration).abs() < 1e-14);
            assert!(a.u.iter().zip(&b.u).all(|(x, y)| (x - y).abs() < 1e-14));
            assert_eq!(a.a, b.a);
        }
    }

    #[test]
    fn canonicalization() {
        let c = SpaceTimeControl::uniform(1.0, 8, |_| (1.0, vec![1.0], 0)).unwrap();
        let k = c.canonical().unwrap();
        assert!((k.total_duration() - 2.0).abs() < 1e-15);
        assert!(k.pieces.iter().all(|p| p.w0 == 0.5 && p.w == vec![0.5]));
        assert_eq!(k.canonical().unwrap(), k);

        let bad = SpaceTimeControl::uniform(1.0, 2, |_| (0.0, vec![0.0], 0)).unwrap();
        assert!(matches!(bad.canonical(), Err(Error::DegenerateSpeed(_))));
    }

    #[test]
    fn splitting_and_windows() {
        let c = SpaceTimeControl::uniform(1.0, 4, |k| (1.0, vec![k as f64], 0)).unwrap();
        let s = c.split_at(0.3);
        assert_eq!(s.pieces.len(), 5);
        assert_eq!(s.split_at(0.25).pieces.len(), 5);
        let w = c.window(0.2, 0.6);
        assert_eq!(w.len(), 3);
        assert!((w.iter().map(|p| p.duration).sum::<f64>() - 0.4).abs() < 1e-15);
        let r = c.replace_window(0.2, 0.6, vec![ControlPiece::new(0.4, 0.0, vec![1.0], 0)]);
        assert!((r.total_duration() - 1.0).abs() < 1e-15);
        assert_eq!(c.piece_index_left(0.25), 0);
        assert_eq!(c.piece_index_left(0.26), 1);
        assert_eq!(c.piece_index_left(0.0), 0);
    }

    #[test]
    fn reparameterization_scales_rates() {
        let c = SpaceTimeControl::uniform(1.0, 2, |_| (1.0, vec![0.5], 0)).unwrap();
        let r = c.reparameterize(&[0.25], &[2.0, 0.5]).unwrap();
        assert!((r.total_duration() - (0.125 + 1.5)).abs() < 1e-15);
        assert_eq!(r.pieces[0].w0, 2.0);
        assert_eq!(r.pieces[1].w0, 0.5);
    }
}
