//! Unmaximized and maximized Hamiltonians of the extended problem.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg;
use crate::problem::ProblemSpec;

/// Multiplier values at a single parameter `s`.
#[derive(Debug, Clone, Copy)]
pub struct Costate<'a> {
    pub p0: f64,
    pub p: &'a [f64],
    pub pi: f64,
    pub lambda: f64,
}

impl Costate<'_> {
    pub fn is_zero(&self) -> bool {
        self.p0 == 0.0 && self.pi == 0.0 && self.lambda == 0.0 && self.p.iter().all(|v| *v == 0.0)
    }
}

/// `H = p0·w0 + p·F^e + π|w| − λ·ℓ^e`.
pub fn hamiltonian(spec: &ProblemSpec, x: &[f64], c: &Costate<'_>, w0: f64, w: &[f64], a: usize) -> Result<f64> {
    spec.check_control(w0, w, a)?;
    hamiltonian_unchecked(spec, x, c, w0, w, a)
}

pub(crate) fn hamiltonian_unchecked(
    spec: &ProblemSpec,
    x: &[f64],
    c: &Costate<'_>,
    w0: f64,
    w: &[f64],
    a: usize,
) -> Result<f64> {
    let fe = spec.fe(x, w0, w, a)?;
    let le = if c.lambda != 0.0 { spec.le(x, w0, w, a)? } else { 0.0 };
    Ok(c.p0 * w0 + linalg::dot(c.p, &fe) + c.pi * linalg::norm(w) - c.lambda * le)
}

/// A maximizer of `H` over `W × A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxResult {
    pub value: f64,
    pub w0: f64,
    pub w: Vec<f64>,
    pub a: usize,
}

/// Unit impulse directions tried by the maximization: `±e_i` (`i < m1`), the
/// `C2` generators, and the maximizer of the linear part `p·G w` over unit
/// `w ∈ C`, i.e. `P_C(Gᵀp)/|P_C(Gᵀp)|`.
pub fn impulse_directions(spec: &ProblemSpec, x: &[f64], p: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut dirs = spec.cone.rays();
    let m = spec.m();
    if m == 0 {
        return Ok(dirs);
    }
    let mut gp = Vec::with_capacity(m);
    for g in &spec.g {
        gp.push(linalg::dot(p, &g.eval(x)?));
    }
    let mut proj = gp[..spec.m1].to_vec();
    if spec.m2 > 0 {
        let (c2, _) = linalg::project_onto_cone(&gp[spec.m1..], &spec.cone.c2_generators);
        proj.extend(c2);
    }
    let nr = linalg::norm(&proj);
    if nr > 1e-300 {
        dirs.push(proj.iter().map(|v| v / nr).collect());
    }
    Ok(dirs)
}

/// Maximizes `H` over `W × A`, `W = {w0 + |w| = 1}`.
///
/// Candidates: the drift point and every impulse direction, plus convex blends
/// `(θ, (1−θ)u)` for `θ = k/resolution`.
pub fn maximize_hamiltonian(spec: &ProblemSpec, x: &[f64], c: &Costate<'_>, resolution: usize) -> Result<MaxResult> {
    let m = spec.m();
    let dirs = impulse_directions(spec, x, c.p)?;
    let mut best = MaxResult {
        value: f64::NEG_INFINITY,
        w0: 1.0,
        w: vec![0.0; m],
        a: 0,
    };
    let consider = |w0: f64, w: &[f64], a: usize, best: &mut MaxResult| -> Result<()> {
        let h = hamiltonian_unchecked(spec, x, c, w0, w, a)?;
        if h > best.value {
            *best = MaxResult {
                value: h,
                w0,
                w: w.to_vec(),
                a,
            };
        }
        Ok(())
    };
    let zero = vec![0.0; m];
    for a in 0..spec.control_set.len() {
        consider(1.0, &zero, a, &mut best)?;
    }
    // Impulse values do not depend on a.
    for u in &dirs {
        consider(0.0, u, 0, &mut best)?;
    }
    let res = resolution.max(1);
    for k in 1..res {
        let theta = k as f64 / res as f64;
        for u in &dirs {
            let w: Vec<f64> = u.iter().map(|v| (1.0 - theta) * v).collect();
            for a in 0..spec.control_set.len() {
                consider(theta, &w, a, &mut best)?;
            }
        }
    }
    Ok(best)
}

/// `(H^dr, H^imp)`: maxima over pure drift and over unit impulse directions.
pub fn drift_impulse_hamiltonians(spec: &ProblemSpec, x: &[f64], c: &Costate<'_>) -> Result<(f64, f64)> {
    let m = spec.m();
    let zero = vec![0.0; m];
    let mut hdr = f64::NEG_INFINITY;
    for a in 0..spec.control_set.len() {
        hdr = hdr.max(hamiltonian_unchecked(spec, x, c, 1.0, &zero, a)?);
    }
    let mut himp = f64::NEG_INFINITY;
    for u in impulse_directions(spec, x, c.p)? {
        himp = himp.max(hamiltonian_unchecked(spec, x, c, 0.0, &u, 0)?);
    }
    Ok((hdr, himp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::{scalar_jump, smooth};
    use crate::sampling::SplitMix64;

    fn cs(p0: f64, p: &[f64], pi: f64, lambda: f64) -> Costate<'_> {
        Costate { p0, p, pi, lambda }
    }

    #[test]
    fn hamiltonian_examples() {
        let j = scalar_jump();
        assert_eq!(hamiltonian(&j, &[0.0], &cs(0.0, &[0.0], 0.0, 0.0), 1.0, &[0.0], 0).unwrap(), 0.0);
        assert_eq!(hamiltonian(&j, &[0.0], &cs(-1.0, &[0.0], 0.0, 1.0), 1.0, &[0.0], 0).unwrap(), -1.0);
        let s = smooth();
        let x = [0.2, -0.5];
        let p = [0.3, -1.2];
        let p2 = [0.6, -2.4];
        let h1 = hamiltonian(&s, &x, &cs(0.4, &p, -0.1, 0.7), 0.3, &[0.7], 1).unwrap();
        let h2 = hamiltonian(&s, &x, &cs(0.8, &p2, -0.2, 1.4), 0.3, &[0.7], 1).unwrap();
        assert!((h2 - 2.0 * h1).abs() < 1e-14);
    }

    #[test]
    fn maximization_examples() {
        let j = scalar_jump();
        let r = maximize_hamiltonian(&j, &[0.0], &cs(-1.0, &[0.0], 0.0, 1.0), 4).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.w0, 0.0);
        let z = maximize_hamiltonian(&j, &[0.0], &cs(0.0, &[0.0], 0.0, 0.0), 4).unwrap();
        assert_eq!(z.value, 0.0);
        let e = maximize_hamiltonian(&j, &[0.0], &cs(-10.0, &[1.0], 0.0, 0.0), 4).unwrap();
        assert_eq!((e.value, e.w0, e.w.clone()), (1.0, 0.0, vec![1.0]));
    }

    #[test]
    fn drift_and_impulse_split() {
        let mut d = scalar_jump().to_data();
        d.l0 = crate::expr::Expr::parse("1").unwrap();
        let j = ProblemSpec::new(d).unwrap();
        let (hdr, himp) = drift_impulse_hamiltonians(&j, &[0.0], &cs(-1.0, &[0.0], 0.0, 1.0)).unwrap();
        assert_eq!((hdr, himp), (-2.0, 0.0));
        let (a, b) = drift_impulse_hamiltonians(&j, &[0.0], &cs(0.0, &[0.0], 0.0, 0.0)).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn maximum_dominates_samples_and_matches_split() {
        let s = smooth();
        let mut rng = SplitMix64(41);
        for _ in 0..100 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let p = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let c = cs(rng.uniform(-1.0, 1.0), &p, 0.0, rng.uniform(0.0, 1.0));
            let best = maximize_hamiltonian(&s, &x, &c, 8).unwrap();
            let (hdr, himp) = drift_impulse_hamiltonians(&s, &x, &c).unwrap();
            assert!((best.value - hdr.max(himp)).abs() < 1e-12);
            for _ in 0..10 {
                let w0 = rng.uniform(0.0, 1.0);
                let w = [(1.0 - w0) * if rng.next_f64() < 0.5 { 1.0 } else { -1.0 }];
                let a = (rng.next_u64() % 3) as usize;
                assert!(hamiltonian(&s, &x, &c, w0, &w, a).unwrap() <= best.value + 1e-12);
            }
            let scaled_p = [3.0 * p[0], 3.0 * p[1]];
            let c3 = cs(3.0 * c.p0, &scaled_p, 0.0, 3.0 * c.lambda);
            let best3 = maximize_hamiltonian(&s, &x, &c3, 8).unwrap();
            assert!((best3.value - 3.0 * best.value).abs() < 1e-12);
        }
    }
}
