//! Needle and bracket-like variations of a space-time process.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::adjoint::FundamentalRecord;
use crate::bracket::FormalBracket;
use crate::control::{signed_unit, ControlPiece, SpaceTimeControl, BREAK_TOL};
use crate::error::{Error, Result};
use crate::field::{bracket_field, FieldAssignment};
use crate::integrate::{integrate_rescaled, IntegratorConfig, SpaceTimeTrajectory};
use crate::linalg;
use crate::problem::ProblemSpec;

/// Constant control value `(w0, w, a)` run at rate `1 + zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Needle {
    pub w0: f64,
    pub w: Vec<f64>,
    pub a: usize,
    pub zeta: f64,
}

impl Needle {
    pub fn new(w0: f64, w: Vec<f64>, a: usize, zeta: f64) -> Self {
        Needle { w0, w, a, zeta }
    }

    /// The reference value in force on piece `k` of `ctrl`.
    pub fn from_piece(p: &ControlPiece) -> Self {
        Needle::new(p.w0, p.w.clone(), p.a, p.zeta)
    }

    /// `(w0, w) ∈ W`, `a ∈ A`, `|ζ| ≤ ρ`.
    pub fn check(&self, spec: &ProblemSpec, rho: f64) -> Result<()> {
        spec.check_control(self.w0, &self.w, self.a)?;
        let speed = self.w0 + linalg::norm(&self.w);
        if libm::fabs(speed - 1.0) > 1e-9 {
            return Err(Error::InvalidControl(format!("needle value has w0 + |w| = {speed}")));
        }
        if libm::fabs(self.zeta) > rho {
            return Err(Error::InvalidControl(format!("needle zeta = {} exceeds rho = {rho}", self.zeta)));
        }
        Ok(())
    }

    fn piece(&self, duration: f64) -> ControlPiece {
        ControlPiece {
            duration,
            w0: self.w0,
            w: self.w.clone(),
            a: self.a,
            zeta: self.zeta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariationGenerator {
    Needle(Needle),
    Bracket { b: FormalBracket, sigma: FieldAssignment },
}

impl VariationGenerator {
    /// Exponent `h` of the window size `ε^{1/h}` (1 for needles).
    pub fn order(&self) -> u32 {
        match self {
            VariationGenerator::Needle(_) => 1,
            VariationGenerator::Bracket { b, .. } => b.length() as u32,
        }
    }

    /// Left end of the window `[s̄ − width, s̄]` touched by the variation.
    pub fn window_width(&self, eps: f64) -> f64 {
        match self {
            VariationGenerator::Needle(_) => eps,
            VariationGenerator::Bracket { b, .. } => 2.0 * root(eps, b.length() as u32),
        }
    }
}

/// First-order effect `(v0, v, vℓ, v𝓋)` of a variation on the endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationVector {
    pub v0: f64,
    pub v: Vec<f64>,
    pub vl: f64,
    /// `None` for brackets: their `β` increment is `ε^{1/h}`, not of order `ε`.
    pub vbeta: Option<f64>,
    pub order: u32,
}

impl VariationVector {
    pub fn is_zero(&self) -> bool {
        self.v0 == 0.0 && self.vl == 0.0 && self.v.iter().all(|v| *v == 0.0) && self.vbeta.unwrap_or(0.0) == 0.0
    }

    /// Predicted endpoint deviation `(Δy0, Δy, Δyℓ, Δβ)` at `S̄` for a variation of size `eps`.
    pub fn predicted_deviation(&self, rec: &FundamentalRecord, eps: f64) -> Vec<f64> {
        let m = rec.terminal_matrix();
        let mv = m.mul_vec(&self.v);
        let mut out = Vec::with_capacity(self.v.len() + 3);
        out.push(eps * self.v0);
        out.extend(mv.iter().map(|v| eps * v));
        out.push(eps * (linalg::dot(rec.terminal_mu(), &self.v) + self.vl));
        out.push(match self.vbeta {
            Some(b) => eps * b,
            None => root(eps, self.order),
        });
        out
    }
}

fn root(eps: f64, h: u32) -> f64 {
    if h == 1 {
        eps
    } else {
        libm::pow(eps, 1.0 / h as f64)
    }
}

/// Nearest interior non-breakpoint node to `s`, with the snap distance.
pub fn lebesgue_node(traj: &SpaceTimeTrajectory, s: f64) -> Result<(usize, f64)> {
    let breaks = traj.breakpoint_nodes();
    let best = (1..traj.steps())
        .filter(|k| breaks.binary_search(k).is_err())
        .min_by(|a, b| {
            let da = libm::fabs(traj.nodes[*a] - s);
            let db = libm::fabs(traj.nodes[*b] - s);
            da.partial_cmp(&db).unwrap()
        })
        .ok_or_else(|| Error::GridMismatch("no interior grid point away from control breakpoints".into()))?;
    Ok((best, libm::fabs(traj.nodes[best] - s)))
}

/// Needle vector at node `k`: the difference of the rescaled extended field
/// at `c` and at the reference value, on `ȳ(s_k)`.
pub fn needle_vector(spec: &ProblemSpec, traj: &SpaceTimeTrajectory, c: &Needle, k: usize) -> Result<VariationVector> {
    let reference = &traj.control.pieces[traj.piece_left_of_node(k)];
    let x = traj.y(k);
    let kc = 1.0 + c.zeta;
    let kr = 1.0 + reference.zeta;
    let fe_c = spec.fe(x, c.w0, &c.w, c.a)?;
    let fe_r = spec.fe(x, reference.w0, &reference.w, reference.a)?;
    let le_c = spec.le(x, c.w0, &c.w, c.a)?;
    let le_r = spec.le(x, reference.w0, &reference.w, reference.a)?;
    Ok(VariationVector {
        v0: c.w0 * kc - reference.w0 * kr,
        v: fe_c.iter().zip(&fe_r).map(|(a, b)| a * kc - b * kr).collect(),
        vl: le_c * kc - le_r * kr,
        vbeta: Some(linalg::norm(&c.w) * kc - linalg::norm(&reference.w) * kr),
        order: 1,
    })
}

/// `(0, B(ȳ(s_k)) / r_B^h, 0)` for the bracket `b(σ)` of the impulse fields.
pub fn bracket_vector(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    b: &FormalBracket,
    sigma: &FieldAssignment,
    k: usize,
) -> Result<VariationVector> {
    check_c1(b, sigma, spec.m1)?;
    let h = b.length() as u32;
    if h < 2 {
        return Err(Error::LengthOne);
    }
    let field = bracket_field(b, sigma, &spec.g, 0)?;
    let scale = libm::pow(b.switch_number() as f64, h as f64);
    Ok(VariationVector {
        v0: 0.0,
        v: field.eval(traj.y(k))?.iter().map(|v| v / scale).collect(),
        vl: 0.0,
        vbeta: None,
        order: h,
    })
}

pub fn variation_vector(
    spec: &ProblemSpec,
    traj: &SpaceTimeTrajectory,
    c: &VariationGenerator,
    k: usize,
) -> Result<VariationVector> {
    match c {
        VariationGenerator::Needle(n) => needle_vector(spec, traj, n, k),
        VariationGenerator::Bracket { b, sigma } => bracket_vector(spec, traj, b, sigma, k),
    }
}

fn check_window(s_bar: f64, width: f64, s_total: f64) -> Result<()> {
    if !(width > 0.0) {
        return Err(Error::EpsilonTooLarge(format!("window width {width} is not positive")));
    }
    if !(width < s_bar) || s_bar > s_total + BREAK_TOL {
        return Err(Error::EpsilonTooLarge(format!(
            "window of width {width} ending at {s_bar} does not fit in [0, {s_total}]"
        )));
    }
    Ok(())
}

/// Replaces the control on `[s̄ − ε, s̄]` by the needle value.
pub fn apply_needle(ctrl: &SpaceTimeControl, c: &Needle, s_bar: f64, eps: f64) -> Result<SpaceTimeControl> {
    check_window(s_bar, eps, ctrl.total_duration())?;
    Ok(ctrl.replace_window(s_bar - eps, s_bar, vec![c.piece(eps)]))
}

pub(crate) fn check_c1(b: &FormalBracket, sigma: &FieldAssignment, m1: usize) -> Result<()> {
    for j in b.seq() {
        let field = sigma.get(j).ok_or(Error::UnassignedVariable(j))?;
        if field >= m1 {
            return Err(Error::IndexOutOfC1 {
                leaf: j,
                field: field + 1,
                m1,
            });
        }
    }
    Ok(())
}

fn word(b: &FormalBracket, sigma: &FieldAssignment, t: f64, m: usize, out: &mut Vec<ControlPiece>) {
    match b {
        FormalBracket::Leaf(j) => {
            let i = sigma.get(*j).unwrap();
            out.push(ControlPiece::new(t, 0.0, signed_unit(m, i, 1.0), 0));
        }
        FormalBracket::Pair(l, r) => {
            word(l, sigma, t, m, out);
            word(r, sigma, t, m, out);
            let mut inv = Vec::new();
            word(l, sigma, t, m, &mut inv);
            invert(&mut inv);
            out.extend(inv);
            let mut inv = Vec::new();
            word(r, sigma, t, m, &mut inv);
            invert(&mut inv);
            out.extend(inv);
        }
    }
}

fn invert(pieces: &mut [ControlPiece]) {
    pieces.reverse();
    for p in pieces.iter_mut() {
        p.w.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Group-commutator control of total duration `s` realizing `(s/r_B)^h B` to
/// leading order: `w0 ≡ 0`, values `±e_{σ(j)}`, one piece per unit of switch-number.
pub fn synth_bracket_control(
    b: &FormalBracket,
    sigma: &FieldAssignment,
    s: f64,
    m: usize,
    m1: usize,
) -> Result<Vec<ControlPiece>> {
    if b.length() < 2 {
        return Err(Error::LengthOne);
    }
    check_c1(b, sigma, m1)?;
    let t = s / b.switch_number() as f64;
    let mut out = Vec::with_capacity(b.switch_number() as usize);
    word(b, sigma, t, m, &mut out);
    Ok(out)
}

/// Inverse word: pieces reversed and signs flipped.
pub fn inverse_word(pieces: &[ControlPiece]) -> Vec<ControlPiece> {
    let mut out = pieces.to_vec();
    invert(&mut out);
    out
}

/// Bracket-like variation: with `δ = ε^{1/h}`, the reference control on
/// `[s̄−2δ, s̄]` is run twice as fast on `[s̄−2δ, s̄−δ]` and the bracket word of
/// duration `δ` fills `[s̄−δ, s̄]`.
pub fn apply_bracket_variation(
    ctrl: &SpaceTimeControl,
    b: &FormalBracket,
    sigma: &FieldAssignment,
    s_bar: f64,
    eps: f64,
    m1: usize,
) -> Result<SpaceTimeControl> {
    let h = b.length() as u32;
    let delta = root(eps, h);
    check_window(s_bar, 2.0 * delta, ctrl.total_duration())?;
    let m = ctrl.pieces.first().map(|p| p.w.len()).unwrap_or(0);
    let word = synth_bracket_control(b, sigma, delta, m, m1)?;
    let mut inserted: Vec<ControlPiece> = ctrl
        .window(s_bar - 2.0 * delta, s_bar)
        .into_iter()
        .map(|p| ControlPiece {
            duration: 0.5 * p.duration,
            w0: 2.0 * p.w0,
            w: p.w.iter().map(|v| 2.0 * v).collect(),
            a: p.a,
            zeta: p.zeta,
        })
        .collect();
    inserted.extend(word);
    Ok(ctrl.replace_window(s_bar - 2.0 * delta, s_bar, inserted))
}

/// Applies one variation of size `eps` at `s_bar`.
pub fn apply_variation(
    ctrl: &SpaceTimeControl,
    c: &VariationGenerator,
    s_bar: f64,
    eps: f64,
    m1: usize,
) -> Result<SpaceTimeControl> {
    match c {
        VariationGenerator::Needle(n) => apply_needle(ctrl, n, s_bar, eps),
        VariationGenerator::Bracket { b, sigma } => apply_bracket_variation(ctrl, b, sigma, s_bar, eps, m1),
    }
}

/// One entry of a multiple variation.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSpec {
    pub generator: VariationGenerator,
    pub s_bar: f64,
    pub eps: f64,
}

/// Applies several variations with pairwise disjoint windows, `s̄_1 < … < s̄_N`.
pub fn compose_variations(ctrl: &SpaceTimeControl, entries: &[VariationSpec], m1: usize) -> Result<SpaceTimeControl> {
    for (j, pair) in entries.windows(2).enumerate() {
        let left_end = pair[0].s_bar;
        let right_start = pair[1].s_bar - pair[1].generator.window_width(pair[1].eps);
        if !(left_end < pair[1].s_bar) || right_start < left_end - BREAK_TOL {
            return Err(Error::OverlappingWindows(j + 1));
        }
    }
    let mut out = ctrl.clone();
    for e in entries {
        out = apply_variation(&out, &e.generator, e.s_bar, e.eps, m1)?;
    }
    Ok(out)
}

/// Integrates a perturbed control, allowing whatever rescaling it carries.
pub fn integrate_perturbed(spec: &ProblemSpec, ctrl: &SpaceTimeControl, cfg: &IntegratorConfig) -> Result<SpaceTimeTrajectory> {
    let rho = ctrl.pieces.iter().map(|p| libm::fabs(p.zeta)).fold(0.0, f64::max);
    integrate_rescaled(spec, ctrl, rho, cfg)
}

/// `(Δy0, Δy, Δyℓ, Δβ)` at the final parameter.
pub fn endpoint_deviation(
    spec: &ProblemSpec,
    reference: &SpaceTimeTrajectory,
    perturbed: &SpaceTimeControl,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let t = integrate_perturbed(spec, perturbed, cfg)?;
    Ok(linalg::sub(t.endpoint(), reference.endpoint()))
}

/// Thresholds of the ε-ladder check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderConfig {
    pub slope_threshold: f64,
    pub floor: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            slope_threshold: 1.2,
            floor: 1e-12,
        }
    }
}

/// Default geometric ladder.
pub const DEFAULT_LADDER: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub eps: f64,
    pub deviation: f64,
    pub predicted: f64,
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub rows: Vec<LadderRow>,
    /// `None` when every remainder is below the floor.
    pub slope: Option<f64>,
    pub config: LadderConfig,
    pub pass: bool,
}

/// Fits `log‖deviation − predicted‖` against `log ε`.
pub fn expansion_order_estimate(
    eps: &[f64],
    deviations: &[Vec<f64>],
    predicted: &[Vec<f64>],
    config: LadderConfig,
) -> Result<LadderReport> {
    if eps.len() < 4 {
        return Err(Error::DegenerateLadder(format!("{} points, at least 4 needed", eps.len())));
    }
    if deviations.len() != eps.len() || predicted.len() != eps.len() {
        return Err(Error::DegenerateLadder("sample counts differ".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::DegenerateLadder("non-positive epsilon".into()));
    }
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    if !(hi > lo * (1.0 + 1e-9)) {
        return Err(Error::DegenerateLadder("epsilon values are not distinct".into()));
    }
    let rows: Vec<LadderRow> = (0..eps.len())
        .map(|i| LadderRow {
            eps: eps[i],
            deviation: linalg::norm(&deviations[i]),
            predicted: linalg::norm(&predicted[i]),
            remainder: linalg::norm(&linalg::sub(&deviations[i], &predicted[i])),
        })
        .collect();
    if rows.iter().all(|r| r.remainder <= config.floor) {
        return Ok(LadderReport {
            rows,
            slope: None,
            config,
            pass: true,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| libm::log(r.eps)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| libm::log(r.remainder.max(config.floor))).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(LadderReport {
        rows,
        slope: Some(slope),
        config,
        pass: slope >= config.slope_threshold,
    })
}

/// Runs a single variation over an ε ladder and fits the remainder order.
pub fn ladder_check(
    spec: &ProblemSpec,
    reference: &SpaceTimeTrajectory,
    c: &VariationGenerator,
    k: usize,
    ladder: &[f64],
    cfg: &IntegratorConfig,
    config: LadderConfig,
) -> Result<LadderReport> {
    let vv = variation_vector(spec, reference, c, k)?;
    let rec = crate::adjoint::fundamental_matrix(spec, reference, k)?;
    let s_bar = reference.nodes[k];
    let mut devs = Vec::with_capacity(ladder.len());
    let mut preds = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let ctrl = apply_variation(&reference.control, c, s_bar, eps, spec.m1)?;
        devs.push(endpoint_deviation(spec, reference, &ctrl, cfg)?);
        preds.push(vv.predicted_deviation(&rec, eps));
    }
    expansion_order_estimate(ladder, &devs, &preds, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::fundamental_matrix;
    use crate::control::pieces;
    use crate::expr::Expr;
    use crate::field::VectorField;
    use crate::integrate::integrate_extended;
    use crate::problem::fixtures::smooth;
    use crate::problem::{ProblemData, Target};

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::with_step(1e-3)
    }

    fn heisenberg(drift: &str) -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 2,
            m1: 2,
            q: 0,
            f: VectorField::parse(&[drift, "0"]).unwrap(),
            g: vec![VectorField::parse(&["1", "0"]).unwrap(), VectorField::parse(&["0", "x1"]).unwrap()],
            control_set: vec![],
            l0: Expr::parse("0").unwrap(),
            lhat1: Expr::parse("0").unwrap(),
            psi: Expr::parse("x2").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 10.0,
            xcheck: vec![0.0, 0.0],
        })
        .unwrap()
    }

    fn brockett_problem() -> ProblemSpec {
        ProblemSpec::new(ProblemData {
            n: 3,
            m1: 2,
            q: 0,
            f: VectorField::parse(&["0.2*x2", "-0.3*x1", "0.1*x1*x2"]).unwrap(),
            g: vec![
                VectorField::parse(&["1", "0", "-x2"]).unwrap(),
                VectorField::parse(&["0", "1 + 0.1*x3", "x1"]).unwrap(),
            ],
            control_set: vec![],
            l0: Expr::parse("x3^2").unwrap(),
            lhat1: Expr::parse("w0*x1^2").unwrap(),
            psi: Expr::parse("x3").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 10.0,
            xcheck: vec![0.1, -0.2, 0.05],
        })
        .unwrap()
    }

    fn brockett_reference(spec: &ProblemSpec) -> SpaceTimeTrajectory {
        let ctrl = SpaceTimeControl::new(pieces(&[
            (0.5, 1.0, vec![0.0, 0.0], 0),
            (0.2, 0.0, vec![0.6, 0.8], 0),
            (0.6, 1.0, vec![0.0, 0.0], 0),
            (0.3, 0.5, vec![0.0, -0.5], 0),
        ]))
        .unwrap();
        integrate_extended(spec, &ctrl, &cfg()).unwrap()
    }

    fn smooth_reference() -> (ProblemSpec, SpaceTimeTrajectory) {
        let spec = smooth();
        let ctrl = SpaceTimeControl::new(pieces(&[
            (0.4, 1.0, vec![0.0], 2),
            (0.25, 0.0, vec![1.0], 0),
            (0.5, 0.5, vec![-0.5], 1),
            (0.35, 1.0, vec![0.0], 0),
        ]))
        .unwrap();
        let traj = integrate_extended(&spec, &ctrl, &cfg()).unwrap();
        (spec, traj)
    }

    #[test]
    fn word_for_simple_bracket() {
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let w = synth_bracket_control(&b, &FieldAssignment::identity(&b), 0.4, 2, 2).unwrap();
        let expect = pieces(&[
            (0.1, 0.0, vec![1.0, 0.0], 0),
            (0.1, 0.0, vec![0.0, 1.0], 0),
            (0.1, 0.0, vec![-1.0, 0.0], 0),
            (0.1, 0.0, vec![0.0, -1.0], 0),
        ]);
        assert_eq!(w.len(), 4);
        for (a, b) in w.iter().zip(&expect) {
            assert!((a.duration - b.duration).abs() < 1e-15 && a.w == b.w && a.w0 == 0.0);
        }
    }

    #[test]
    fn word_counts_and_unit_speed() {
        for h in 2..=5 {
            for b in FormalBracket::enumerate(h, 1) {
                let sigma = FieldAssignment(b.seq().into_iter().map(|j| (j, ((j - 1) % 2) as usize)).collect());
                let w = synth_bracket_control(&b, &sigma, 1.0, 3, 2).unwrap();
                assert_eq!(w.len() as u64, b.switch_number());
                assert!(w.iter().all(|p| p.w0 == 0.0 && (linalg::norm(&p.w) - 1.0).abs() < 1e-15));
                let total: f64 = w.iter().map(|p| p.duration).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        assert!(matches!(
            synth_bracket_control(&b, &FieldAssignment::identity(&b), 1.0, 3, 1),
            Err(Error::IndexOutOfC1 { leaf: 2, field: 2, m1: 1 })
        ));
        assert_eq!(
            synth_bracket_control(&FormalBracket::leaf(1).unwrap(), &FieldAssignment::default(), 1.0, 1, 1),
            Err(Error::LengthOne)
        );
    }

    #[test]
    fn heisenberg_word_is_exact() {
        let spec = heisenberg("0");
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let s = 0.4;
        let w = synth_bracket_control(&b, &FieldAssignment::identity(&b), s, 2, 2).unwrap();
        let traj = integrate_extended(&spec, &SpaceTimeControl::new(w).unwrap(), &cfg()).unwrap();
        let t = s / 4.0;
        assert!(traj.y(traj.steps())[0].abs() < 1e-15);
        assert!((traj.y(traj.steps())[1] - t * t).abs() < 1e-15);
    }

    #[test]
    fn brockett_word_is_exact() {
        let spec = ProblemSpec::new(ProblemData {
            n: 3,
            m1: 2,
            q: 0,
            f: VectorField::zero(3),
            g: vec![
                VectorField::parse(&["1", "0", "-x2"]).unwrap(),
                VectorField::parse(&["0", "1", "x1"]).unwrap(),
            ],
            control_set: vec![],
            l0: Expr::parse("0").unwrap(),
            lhat1: Expr::parse("0").unwrap(),
            psi: Expr::parse("x3").unwrap(),
            c2_generators: vec![],
            target: Target::default(),
            budget: 10.0,
            xcheck: vec![0.0; 3],
        })
        .unwrap();
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let s = 0.6;
        let w = synth_bracket_control(&b, &FieldAssignment::identity(&b), s, 2, 2).unwrap();
        let inv = inverse_word(&w);
        let traj = integrate_extended(&spec, &SpaceTimeControl::new(w.clone()).unwrap(), &cfg()).unwrap();
        let t = s / 4.0;
        let end = traj.y(traj.steps());
        assert!(end[0].abs() < 1e-15 && end[1].abs() < 1e-15);
        assert!((end[2] - 2.0 * t * t).abs() < 1e-14);
        // word followed by its inverse returns to the start
        let mut both = w;
        both.extend(inv);
        let back = integrate_extended(&spec, &SpaceTimeControl::new(both).unwrap(), &cfg()).unwrap();
        assert!(linalg::norm(back.y(back.steps())) < 1e-14);
    }

    #[test]
    fn needle_vector_examples() {
        let (spec, traj) = smooth_reference();
        let (k, snap) = lebesgue_node(&traj, 0.9).unwrap();
        assert!(snap < 1e-3);
        let r = &traj.control.pieces[traj.piece_left_of_node(k)];
        let same = Needle::from_piece(r);
        assert!(needle_vector(&spec, &traj, &same, k).unwrap().is_zero());

        let zeta = 0.3;
        let v = needle_vector(&spec, &traj, &Needle::new(r.w0, r.w.clone(), r.a, zeta), k).unwrap();
        let x = traj.y(k);
        let fe = spec.fe(x, r.w0, &r.w, r.a).unwrap();
        let le = spec.le(x, r.w0, &r.w, r.a).unwrap();
        assert!((v.v0 - zeta * r.w0).abs() < 1e-15);
        assert!((v.v[0] - zeta * fe[0]).abs() < 1e-14 && (v.v[1] - zeta * fe[1]).abs() < 1e-14);
        assert!((v.vl - zeta * le).abs() < 1e-14);
        assert!((v.vbeta.unwrap() - zeta * linalg::norm(&r.w)).abs() < 1e-15);

        let same_ctrl = apply_needle(&traj.control, &same, traj.nodes[k], 1e-3).unwrap();
        let rerun = integrate_extended(&spec, &same_ctrl, &cfg()).unwrap();
        assert!(linalg::norm_inf(&linalg::sub(rerun.endpoint(), traj.endpoint())) < 1e-12);
    }

    #[test]
    fn needle_vector_pure_jump() {
        let spec = heisenberg("0");
        let ctrl = SpaceTimeControl::uniform(1.0, 1, |_| (1.0, vec![0.0, 0.0], 0)).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &cfg()).unwrap();
        let v = needle_vector(&spec, &traj, &Needle::new(0.0, vec![1.0, 0.0], 0, 0.0), 500).unwrap();
        assert_eq!((v.v0, v.v.clone(), v.vl, v.vbeta), (-1.0, vec![1.0, 0.0], 0.0, Some(1.0)));
    }

    #[test]
    fn apply_needle_keeps_duration() {
        let (_, traj) = smooth_reference();
        let c = Needle::new(0.0, vec![-1.0], 0, 0.2);
        let p = apply_needle(&traj.control, &c, 0.9, 0.05).unwrap();
        assert!((p.total_duration() - traj.total_duration()).abs() < 1e-14);
        assert!(p.breakpoints().iter().any(|b| (b - 0.85).abs() < 1e-14));
        assert!(p.breakpoints().iter().any(|b| (b - 0.9).abs() < 1e-14));
        assert!(matches!(apply_needle(&traj.control, &c, 0.04, 0.05), Err(Error::EpsilonTooLarge(_))));
    }

    #[test]
    fn needle_asymptotics() {
        let (spec, traj) = smooth_reference();
        let (k, _) = lebesgue_node(&traj, 0.95).unwrap();
        let rec = fundamental_matrix(&spec, &traj, k).unwrap();
        let c = Needle::new(0.0, vec![1.0], 0, 0.2);
        let v = needle_vector(&spec, &traj, &c, k).unwrap();
        let eps = 1e-3;
        let ctrl = apply_needle(&traj.control, &c, traj.nodes[k], eps).unwrap();
        let dev = endpoint_deviation(&spec, &traj, &ctrl, &cfg()).unwrap();
        let pred = v.predicted_deviation(&rec, eps);
        let ratio = linalg::norm(&linalg::sub(&dev, &pred)) / eps;
        assert!(ratio <= 0.05, "{ratio}");

        let rep = ladder_check(
            &spec,
            &traj,
            &VariationGenerator::Needle(c),
            k,
            &DEFAULT_LADDER,
            &cfg(),
            LadderConfig::default(),
        )
        .unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn bracket_variation_properties() {
        let spec = brockett_problem();
        let traj = brockett_reference(&spec);
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let sigma = FieldAssignment::identity(&b);
        let (k, _) = lebesgue_node(&traj, 1.0).unwrap();
        let s_bar = traj.nodes[k];
        let eps: f64 = 1e-4;
        let delta = eps.sqrt();
        let ctrl = apply_bracket_variation(&traj.control, &b, &sigma, s_bar, eps, spec.m1).unwrap();
        assert!((ctrl.total_duration() - traj.total_duration()).abs() < 1e-14);
        let pert = integrate_perturbed(&spec, &ctrl, &cfg()).unwrap();
        let kp = pert.node_index(s_bar, 1e-12).unwrap();
        assert!((pert.y0(kp) - traj.y0(k)).abs() < 1e-12);
        assert!((pert.yl(kp) - traj.yl(k)).abs() < 1e-10);
        let dbeta = pert.beta(pert.steps()) - traj.beta(traj.steps());
        assert!((dbeta - delta).abs() < 1e-12);

        let rec = fundamental_matrix(&spec, &traj, k).unwrap();
        let v = bracket_vector(&spec, &traj, &b, &sigma, k).unwrap();
        let pred = v.predicted_deviation(&rec, eps);
        let dev = linalg::sub(pert.endpoint(), traj.endpoint());
        let ratio = linalg::norm(&linalg::sub(&dev[1..4], &pred[1..4])) / eps;
        assert!(ratio < 0.05, "{ratio}");
    }

    #[test]
    fn bracket_ladder() {
        let spec = brockett_problem();
        let traj = brockett_reference(&spec);
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let (k, _) = lebesgue_node(&traj, 1.0).unwrap();
        let c = VariationGenerator::Bracket {
            sigma: FieldAssignment::identity(&b),
            b,
        };
        let ladder = [1e-4, 5e-5, 2.5e-5, 1.25e-5];
        let rep = ladder_check(&spec, &traj, &c, k, &ladder, &cfg(), LadderConfig::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn heisenberg_bracket_ladder_is_exact() {
        let spec = heisenberg("0");
        let ctrl = SpaceTimeControl::uniform(1.0, 1, |_| (1.0, vec![0.0, 0.0], 0)).unwrap();
        let traj = integrate_extended(&spec, &ctrl, &cfg()).unwrap();
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let c = VariationGenerator::Bracket {
            sigma: FieldAssignment::identity(&b),
            b,
        };
        let rep = ladder_check(&spec, &traj, &c, 700, &DEFAULT_LADDER, &cfg(), LadderConfig::default()).unwrap();
        assert!(rep.pass && rep.slope.is_none(), "{rep:?}");
    }

    #[test]
    fn zero_prediction_fails() {
        let (spec, traj) = smooth_reference();
        let (k, _) = lebesgue_node(&traj, 0.95).unwrap();
        let c = Needle::new(0.0, vec![1.0], 0, 0.0);
        let mut devs = Vec::new();
        for &eps in &DEFAULT_LADDER {
            let ctrl = apply_needle(&traj.control, &c, traj.nodes[k], eps).unwrap();
            devs.push(endpoint_deviation(&spec, &traj, &ctrl, &cfg()).unwrap());
        }
        let zeros = vec![vec![0.0; 5]; 4];
        let rep = expansion_order_estimate(&DEFAULT_LADDER, &devs, &zeros, LadderConfig::default()).unwrap();
        assert!(!rep.pass);
        assert!((rep.slope.unwrap() - 1.0).abs() < 0.1);
        assert!(matches!(
            expansion_order_estimate(&DEFAULT_LADDER[..3], &devs[..3], &zeros[..3], LadderConfig::default()),
            Err(Error::DegenerateLadder(_))
        ));
    }

    #[test]
    fn composition() {
        let (spec, traj) = smooth_reference();
        let (k1, _) = lebesgue_node(&traj, 0.3).unwrap();
        let (k2, _) = lebesgue_node(&traj, 1.2).unwrap();
        let n1 = Needle::new(0.0, vec![1.0], 0, 0.1);
        let n2 = Needle::new(1.0, vec![0.0], 2, -0.2);
        let e1 = 1e-3;
        let e2 = 7e-4;
        let entries = [
            VariationSpec {
                generator: VariationGenerator::Needle(n1.clone()),
                s_bar: traj.nodes[k1],
                eps: e1,
            },
            VariationSpec {
                generator: VariationGenerator::Needle(n2.clone()),
                s_bar: traj.nodes[k2],
                eps: e2,
            },
        ];
        let single = compose_variations(&traj.control, &entries[..1], 1).unwrap();
        assert_eq!(single, apply_needle(&traj.control, &n1, traj.nodes[k1], e1).unwrap());
        let joint = compose_variations(&traj.control, &entries, 1).unwrap();
        let dj = endpoint_deviation(&spec, &traj, &joint, &cfg()).unwrap();
        let d1 = endpoint_deviation(&spec, &traj, &single, &cfg()).unwrap();
        let d2 = endpoint_deviation(
            &spec,
            &traj,
            &apply_needle(&traj.control, &n2, traj.nodes[k2], e2).unwrap(),
            &cfg(),
        )
        .unwrap();
        let resid = linalg::norm(&linalg::sub(&dj, &linalg::sub(&d1, &d2.iter().map(|v| -v).collect::<Vec<_>>())));
        let size = libm::sqrt(e1 * e1 + e2 * e2);
        assert!(resid / size <= 0.05);

        let mut swapped = entries.clone();
        swapped.swap(0, 1);
        assert!(matches!(compose_variations(&traj.control, &swapped, 1), Err(Error::OverlappingWindows(1))));
    }

    #[test]
    fn needle_and_bracket_mix_beta() {
        let spec = brockett_problem();
        let traj = brockett_reference(&spec);
        let b = FormalBracket::parse("[X1,X2]").unwrap();
        let (k1, _) = lebesgue_node(&traj, 0.3).unwrap();
        let (k2, _) = lebesgue_node(&traj, 1.0).unwrap();
        let needle = Needle::new(0.0, vec![0.6, -0.8], 0, 0.25);
        let en = 1e-3;
        let eb: f64 = 1e-4;
        let entries = [
            VariationSpec {
                generator: VariationGenerator::Needle(needle.clone()),
                s_bar: traj.nodes[k1],
                eps: en,
            },
            VariationSpec {
                generator: VariationGenerator::Bracket {
                    sigma: FieldAssignment::identity(&b),
                    b,
                },
                s_bar: traj.nodes[k2],
                eps: eb,
            },
        ];
        let ctrl = compose_variations(&traj.control, &entries, spec.m1).unwrap();
        let dev = endpoint_deviation(&spec, &traj, &ctrl, &cfg()).unwrap();
        let r = &traj.control.pieces[traj.piece_left_of_node(k1)];
        let expect = en * (1.25 - linalg::norm(&r.w)) + eb.sqrt();
        assert!((dev[spec.n + 2] - expect).abs() < 1e-12);
    }
}
