use std::fmt::Write as _;

use impulsive_core::checker::{
    bracket_pool, check_complementarity, check_differentiated, check_first_order, check_higher_order,
    classify_fully_impulsive, find_multiplier, kalman_check, linear_chain_conditions, linear_structure, rank_i1,
    rank_i2_all, BracketSpec, ConditionReport, DifferentiatedTarget, MultiplierSearch, SearchConfig,
};
use impulsive_core::integrate::{canonicalize, integrate_extended};
use impulsive_core::variations::{lebesgue_node, ladder_check, synth_bracket_control, LadderConfig, Needle, VariationGenerator};
use impulsive_core::{
    bracket::ledger_string, ControlPiece, FieldAssignment, FormalBracket, IntegratorConfig, Multiplier, SpaceTimeControl,
    SpaceTimeTrajectory,
};

use crate::config::RunConfig;
use crate::problem_file::{ProblemFile, ProcessInput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: impulsive_core::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

trait Context<T> {
    fn context(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for impulsive_core::Result<T> {
    fn context(self, what: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Completed,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Fail => 1,
            _ => 0,
        }
    }

    fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Completed => "COMPLETED",
        }
    }
}

/// Text body plus extra files (`name`, contents) for the report directory.
#[derive(Debug)]
pub struct Outcome {
    pub verdict: Verdict,
    pub body: String,
    pub files: Vec<(String, String)>,
}

pub fn piece_line(p: &ControlPiece) -> String {
    let mut v = vec![fmt(p.duration), fmt(p.w0)];
    v.extend(p.w.iter().map(|x| fmt(*x)));
    v.push((p.a + 1).to_string());
    format!("piece = {}", v.join(", "))
}

fn fmt(v: f64) -> String {
    // avoid printing "-0"
    format!("{}", if v == 0.0 { 0.0 } else { v })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(", ")
}

fn pieces_text(ctrl: &SpaceTimeControl) -> String {
    let mut s = String::new();
    for p in &ctrl.pieces {
        let _ = writeln!(s, "{}", piece_line(p));
    }
    s
}

pub fn trajectory_csv(traj: &SpaceTimeTrajectory) -> String {
    let mut s = String::from("s,y0");
    for i in 1..=traj.n {
        let _ = write!(s, ",y{i}");
    }
    s.push_str(",yl,beta\n");
    for (node, state) in traj.nodes.iter().zip(&traj.states) {
        let _ = write!(s, "{node}");
        for v in state {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

fn costate_csv(traj: &SpaceTimeTrajectory, m: &Multiplier) -> String {
    let mut s = String::from("s");
    for i in 1..=traj.n {
        let _ = write!(s, ",p{i}");
    }
    s.push('\n');
    for (node, p) in traj.nodes.iter().zip(&m.p) {
        let _ = write!(s, "{node}");
        for v in p {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

fn multiplier_block(m: &Multiplier) -> String {
    format!(
        "[multiplier]\np0 = {}\npi = {}\nlambda = {}\np = {}\n",
        m.p0,
        m.pi,
        m.lambda,
        fmt_vec(m.terminal_p())
    )
}

fn process(pf: &ProblemFile) -> CliResult<SpaceTimeControl> {
    pf.process
        .as_ref()
        .map(|p| p.space_time())
        .ok_or_else(|| CliError::Input("the problem file has no [process] section".into()))
}

fn integrator(cfg: &RunConfig, ctrl: &SpaceTimeControl) -> IntegratorConfig {
    IntegratorConfig::with_step(ctrl.total_duration() / cfg.grid as f64)
}

fn reference(pf: &ProblemFile, cfg: &RunConfig) -> CliResult<(SpaceTimeTrajectory, IntegratorConfig)> {
    let ctrl = process(pf)?;
    ctrl.validate(&pf.spec).context("reference control")?;
    let icfg = integrator(cfg, &ctrl);
    let traj = integrate_extended(&pf.spec, &ctrl, &icfg).context("integrating the reference process")?;
    Ok((traj, icfg))
}

fn file_multiplier(pf: &ProblemFile, traj: &SpaceTimeTrajectory) -> CliResult<Option<Multiplier>> {
    match &pf.multiplier {
        None => Ok(None),
        Some(m) => Multiplier::from_terminal(&pf.spec, traj, m.p0, &m.p_terminal, m.pi, m.lambda)
            .context("integrating the adjoint from the terminal multiplier")
            .map(Some),
    }
}

fn require_multiplier(pf: &ProblemFile, traj: &SpaceTimeTrajectory) -> CliResult<Multiplier> {
    file_multiplier(pf, traj)?.ok_or_else(|| CliError::Input("the problem file has no [multiplier] section".into()))
}

pub fn bracket_spec(text: &str, fields: Option<&[usize]>) -> CliResult<BracketSpec> {
    let b = FormalBracket::parse(text).context(&format!("bracket '{text}'"))?;
    let sigma = match fields {
        Some(f) => FieldAssignment::from_seq(&b, f).context(&format!("field list for '{text}'"))?,
        None => FieldAssignment::identity(&b),
    };
    Ok(BracketSpec { b, sigma })
}

/// Brackets from the file's `[brackets]` section followed by the command line ones.
fn collect_brackets(pf: &ProblemFile, extra: &[String]) -> CliResult<Vec<BracketSpec>> {
    let mut out = Vec::new();
    for (text, fields) in &pf.brackets {
        out.push(bracket_spec(text, fields.as_deref())?);
    }
    for e in extra {
        let (text, fields) = split_bracket_arg(e)?;
        out.push(bracket_spec(&text, fields.as_deref())?);
    }
    Ok(out)
}

/// `"[X1,X2]"` or `"[X1,X2]|2,1"` (1-based field indices).
pub fn split_bracket_arg(arg: &str) -> CliResult<(String, Option<Vec<usize>>)> {
    match arg.split_once('|') {
        None => Ok((arg.trim().to_string(), None)),
        Some((b, f)) => Ok((b.trim().to_string(), Some(parse_fields(f)?))),
    }
}

pub fn parse_fields(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(CliError::Input(format!("field index '{}' must be a positive integer", t.trim()))),
        })
        .collect()
}

pub fn validate(pf: &ProblemFile) -> CliResult<Outcome> {
    let mut body = String::new();
    let mut ok = true;
    let mut items = pf.spec.validate();
    if let Some(p) = &pf.process {
        let ctrl = p.space_time();
        let r = ctrl.validate(&pf.spec);
        items.push(impulsive_core::problem::ValidationItem {
            name: "process_admissible".into(),
            ok: r.is_ok(),
            detail: match r {
                Ok(()) => format!("{} pieces, S = {}", ctrl.pieces.len(), ctrl.total_duration()),
                Err(e) => e.to_string(),
            },
        });
    }
    for it in &items {
        ok &= it.ok;
        let _ = writeln!(body, "check: {}", it.name);
        let _ = writeln!(body, "status: {}", if it.ok { "PASS" } else { "FAIL" });
        let _ = writeln!(body, "detail: {}\n", it.detail);
    }
    Ok(Outcome {
        verdict: Verdict::from_pass(ok),
        body,
        files: vec![],
    })
}

pub fn embed(pf: &ProblemFile) -> CliResult<Outcome> {
    let Some(ProcessInput::Strict(s)) = &pf.process else {
        return Err(CliError::Input("embed needs a [process] given by 'strict' lines".into()));
    };
    let st = s.embed();
    st.validate(&pf.spec).context("embedded control")?;
    let mut body = String::new();
    let _ = writeln!(body, "strict pieces: {}", s.pieces.len());
    let _ = writeln!(body, "final time T: {}", s.total_time());
    let _ = writeln!(body, "total variation: {}", s.total_variation());
    let _ = writeln!(body, "parameter length S: {}\n", st.total_duration());
    let _ = writeln!(body, "[process]");
    body.push_str(&pieces_text(&st));
    Ok(Outcome {
        verdict: Verdict::Completed,
        body,
        files: vec![],
    })
}

pub fn simulate(pf: &ProblemFile, cfg: &RunConfig) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let cost = traj.cost(&pf.spec).context("evaluating the cost")?;
    let k = traj.steps();
    let mut body = String::new();
    let _ = writeln!(body, "steps: {k}");
    let _ = writeln!(body, "S: {}", traj.total_duration());
    let _ = writeln!(body, "final time y0: {:e}", traj.y0(k));
    let _ = writeln!(body, "final state y: ({})", fmt_vec(traj.y(k)));
    let _ = writeln!(body, "running cost yl: {:e}", traj.yl(k));
    let _ = writeln!(body, "variation beta: {:e}", traj.beta(k));
    let _ = writeln!(body, "cost: {cost:e}");
    let _ = writeln!(body, "target residual: {:e}", pf.spec.target.residual(traj.y0(k), traj.y(k)));
    Ok(Outcome {
        verdict: Verdict::Completed,
        body,
        files: vec![("trajectory.csv".into(), trajectory_csv(&traj))],
    })
}

pub fn canonicalize_cmd(pf: &ProblemFile, cfg: &RunConfig) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let canon = traj.control.canonical().context("canonical parameterization")?;
    let icfg = integrator(cfg, &canon);
    let (ctrl, ctraj) = canonicalize(&pf.spec, &traj, &icfg).context("canonical parameterization")?;
    let c0 = traj.cost(&pf.spec).context("reference cost")?;
    let c1 = ctraj.cost(&pf.spec).context("canonical cost")?;
    let dev = traj
        .endpoint()
        .iter()
        .zip(ctraj.endpoint())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut body = String::new();
    let _ = writeln!(body, "original S: {}", traj.total_duration());
    let _ = writeln!(body, "canonical S: {}", ctrl.total_duration());
    let _ = writeln!(body, "endpoint difference: {dev:e}");
    let _ = writeln!(body, "cost difference: {:e}\n", (c0 - c1).abs());
    let _ = writeln!(body, "[process]");
    body.push_str(&pieces_text(&ctrl));
    Ok(Outcome {
        verdict: Verdict::Completed,
        body,
        files: vec![("trajectory.csv".into(), trajectory_csv(&ctraj))],
    })
}

pub fn brackets(length: usize, k: u32) -> CliResult<Outcome> {
    if length == 0 {
        return Err(CliError::Input("--length must be at least 1".into()));
    }
    let all = FormalBracket::enumerate(length, 1);
    let mut body = String::new();
    let _ = writeln!(body, "length: {length}");
    let _ = writeln!(body, "k: {k}");
    let _ = writeln!(body, "count: {}", all.len());
    let mut csv = String::from("bracket,switch_number,ledger\n");
    for b in &all {
        let ledger = ledger_string(&b.required_smoothness(k));
        let _ = writeln!(body, "\nbracket: {b}");
        let _ = writeln!(body, "switch number: {}", b.switch_number());
        let _ = writeln!(body, "smoothness: {ledger}");
        let _ = writeln!(csv, "\"{b}\",{},{ledger}", b.switch_number());
    }
    Ok(Outcome {
        verdict: Verdict::Completed,
        body,
        files: vec![("brackets.csv".into(), csv)],
    })
}

pub fn synth_bracket(text: &str, s: f64, fields: Option<&[usize]>, m: Option<usize>) -> CliResult<Outcome> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(CliError::Input(format!("--s must be positive, got {s}")));
    }
    let spec = bracket_spec(text, fields)?;
    let needed = spec.sigma.0.values().copied().max().map_or(0, |v| v + 1);
    let m = m.unwrap_or(needed);
    if m < needed {
        return Err(CliError::Input(format!("--m {m} is smaller than the largest field index {needed}")));
    }
    let pieces = synth_bracket_control(&spec.b, &spec.sigma, s, m, m).context("synthesizing the bracket control")?;
    let mut body = String::new();
    let _ = writeln!(body, "bracket: {}", spec.b);
    let _ = writeln!(body, "fields: {}", spec.sigma.seq_string());
    let _ = writeln!(body, "switch number: {}", spec.b.switch_number());
    let _ = writeln!(body, "total duration: {s}");
    let _ = writeln!(body, "pieces: {}\n", pieces.len());
    let _ = writeln!(body, "[process]");
    for p in &pieces {
        let _ = writeln!(body, "{}", piece_line(p));
    }
    Ok(Outcome {
        verdict: Verdict::Completed,
        body,
        files: vec![],
    })
}

pub enum OrderTarget {
    Needle { value: Vec<f64>, zeta: f64 },
    Bracket(String),
}

pub fn verify_order(pf: &ProblemFile, cfg: &RunConfig, target: &OrderTarget, at: f64) -> CliResult<Outcome> {
    let (traj, icfg) = reference(pf, cfg)?;
    let m = pf.spec.m();
    let generator = match target {
        OrderTarget::Needle { value, zeta } => {
            if value.len() != m + 2 {
                return Err(CliError::Input(format!("--needle needs w0, {m} rates and a control index")));
            }
            let a = value[m + 1];
            if a.fract() != 0.0 || a < 1.0 || a as usize > pf.spec.control_set.len() {
                return Err(CliError::Input(format!("needle control index {a} is out of range")));
            }
            let n = Needle::new(value[0], value[1..m + 1].to_vec(), a as usize - 1, *zeta);
            n.check(&pf.spec, 1.0).context("needle value")?;
            VariationGenerator::Needle(n)
        }
        OrderTarget::Bracket(arg) => {
            let (text, fields) = split_bracket_arg(arg)?;
            let b = bracket_spec(&text, fields.as_deref())?;
            VariationGenerator::Bracket { b: b.b, sigma: b.sigma }
        }
    };
    let (k, snap) = lebesgue_node(&traj, at).context("locating the variation point")?;
    let rep = ladder_check(&pf.spec, &traj, &generator, k, &cfg.ladder, &icfg, LadderConfig::default())
        .context("epsilon ladder")?;
    let mut body = String::new();
    let _ = writeln!(body, "variation point: {} (node {k}, snapped by {snap:e})", traj.nodes[k]);
    let _ = writeln!(body, "window order: {}", generator.order());
    let _ = writeln!(body, "slope threshold: {}", rep.config.slope_threshold);
    let _ = writeln!(body, "remainder floor: {:e}", rep.config.floor);
    match rep.slope {
        Some(s) => {
            let _ = writeln!(body, "slope: {s}");
        }
        None => {
            let _ = writeln!(body, "slope: none (every remainder below the floor)");
        }
    }
    let _ = writeln!(body, "verdict: {}", if rep.pass { "PASS" } else { "FAIL" });
    let mut csv = String::from("eps,deviation,predicted,remainder\n");
    for r in &rep.rows {
        let _ = writeln!(body, "\neps: {:e}", r.eps);
        let _ = writeln!(body, "deviation: {:e}", r.deviation);
        let _ = writeln!(body, "predicted: {:e}", r.predicted);
        let _ = writeln!(body, "remainder: {:e}", r.remainder);
        let _ = writeln!(csv, "{:e},{:e},{:e},{:e}", r.eps, r.deviation, r.predicted, r.remainder);
    }
    Ok(Outcome {
        verdict: Verdict::from_pass(rep.pass),
        body,
        files: vec![("ladder.csv".into(), csv)],
    })
}

fn combine(reports: &[ConditionReport], extra: Vec<(String, String)>, traj: &SpaceTimeTrajectory, m: &Multiplier) -> Outcome {
    let mut body = String::new();
    let ok = reports.iter().all(|r| r.passed());
    let _ = writeln!(body, "verdict: {}", if ok { "PASS" } else { "FAIL" });
    let _ = writeln!(body, "max residual: {:e}", reports.iter().map(|r| r.max_residual()).fold(0.0, f64::max));
    let mut csv = String::from("condition,s,residual\n");
    for r in reports {
        let _ = writeln!(body, "\n{}", r.to_text());
        csv.push_str(r.series_csv().split_once('\n').map_or("", |(_, rest)| rest));
    }
    let mut files = vec![("residuals.csv".into(), csv), ("costate.csv".into(), costate_csv(traj, m))];
    files.extend(extra);
    Outcome {
        verdict: Verdict::from_pass(ok),
        body,
        files,
    }
}

pub fn check_mp(pf: &ProblemFile, cfg: &RunConfig) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let m = require_multiplier(pf, &traj)?;
    let tol = cfg.tolerances();
    let fo = check_first_order(&pf.spec, &traj, &m, &tol).context("first order conditions")?;
    let co = check_complementarity(&pf.spec, &traj, &m, &tol).context("complementarity conditions")?;
    Ok(combine(&[fo, co], vec![], &traj, &m))
}

pub fn check_ho(pf: &ProblemFile, cfg: &RunConfig, extra: &[String]) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let m = require_multiplier(pf, &traj)?;
    let tol = cfg.tolerances();
    let brackets = collect_brackets(pf, extra)?;
    let ho = check_higher_order(&pf.spec, &traj, &m, &brackets, &tol).context("higher order conditions")?;
    let mut reports = vec![ho];
    let mut targets: Vec<DifferentiatedTarget> = (0..pf.spec.m1).map(DifferentiatedTarget::Field).collect();
    targets.extend(brackets.into_iter().map(DifferentiatedTarget::Bracket));
    for t in &targets {
        match check_differentiated(&pf.spec, &traj, &m, t, &tol) {
            Ok(r) => reports.push(r),
            Err(impulsive_core::Error::InsufficientSmoothness { .. }) => {}
            Err(e) => {
                return Err(CliError::Core {
                    context: "differentiated conditions".into(),
                    source: e,
                })
            }
        }
    }
    Ok(combine(&reports, vec![], &traj, &m))
}

pub fn find_multiplier_cmd(pf: &ProblemFile, cfg: &RunConfig, higher_order: bool, extra: &[String]) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let sc = SearchConfig {
        tol: cfg.tol_ineq,
        higher_order,
        brackets: if higher_order { collect_brackets(pf, extra)? } else { vec![] },
        ..SearchConfig::default()
    };
    let out = find_multiplier(&pf.spec, &traj, &sc).context("multiplier search")?;
    let mut body = String::new();
    let _ = writeln!(body, "equality rows: {}", out.equality_rows);
    let _ = writeln!(body, "inequality rows: {}", out.inequality_rows);
    let _ = writeln!(body, "null space dimension: {}", out.null_dim);
    let _ = writeln!(body, "abnormality: {}", out.abnormality.as_str());
    let _ = writeln!(body, "residual: {:e}", out.result.residual());
    let mut files = vec![];
    match &out.result {
        MultiplierSearch::Found { multiplier, .. } => {
            let _ = writeln!(body, "verdict: PASS\n");
            body.push_str(&multiplier_block(multiplier));
            files.push(("costate.csv".into(), costate_csv(&traj, multiplier)));
        }
        MultiplierSearch::Infeasible { .. } => {
            let _ = writeln!(body, "verdict: FAIL (no multiplier within tolerance)");
        }
    }
    Ok(Outcome {
        verdict: Verdict::from_pass(out.result.multiplier().is_some()),
        body,
        files,
    })
}

pub fn rank(pf: &ProblemFile, length: usize, points: &[Vec<f64>]) -> CliResult<Outcome> {
    let spec = &pf.spec;
    let mut pts = vec![spec.xcheck.clone()];
    for p in points {
        if p.len() != spec.n {
            return Err(CliError::Input(format!("--at point has {} entries, expected {}", p.len(), spec.n)));
        }
        pts.push(p.clone());
    }
    let pool0 = bracket_pool(spec, length, 0);
    let pool1 = bracket_pool(spec, length, 1);
    let mut body = String::new();
    let _ = writeln!(body, "bracket length: {length}");
    let _ = writeln!(body, "pool: {}\n", pool0.len());
    let mut summary = Vec::new();
    let mut i1_all = true;
    let mut i2_all = Some(true);
    for x in &pts {
        let r = rank_i1(spec, x, &pool0).context("condition I.1")?;
        i1_all &= r.verdict;
        let _ = writeln!(body, "{}", r.to_text());
        match rank_i2_all(spec, x, &pool0, &pool1) {
            Ok(r) => {
                i2_all = i2_all.map(|v| v && r.verdict);
                let _ = writeln!(body, "{}", r.to_text());
            }
            Err(e @ impulsive_core::Error::InsufficientSmoothness { .. }) => {
                i2_all = None;
                let _ = writeln!(body, "rank condition: I.2\nverdict: UNVERIFIED ({e})\n");
            }
            Err(e) => {
                return Err(CliError::Core {
                    context: "condition I.2".into(),
                    source: e,
                })
            }
        }
    }
    summary.push(format!("I.1 at all points: {}", if i1_all { "TRUE" } else { "FALSE" }));
    summary.push(format!(
        "I.2 at all points: {}",
        match i2_all {
            Some(true) => "TRUE",
            Some(false) => "FALSE",
            None => "UNVERIFIED",
        }
    ));
    match linear_structure(spec) {
        Some((c, e)) => {
            let k = kalman_check(&c, &e).context("Kalman rank")?;
            summary.push(format!("Kalman: {}", if k.verdict { "TRUE" } else { "FALSE" }));
            let _ = writeln!(body, "{}", k.to_text());
        }
        None => summary.push("Kalman: not a linear system".into()),
    }
    let mut head = summary.join("\n");
    head.push_str("\n\n");
    head.push_str(&body);
    Ok(Outcome {
        verdict: Verdict::Completed,
        body: head,
        files: vec![],
    })
}

pub fn classify(pf: &ProblemFile, cfg: &RunConfig, length: usize) -> CliResult<Outcome> {
    let (traj, _) = reference(pf, cfg)?;
    let tol = cfg.tolerances();
    let mut body = String::new();
    let m = match file_multiplier(pf, &traj)? {
        Some(m) => {
            let _ = writeln!(body, "multiplier: from file");
            m
        }
        None => {
            let sc = SearchConfig {
                tol: cfg.tol_ineq,
                ..SearchConfig::default()
            };
            let out = find_multiplier(&pf.spec, &traj, &sc).context("multiplier search")?;
            match out.result {
                MultiplierSearch::Found { multiplier, residual } => {
                    let _ = writeln!(body, "multiplier: searched (residual {residual:e})");
                    multiplier
                }
                MultiplierSearch::Infeasible { best_residual } => {
                    let _ = writeln!(body, "multiplier: none found (best residual {best_residual:e})");
                    let _ = writeln!(body, "verdict: FAIL");
                    return Ok(Outcome {
                        verdict: Verdict::Fail,
                        body,
                        files: vec![],
                    });
                }
            }
        }
    };
    let pool0 = bracket_pool(&pf.spec, length, 0);
    let pool1 = bracket_pool(&pf.spec, length, 1);
    let rep = classify_fully_impulsive(&pf.spec, &traj, &m, &pool0, &pool1, &tol).context("classification")?;
    let _ = writeln!(body, "verdict: {}\n", if rep.passed() { "PASS" } else { "FAIL" });
    body.push_str(&rep.to_text());
    let mut files = vec![("costate.csv".into(), costate_csv(&traj, &m))];
    if let Some((c, e)) = linear_structure(&pf.spec) {
        let chain = linear_chain_conditions(&c, &e, &m, &tol).context("linear chain conditions")?;
        let _ = writeln!(body, "\n{}", chain.to_text());
        files.push(("chain.csv".into(), chain.series_csv()));
    }
    Ok(Outcome {
        verdict: Verdict::from_pass(rep.passed()),
        body,
        files,
    })
}
