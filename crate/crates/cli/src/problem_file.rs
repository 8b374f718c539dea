//! Sectioned plain-text problem files.
//!
//! ```text
//! # comments start with '#'
//! [problem]
//! n = 1
//! m1 = 1
//! m2 = 0
//! q = 0
//! K = 2            # or inf
//! xcheck = 0
//!
//! [dynamics]
//! f.1 = 0
//! g1.1 = 1
//!
//! [cost]
//! l0 = 0
//! lhat1 = 0
//! Psi = t
//!
//! [target]
//! A_T = 0, 1
//! b_T = 1
//! Gamma = 1, 0; -1, 0
//!
//! [process]
//! piece = 1.0, 0, 1, 1   # duration, w0, w1..wm, a (1-based)
//!
//! [multiplier]
//! p0 = -1
//! pi = 0
//! lambda = 1
//! p = 0                  # p at the final parameter
//! ```
//!
//! Optional sections: `[controlset] a = <point>; ...`, `[cone] gen = <vector>; ...`,
//! `[smoothness] f = 3, g1 = 2` (declared `C^k` orders, default infinite).
//! A `[process]` may use `strict = duration, u1..um, a` lines instead of
//! `piece` lines; they are embedded by graph completion.

use std::collections::BTreeMap;

use impulsive_core::control::{StrictControl, StrictPiece};
use impulsive_core::{
    ControlPiece, Error as CoreError, Expr, ProblemData, ProblemSpec, Smoothness, SpaceTimeControl, Target, VectorField,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A value with its position in the file (1-based line and column of the value).
#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    column: usize,
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn expr(&self) -> Result<Expr, ParseError> {
        Expr::parse(&self.value).map_err(|e| match e {
            CoreError::ExprParse { offset, reason } => ParseError {
                line: self.line,
                column: self.column + offset,
                message: format!("malformed expression: {reason}"),
            },
            other => self.err(other.to_string()),
        })
    }

    fn number(&self) -> Result<f64, ParseError> {
        parse_number(&self.value).ok_or_else(|| self.err(format!("expected a number, found '{}'", self.value)))
    }

    fn count(&self) -> Result<usize, ParseError> {
        self.value
            .trim()
            .parse()
            .map_err(|_| self.err(format!("expected a non-negative integer, found '{}'", self.value)))
    }

    fn vector(&self) -> Result<Vec<f64>, ParseError> {
        split_vector(&self.value).ok_or_else(|| self.err(format!("malformed number list '{}'", self.value)))
    }

    fn vectors(&self) -> Result<Vec<Vec<f64>>, ParseError> {
        self.value
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| split_vector(s).ok_or_else(|| self.err(format!("malformed number list '{}'", s.trim()))))
            .collect()
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        _ => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

fn split_vector(s: &str) -> Option<Vec<f64>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(parse_number).collect()
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Vec<Entry>>,
}

impl Section {
    fn one(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key).and_then(|v| v.last())
    }

    fn require(&self, name: &str, key: &str) -> Result<&Entry, ParseError> {
        self.one(key).ok_or_else(|| ParseError {
            line: self.line,
            column: 1,
            message: format!("[{name}] is missing '{key}'"),
        })
    }

    fn all(&self, key: &str) -> &[Entry] {
        self.entries.get(key).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

const SECTIONS: [&str; 10] = [
    "problem",
    "dynamics",
    "cost",
    "controlset",
    "cone",
    "target",
    "smoothness",
    "process",
    "multiplier",
    "brackets",
];

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ParseError> {
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ParseError {
                line,
                column: indent + 1,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ParseError {
                    line,
                    column: indent + 2,
                    message: format!("unknown section [{name}]"),
                });
            }
            if out.contains_key(&name) {
                return Err(ParseError {
                    line,
                    column: indent + 2,
                    message: format!("section [{name}] appears twice"),
                });
            }
            out.insert(
                name.clone(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some(sec) = current.as_ref() else {
            return Err(ParseError {
                line,
                column: indent + 1,
                message: "entry before any section header".into(),
            });
        };
        let eq = content.find('=').ok_or_else(|| ParseError {
            line,
            column: indent + 1,
            message: "expected 'key = value'".into(),
        })?;
        let key = content[..eq].trim().to_string();
        if key.is_empty() {
            return Err(ParseError {
                line,
                column: indent + 1,
                message: "empty key".into(),
            });
        }
        let after = &content[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let entry = Entry {
            value: after.trim().to_string(),
            line,
            column: eq + 2 + lead,
        };
        out.get_mut(sec).unwrap().entries.entry(key).or_default().push(entry);
    }
    Ok(out)
}

/// A reference process as written in the file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessInput {
    SpaceTime(SpaceTimeControl),
    Strict(StrictControl),
}

impl ProcessInput {
    pub fn space_time(&self) -> SpaceTimeControl {
        match self {
            ProcessInput::SpaceTime(c) => c.clone(),
            ProcessInput::Strict(s) => s.embed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierInput {
    pub p0: f64,
    pub pi: f64,
    pub lambda: f64,
    pub p_terminal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub spec: ProblemSpec,
    pub process: Option<ProcessInput>,
    pub multiplier: Option<MultiplierInput>,
    /// Brackets listed under `[brackets]` as `b = <bracket>` with optional `fields = 1,2,...`.
    pub brackets: Vec<(String, Option<Vec<usize>>)>,
}

fn smoothness(entry: &Entry) -> Result<Smoothness, ParseError> {
    match entry.value.trim() {
        "inf" | "infinity" => Ok(Smoothness::Infinite),
        v => v
            .parse()
            .map(Smoothness::Finite)
            .map_err(|_| entry.err(format!("expected an order or 'inf', found '{v}'"))),
    }
}

fn field(sec: &Section, prefix: &str, n: usize, s: Smoothness) -> Result<VectorField, ParseError> {
    let mut comps = Vec::with_capacity(n);
    for i in 1..=n {
        comps.push(sec.require("dynamics", &format!("{prefix}.{i}"))?.expr()?);
    }
    Ok(VectorField::new(comps, s))
}

fn section_err(sec: &Section, message: String) -> ParseError {
    ParseError {
        line: sec.line,
        column: 1,
        message,
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, ParseError> {
    let sections = split_sections(text)?;
    let empty = Section::default();
    let get = |name: &str| -> Result<&Section, ParseError> {
        sections.get(name).ok_or_else(|| ParseError {
            line: 1,
            column: 1,
            message: format!("missing section [{name}]"),
        })
    };
    let prob = get("problem")?;
    let n = prob.require("problem", "n")?.count()?;
    let m1 = prob.require("problem", "m1")?.count()?;
    let m2 = prob.one("m2").map(|e| e.count()).transpose()?.unwrap_or(0);
    let q = prob.one("q").map(|e| e.count()).transpose()?.unwrap_or(0);
    let budget = prob.one("K").map(|e| e.number()).transpose()?.unwrap_or(f64::INFINITY);
    let xe = prob.require("problem", "xcheck")?;
    let xcheck = xe.vector()?;
    if xcheck.len() != n {
        return Err(xe.err(format!("xcheck has {} entries, expected {n}", xcheck.len())));
    }
    let m = m1 + m2;

    let smooth = sections.get("smoothness").unwrap_or(&empty);
    let decl = |key: &str| -> Result<Smoothness, ParseError> {
        smooth.one(key).map(smoothness).transpose().map(|s| s.unwrap_or_default())
    };
    let dyn_sec = get("dynamics")?;
    let f = field(dyn_sec, "f", n, decl("f")?)?;
    let mut g = Vec::with_capacity(m);
    for j in 1..=m {
        g.push(field(dyn_sec, &format!("g{j}"), n, decl(&format!("g{j}"))?)?);
    }

    let cost = get("cost")?;
    let l0 = cost.one("l0").map(|e| e.expr()).transpose()?.unwrap_or_else(Expr::zero);
    let lhat1 = cost.one("lhat1").map(|e| e.expr()).transpose()?.unwrap_or_else(Expr::zero);
    let psi = cost.one("Psi").map(|e| e.expr()).transpose()?.unwrap_or_else(Expr::zero);

    let mut control_set = Vec::new();
    if let Some(sec) = sections.get("controlset") {
        for e in sec.all("a") {
            for pt in e.vectors()? {
                if pt.len() != q {
                    return Err(e.err(format!("control point has {} entries, expected q = {q}", pt.len())));
                }
                control_set.push(pt);
            }
        }
    }
    if q > 0 && control_set.is_empty() {
        return Err(section_err(prob, format!("q = {q} but no [controlset] points")));
    }

    let mut c2 = Vec::new();
    if let Some(sec) = sections.get("cone") {
        for e in sec.all("gen") {
            for v in e.vectors()? {
                if v.len() != m2 {
                    return Err(e.err(format!("cone generator has {} entries, expected m2 = {m2}", v.len())));
                }
                c2.push(v);
            }
        }
    }

    let mut target = Target::default();
    if let Some(sec) = sections.get("target") {
        for e in sec.all("A_T") {
            for r in e.vectors()? {
                if r.len() != n + 1 {
                    return Err(e.err(format!("A_T row has {} entries, expected n+1 = {}", r.len(), n + 1)));
                }
                target.rows.push(r);
            }
        }
        for e in sec.all("b_T") {
            target.rhs.extend(e.vector()?);
        }
        if target.rhs.len() != target.rows.len() {
            return Err(section_err(
                sec,
                format!("{} rows in A_T but {} entries in b_T", target.rows.len(), target.rhs.len()),
            ));
        }
        for e in sec.all("Gamma") {
            for r in e.vectors()? {
                if r.len() != n + 1 {
                    return Err(e.err(format!("Gamma generator has {} entries, expected n+1 = {}", r.len(), n + 1)));
                }
                target.gamma.push(r);
            }
        }
    }

    let spec = ProblemSpec::new(ProblemData {
        n,
        m1,
        q,
        f,
        g,
        control_set,
        l0,
        lhat1,
        psi,
        c2_generators: c2,
        target,
        budget,
        xcheck,
    })
    .map_err(|e| section_err(prob, e.to_string()))?;

    let process = match sections.get("process") {
        None => None,
        Some(sec) => Some(parse_process(sec, &spec)?),
    };

    let multiplier = match sections.get("multiplier") {
        None => None,
        Some(sec) => {
            let num = |k: &str, d: f64| sec.one(k).map(|e| e.number()).transpose().map(|v| v.unwrap_or(d));
            let p_terminal = match sec.one("p") {
                Some(e) => {
                    let v = e.vector()?;
                    if v.len() != n {
                        return Err(e.err(format!("p has {} entries, expected {n}", v.len())));
                    }
                    v
                }
                None => vec![0.0; n],
            };
            Some(MultiplierInput {
                p0: num("p0", 0.0)?,
                pi: num("pi", 0.0)?,
                lambda: num("lambda", 0.0)?,
                p_terminal,
            })
        }
    };

    let mut brackets = Vec::new();
    if let Some(sec) = sections.get("brackets") {
        for e in sec.all("b") {
            let (text, fields) = match e.value.split_once('|') {
                Some((b, f)) => {
                    let idx = f
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().ok().filter(|v| *v >= 1).map(|v| v - 1))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| e.err("field list must be 1-based indices"))?;
                    (b.trim().to_string(), Some(idx))
                }
                None => (e.value.clone(), None),
            };
            brackets.push((text, fields));
        }
    }

    Ok(ProblemFile {
        spec,
        process,
        multiplier,
        brackets,
    })
}

fn parse_process(sec: &Section, spec: &ProblemSpec) -> Result<ProcessInput, ParseError> {
    let m = spec.m();
    let na = spec.control_set.len();
    let control_index = |e: &Entry, v: f64| -> Result<usize, ParseError> {
        if v.fract() != 0.0 || v < 1.0 || v as usize > na {
            return Err(e.err(format!("control index {v} outside 1..={na}")));
        }
        Ok(v as usize - 1)
    };
    let st = sec.all("piece");
    let strict = sec.all("strict");
    if !st.is_empty() && !strict.is_empty() {
        return Err(section_err(sec, "[process] mixes 'piece' and 'strict' lines".into()));
    }
    if !st.is_empty() {
        let mut pieces = Vec::new();
        for e in st {
            let v = e.vector()?;
            if v.len() != m + 3 {
                return Err(e.err(format!("piece needs duration, w0, {m} rates and a control index")));
            }
            let a = control_index(e, v[m + 2])?;
            let p = ControlPiece::new(v[0], v[1], v[2..m + 2].to_vec(), a);
            spec.check_control(p.w0, &p.w, a).map_err(|err| e.err(err.to_string()))?;
            pieces.push(p);
        }
        let ctrl = SpaceTimeControl::new(pieces).map_err(|err| section_err(sec, err.to_string()))?;
        return Ok(ProcessInput::SpaceTime(ctrl));
    }
    if !strict.is_empty() {
        let mut pieces = Vec::new();
        for e in strict {
            let v = e.vector()?;
            if v.len() != m + 2 {
                return Err(e.err(format!("strict piece needs duration, {m} controls and a control index")));
            }
            if v[0].is_nan() || v[0] <= 0.0 {
                return Err(e.err("duration must be positive"));
            }
            let a = control_index(e, v[m + 1])?;
            spec.check_control(1.0, &v[1..m + 1], a).map_err(|err| e.err(err.to_string()))?;
            pieces.push(StrictPiece {
                duration: v[0],
                u: v[1..m + 1].to_vec(),
                a,
            });
        }
        return Ok(ProcessInput::Strict(StrictControl { pieces }));
    }
    Err(section_err(sec, "[process] has no 'piece' or 'strict' lines".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const JUMP: &str = "\
[problem]
n = 1
m1 = 1
K = 2
xcheck = 0

[dynamics]
f.1 = 0
g1.1 = 1

[cost]
Psi = t

[target]
A_T = 0, 1
b_T = 1
Gamma = 1, 0; -1, 0

[process]
piece = 1.0, 0, 1, 1

[multiplier]
p0 = -1
lambda = 1
p = 0
";

    #[test]
    fn parses_scalar_jump() {
        let f = parse_problem(JUMP).unwrap();
        assert_eq!(f.spec.n, 1);
        assert_eq!(f.spec.budget, 2.0);
        assert_eq!(f.spec.target.gamma.len(), 2);
        let ctrl = f.process.unwrap().space_time();
        assert_eq!(ctrl.pieces.len(), 1);
        assert_eq!(ctrl.pieces[0].w, vec![1.0]);
        let m = f.multiplier.unwrap();
        assert_eq!((m.p0, m.pi, m.lambda, m.p_terminal), (-1.0, 0.0, 1.0, vec![0.0]));
    }

    #[test]
    fn expression_errors_carry_location() {
        let bad = JUMP.replace("g1.1 = 1", "g1.1 = 1 + * x1");
        let err = parse_problem(&bad).unwrap_err();
        assert_eq!(err.line, 9);
        assert!(err.column > 8, "{err}");
        assert!(err.message.contains("malformed expression"));
    }

    #[test]
    fn structural_errors() {
        let e = parse_problem("n = 1").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse_problem("[problem]\n[bogus]\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_problem(&JUMP.replace("xcheck = 0", "xcheck = 0, 1")).unwrap_err();
        assert_eq!(e.line, 5);
        let e = parse_problem(&JUMP.replace("f.1 = 0\n", "")).unwrap_err();
        assert!(e.message.contains("f.1"));
        let e = parse_problem(&JUMP.replace("piece = 1.0, 0, 1, 1", "piece = 1.0, 0, 1, 3")).unwrap_err();
        assert!(e.message.contains("control index"));
    }

    #[test]
    fn strict_process_and_options() {
        let text = "\
[problem]
n = 2
m1 = 1
m2 = 1
q = 1
K = inf
xcheck = 0, 0
[dynamics]
f.1 = x2
f.2 = a1
g1.1 = 1
g1.2 = 0
g2.1 = 0
g2.2 = 1
[controlset]
a = -1; 1
[cone]
gen = 1
[smoothness]
g1 = 2
[cost]
l0 = 1
[process]
strict = 1.0, 1, 0, 2
";
        let f = parse_problem(text).unwrap();
        assert_eq!(f.spec.control_set, vec![vec![-1.0], vec![1.0]]);
        assert_eq!(f.spec.g[0].smoothness(), Smoothness::Finite(2));
        assert!(f.spec.budget.is_infinite());
        let st = f.process.unwrap().space_time();
        assert!((st.total_duration() - 2.0).abs() < 1e-15);
        let bad = text.replace("strict = 1.0, 1, 0, 2", "strict = 1.0, 1, -1, 2");
        assert!(parse_problem(&bad).unwrap_err().message.contains("cone"));
    }
}
