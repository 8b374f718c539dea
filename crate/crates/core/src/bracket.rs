//! Formal iterated brackets over variables `X_j`.
//!
//! Leaves read left to right must carry consecutive indices; concrete vector
//! fields are attached separately through [`crate::field::FieldAssignment`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FormalBracket {
    Leaf(u32),
    Pair(Box<FormalBracket>, Box<FormalBracket>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Left,
    Right,
}

/// Address of a subbracket occurrence: the steps taken from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BracketPath(pub Vec<Step>);

impl BracketPath {
    pub fn root() -> Self {
        BracketPath(Vec::new())
    }

    pub fn child(&self, step: Step) -> Self {
        let mut steps = self.0.clone();
        steps.push(step);
        BracketPath(steps)
    }

    /// Parses strings such as `"LR"`; the empty string is the root.
    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'L' | 'l' => Ok(Step::Left),
                'R' | 'r' => Ok(Step::Right),
                _ => Err(Error::NotASubbracket),
            })
            .collect::<Result<Vec<_>>>()
            .map(BracketPath)
    }
}

impl fmt::Display for BracketPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Step::Left => "L",
                Step::Right => "R",
            })?;
        }
        Ok(())
    }
}

/// Required differentiability order for each leaf variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SmoothnessRequirement(pub BTreeMap<u32, u32>);

impl SmoothnessRequirement {
    pub fn get(&self, j: u32) -> Option<u32> {
        self.0.get(&j).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().map(|(j, d)| (*j, *d))
    }

    /// Entrywise maximum of two ledgers.
    pub fn max_merge(&self, other: &SmoothnessRequirement) -> SmoothnessRequirement {
        let mut out = self.0.clone();
        for (j, d) in other.iter() {
            let e = out.entry(j).or_insert(d);
            *e = (*e).max(d);
        }
        SmoothnessRequirement(out)
    }
}

impl fmt::Display for SmoothnessRequirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (j, d)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "X{j}:{d}")?;
        }
        f.write_str("}")
    }
}

impl FormalBracket {
    /// A single variable `X_j`, `j >= 1`.
    pub fn leaf(j: u32) -> Result<Self> {
        if j == 0 {
            return Err(Error::MalformedBracket {
                offset: 0,
                reason: "variable indices start at 1".to_string(),
            });
        }
        Ok(FormalBracket::Leaf(j))
    }

    /// `[b1, b2]`; the leaves of `b2` must continue those of `b1`.
    pub fn pair(b1: FormalBracket, b2: FormalBracket) -> Result<Self> {
        if b1.last_index() + 1 != b2.first_index() {
            let text = format!("[{b1},{b2}]");
            return Err(Error::NonConsecutiveSeq(text));
        }
        Ok(FormalBracket::Pair(Box::new(b1), Box::new(b2)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let b = p.bracket()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(b)
    }

    pub fn first_index(&self) -> u32 {
        match self {
            FormalBracket::Leaf(j) => *j,
            FormalBracket::Pair(l, _) => l.first_index(),
        }
    }

    pub fn last_index(&self) -> u32 {
        match self {
            FormalBracket::Leaf(j) => *j,
            FormalBracket::Pair(_, r) => r.last_index(),
        }
    }

    pub fn length(&self) -> usize {
        match self {
            FormalBracket::Leaf(_) => 1,
            FormalBracket::Pair(l, r) => l.length() + r.length(),
        }
    }

    /// Leaf indices read left to right.
    pub fn seq(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.length());
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u32>) {
        match self {
            FormalBracket::Leaf(j) => out.push(*j),
            FormalBracket::Pair(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn switch_number(&self) -> u64 {
        match self {
            FormalBracket::Leaf(_) => 1,
            FormalBracket::Pair(l, r) => 2 * (l.switch_number() + r.switch_number()),
        }
    }

    pub fn factorize(&self) -> Result<(&FormalBracket, &FormalBracket)> {
        match self {
            FormalBracket::Leaf(_) => Err(Error::LengthOne),
            FormalBracket::Pair(l, r) => Ok((l, r)),
        }
    }

    pub fn subtree(&self, path: &BracketPath) -> Result<&FormalBracket> {
        let mut node = self;
        for step in &path.0 {
            node = match (node, step) {
                (FormalBracket::Pair(l, _), Step::Left) => l,
                (FormalBracket::Pair(_, r), Step::Right) => r,
                (FormalBracket::Leaf(_), _) => return Err(Error::NotASubbracket),
            };
        }
        Ok(node)
    }

    /// Number of differentiations of the occurrence at `path`: every enclosing
    /// pair differentiates it once, so this is the depth of the occurrence.
    pub fn differentiation_count(&self, path: &BracketPath) -> Result<u32> {
        self.subtree(path)?;
        Ok(path.0.len() as u32)
    }

    /// Path to the leaf `X_j`, if present.
    pub fn leaf_path(&self, j: u32) -> Option<BracketPath> {
        match self {
            FormalBracket::Leaf(i) => (*i == j).then(BracketPath::root),
            FormalBracket::Pair(l, r) => {
                if let Some(p) = l.leaf_path(j) {
                    let mut steps = vec![Step::Left];
                    steps.extend(p.0);
                    Some(BracketPath(steps))
                } else {
                    r.leaf_path(j).map(|p| {
                        let mut steps = vec![Step::Right];
                        steps.extend(p.0);
                        BracketPath(steps)
                    })
                }
            }
        }
    }

    /// `d(X_j; b) + k` for every leaf.
    pub fn required_smoothness(&self, k: u32) -> SmoothnessRequirement {
        let mut out = BTreeMap::new();
        self.ledger(k, &mut out);
        SmoothnessRequirement(out)
    }

    fn ledger(&self, depth: u32, out: &mut BTreeMap<u32, u32>) {
        match self {
            FormalBracket::Leaf(j) => {
                out.insert(*j, depth);
            }
            FormalBracket::Pair(l, r) => {
                l.ledger(depth + 1, out);
                r.ledger(depth + 1, out);
            }
        }
    }

    /// The same shape with leaves renumbered from `start`.
    pub fn renumbered(&self, start: u32) -> FormalBracket {
        let shift = start as i64 - self.first_index() as i64;
        self.map_leaves(&|j| (j as i64 + shift) as u32)
    }

    fn map_leaves(&self, f: &dyn Fn(u32) -> u32) -> FormalBracket {
        match self {
            FormalBracket::Leaf(j) => FormalBracket::Leaf(f(*j)),
            FormalBracket::Pair(l, r) => FormalBracket::Pair(Box::new(l.map_leaves(f)), Box::new(r.map_leaves(f))),
        }
    }

    /// All bracket shapes of exactly `length` leaves, numbered from `start`.
    pub fn enumerate(length: usize, start: u32) -> Vec<FormalBracket> {
        if length == 0 {
            return Vec::new();
        }
        if length == 1 {
            return vec![FormalBracket::Leaf(start)];
        }
        let mut out = Vec::new();
        for left_len in 1..length {
            let lefts = Self::enumerate(left_len, start);
            let rights = Self::enumerate(length - left_len, start + left_len as u32);
            for l in &lefts {
                for r in &rights {
                    out.push(FormalBracket::Pair(Box::new(l.clone()), Box::new(r.clone())));
                }
            }
        }
        out
    }

    /// `[b2, b1]` for `b = [b1, b2]`, renumbered so the result is valid.
    pub fn flipped(&self) -> Result<FormalBracket> {
        let (l, r) = self.factorize()?;
        let start = self.first_index();
        let nr = r.renumbered(start);
        let nl = l.renumbered(start + r.length() as u32);
        FormalBracket::pair(nr, nl)
    }
}

impl fmt::Display for FormalBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormalBracket::Leaf(j) => write!(f, "X{j}"),
            FormalBracket::Pair(l, r) => write!(f, "[{l},{r}]"),
        }
    }
}

impl core::str::FromStr for FormalBracket {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FormalBracket::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> Error {
        Error::MalformedBracket {
            offset: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn bracket(&mut self) -> Result<FormalBracket> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'X') | Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.err("expected variable index"));
                }
                let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let j: u32 = digits.parse().map_err(|_| self.err("index out of range"))?;
                if j == 0 {
                    return Err(Error::MalformedBracket {
                        offset: start,
                        reason: "variable indices start at 1".to_string(),
                    });
                }
                Ok(FormalBracket::Leaf(j))
            }
            Some(b'[') => {
                self.pos += 1;
                let l = self.bracket()?;
                self.expect(b',')?;
                let r = self.bracket()?;
                self.expect(b']')?;
                FormalBracket::pair(l, r)
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Human-readable ledger line, e.g. `X3:5 X4:5`.
pub fn ledger_string(req: &SmoothnessRequirement) -> String {
    let mut s = String::new();
    for (i, (j, d)) in req.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&format!("X{j}:{d}"));
    }
    s
}
