//! Benchmark targets: path constraints with instruction costs, plus a direct
//! implementation of each cost function for cross-checking.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{from_constraint, Dfa, Sampler};
use crate::constraint::{parse_file, CmpOp, Constraint, ConstraintFile, Domain, LengthMode, Signature, Term};
use crate::count::count_models;
use crate::engine::{Attack, PathConstraint};
use crate::error::{Error, Result};

/// Indistinguishability threshold used by every built-in target.
pub const DEFAULT_DELTA: u64 = 10;

pub const BUILTIN_NAMES: [&str; 6] = ["pci", "pcs", "se", "si", "scoi", "io"];

type CostFn = Arc<dyn Fn(&str, &str) -> u64 + Send + Sync>;

#[derive(Clone)]
pub struct Target {
    pub name: String,
    pub domain: Domain,
    pub signature: Signature,
    pub paths: Vec<PathConstraint>,
    pub delta: u64,
    cost: Option<CostFn>,
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Target")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("paths", &self.paths.len())
            .field("delta", &self.delta)
            .field("concrete_cost", &self.cost.is_some())
            .finish()
    }
}

fn char_at(v: &str, i: usize) -> Term {
    Term::char_at(v, i)
}

fn eq(a: Term, b: Term) -> Constraint {
    Constraint::cmp(CmpOp::Eq, a, b)
}

fn cmp(op: CmpOp, a: Term, b: Term) -> Constraint {
    Constraint::cmp(op, a, b)
}

/// `charAt(l, j) = charAt(h, j)` for every `j < i`.
fn prefix_equal(i: usize) -> Vec<Constraint> {
    (0..i).map(|j| eq(char_at("l", j), char_at("h", j))).collect()
}

fn first_mismatch(h: &str, l: &str) -> Option<usize> {
    h.chars().zip(l.chars()).position(|(a, b)| a != b)
}

impl Target {
    fn new(name: &str, domain: Domain, paths: Vec<PathConstraint>, cost: CostFn) -> Self {
        Self {
            name: name.to_string(),
            domain,
            signature: Signature::high_low(),
            paths,
            delta: DEFAULT_DELTA,
            cost: Some(cost),
        }
    }

    /// Reads a target from DSL text; the threshold defaults to
    /// [`DEFAULT_DELTA`] when the file does not set one.
    pub fn from_dsl(name: &str, text: &str, fallback: Option<&Domain>) -> Result<Self> {
        Self::from_file(name, parse_file(text, fallback)?)
    }

    pub fn from_file(name: &str, file: ConstraintFile) -> Result<Self> {
        if file.signature.high().is_none() || file.signature.low().is_none() {
            return Err(Error::BadSignature);
        }
        if file.paths.is_empty() {
            return Err(Error::NoPaths);
        }
        Ok(Self {
            name: name.to_string(),
            domain: file.domain,
            signature: file.signature,
            paths: file.paths.into_iter().map(|(c, p)| PathConstraint::new(p, c)).collect(),
            delta: file.delta.unwrap_or(DEFAULT_DELTA),
            cost: None,
        })
    }

    pub fn to_file(&self) -> ConstraintFile {
        ConstraintFile {
            domain: self.domain.clone(),
            signature: self.signature.clone(),
            delta: Some(self.delta),
            paths: self.paths.iter().map(|p| (p.cost, p.constraint.clone())).collect(),
        }
    }

    pub fn to_dsl(&self) -> String {
        format!("; {} target\n{}", self.name, self.to_file().to_dsl())
    }

    pub fn high(&self) -> &str {
        &self.signature.high().expect("checked on construction").name
    }

    pub fn low(&self) -> &str {
        &self.signature.low().expect("checked on construction").name
    }

    /// Instruction count of the reference implementation, when one exists.
    pub fn concrete_cost(&self, h: &str, l: &str) -> Option<u64> {
        self.cost.as_ref().map(|f| f(h, l))
    }

    pub fn with_delta(mut self, delta: u64) -> Self {
        self.delta = delta;
        self
    }

    pub fn attack(&self) -> Result<Attack> {
        Attack::new(&self.domain, &self.signature, &self.paths, self.delta)
    }

    /// Exact tautology and disjointness checks by model counting, then a
    /// sampled comparison of observed classes against the concrete cost.
    pub fn audit<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<AuditReport> {
        let tracks = [self.high(), self.low()];
        let dfas: Vec<Dfa> = self
            .paths
            .iter()
            .map(|p| from_constraint(&p.constraint, &self.domain, &tracks))
            .collect::<Result<_>>()?;
        let path_sum: BigUint = dfas.iter().map(|a| count_models(a).count).sum();
        let mut union: Option<Dfa> = None;
        for a in &dfas {
            union = Some(match union {
                None => a.clone(),
                Some(u) => u.union(a)?,
            });
        }
        let covered = union.map(|u| count_models(&u).count).unwrap_or_default();
        let pairs = self.domain.size_of(self.high()) * self.domain.size_of(self.low());

        let attack = self.attack()?;
        let hs = from_constraint(&Constraint::truth(), &self.domain, &[self.high()])?;
        let ls = from_constraint(&Constraint::truth(), &self.domain, &[self.low()])?;
        let (hs, ls) = (Sampler::new(&hs), Sampler::new(&ls));
        let mut partition_failures = 0;
        let mut cost_mismatches = 0;
        for _ in 0..samples {
            let h = hs.sample(rng)?.remove(self.high()).unwrap_or_default();
            let l = ls.sample(rng)?.remove(self.low()).unwrap_or_default();
            let matched = attack.matching_classes(&h, &l)?;
            if matched.len() != 1 {
                partition_failures += 1;
                continue;
            }
            if let Some(c) = self.concrete_cost(&h, &l) {
                let class = &attack.classes()[matched[0]];
                if !(class.cost_range.0..=class.cost_range.1).contains(&c) {
                    cost_mismatches += 1;
                }
            }
        }
        Ok(AuditReport {
            target: self.name.clone(),
            paths: self.paths.len(),
            classes: attack.classes().len(),
            pairs,
            covered,
            path_sum,
            samples,
            partition_failures,
            cost_mismatches,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub target: String,
    pub paths: usize,
    pub classes: usize,
    /// Size of the `(h, l)` space.
    pub pairs: BigUint,
    /// Pairs satisfying at least one path.
    pub covered: BigUint,
    /// Sum of the per-path model counts.
    pub path_sum: BigUint,
    pub samples: usize,
    pub partition_failures: usize,
    pub cost_mismatches: usize,
}

impl AuditReport {
    pub fn is_total(&self) -> bool {
        self.covered == self.pairs
    }

    /// Paths are pairwise disjoint exactly when their counts add up to the
    /// size of their union.
    pub fn is_disjoint(&self) -> bool {
        self.path_sum == self.covered
    }

    pub fn passed(&self) -> bool {
        self.is_total() && self.is_disjoint() && self.partition_failures == 0 && self.cost_mismatches == 0
    }
}

/// Early-exit PIN comparison: `n + 1` paths costing `63 + 15·i` for a first
/// mismatch at `i` (or a full match when `i = n`).
pub fn gen_pin_check(n: usize, alphabet: &str) -> Result<Target> {
    let domain = Domain::new(alphabet, n, LengthMode::Exact)?;
    let paths = (0..=n)
        .map(|i| {
            let mut parts = prefix_equal(i);
            if i < n {
                parts.push(cmp(CmpOp::Ne, char_at("l", i), char_at("h", i)));
            }
            PathConstraint::new(Constraint::And(parts), 63 + 15 * i as u64)
        })
        .collect();
    let cost = move |h: &str, l: &str| 63 + 15 * first_mismatch(h, l).unwrap_or(n) as u64;
    Ok(Target::new("pci", domain, paths, Arc::new(cost)))
}

/// Comparison without early exit: one path per mismatch pattern, all with
/// the same cost.
pub fn gen_constant_time_check(n: usize, alphabet: &str) -> Result<Target> {
    let domain = Domain::new(alphabet, n, LengthMode::Exact)?;
    let cost = 27 + 30 * n as u64;
    let paths = (0..1usize << n)
        .map(|mask| {
            let parts = (0..n)
                .map(|j| {
                    let op = if mask >> j & 1 == 1 { CmpOp::Ne } else { CmpOp::Eq };
                    cmp(op, char_at("l", j), char_at("h", j))
                })
                .collect();
            PathConstraint::new(Constraint::And(parts), cost)
        })
        .collect();
    Ok(Target::new("pcs", domain, paths, Arc::new(move |_: &str, _: &str| cost)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    /// `h <= l` against `h > l`.
    Direct,
    /// `h < l·c` against `h >= l·c` for the first alphabet symbol `c`.
    Concat,
    /// Character-wise equality that exits at the first difference, with
    /// the direction of the difference affecting the cost.
    Equals,
    /// Position of the single character `l` in `h`.
    IndexOf,
}

pub fn gen_string_inequality(kind: InequalityKind, domain: &Domain) -> Result<Target> {
    let pc = PathConstraint::new;
    match kind {
        InequalityKind::Direct => {
            let paths = vec![
                pc(cmp(CmpOp::Le, Term::var("h"), Term::var("l")), 42),
                pc(cmp(CmpOp::Gt, Term::var("h"), Term::var("l")), 67),
            ];
            let d = domain.clone();
            let cost = move |h: &str, l: &str| if lex(&d, h, l) != Ordering::Greater { 42 } else { 67 };
            Ok(Target::new("si", domain.clone(), paths, Arc::new(cost)))
        }
        InequalityKind::Concat => {
            let first = domain.alphabet()[0].to_string();
            let lc = || Term::concat(Term::var("l"), Term::Str(first.clone()));
            let paths = vec![
                pc(cmp(CmpOp::Lt, Term::var("h"), lc()), 47),
                pc(cmp(CmpOp::Ge, Term::var("h"), lc()), 72),
            ];
            let d = domain.clone();
            let suffix = first.clone();
            let cost = move |h: &str, l: &str| {
                if lex(&d, h, &format!("{l}{suffix}")) == Ordering::Less {
                    47
                } else {
                    72
                }
            };
            Ok(Target::new("scoi", domain.clone(), paths, Arc::new(cost)))
        }
        InequalityKind::Equals => {
            let n = domain.length_bound();
            let mut paths = Vec::with_capacity(2 * n + 1);
            for i in 0..n {
                for (op, extra) in [(CmpOp::Lt, 0), (CmpOp::Gt, 15)] {
                    let mut parts = prefix_equal(i);
                    parts.push(cmp(op, char_at("l", i), char_at("h", i)));
                    paths.push(pc(Constraint::And(parts), 40 + 30 * i as u64 + extra));
                }
            }
            paths.push(pc(Constraint::And(prefix_equal(n)), 40 + 30 * n as u64));
            let d = domain.clone();
            let cost = move |h: &str, l: &str| {
                let hs: Vec<char> = h.chars().collect();
                let ls: Vec<char> = l.chars().collect();
                match (0..n).find(|&i| hs[i] != ls[i]) {
                    None => 40 + 30 * n as u64,
                    Some(i) => {
                        let below = d.symbol_index(ls[i]) < d.symbol_index(hs[i]);
                        40 + 30 * i as u64 + if below { 0 } else { 15 }
                    }
                }
            };
            Ok(Target::new("se", domain.clone(), paths, Arc::new(cost)))
        }
        InequalityKind::IndexOf => {
            let domain = domain.clone().with_track_length("l", 1)?;
            let n = domain.track_len("h");
            let mut paths = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let mut parts: Vec<Constraint> =
                    (0..i).map(|j| cmp(CmpOp::Ne, char_at("h", j), char_at("l", 0))).collect();
                if i < n {
                    parts.push(eq(char_at("h", i), char_at("l", 0)));
                }
                paths.push(pc(Constraint::And(parts), 30 + 15 * i as u64));
            }
            let cost = move |h: &str, l: &str| {
                let c = l.chars().next();
                30 + 15 * h.chars().position(|x| Some(x) == c).unwrap_or(n) as u64
            };
            Ok(Target::new("io", domain, paths, Arc::new(cost)))
        }
    }
}

/// Dictionary order by alphabet position.
fn lex(d: &Domain, a: &str, b: &str) -> Ordering {
    let key = |s: &str| s.chars().map(|c| d.symbol_index(c)).collect::<Vec<_>>();
    key(a).cmp(&key(b))
}

const UPPER: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const DIGITS: &str = "0123456789";

/// A shipped target by name. `length` overrides the secret length.
pub fn builtin(name: &str, length: Option<usize>) -> Result<Target> {
    let upper = |n: usize| Domain::new(UPPER, n, LengthMode::Exact);
    match name.to_ascii_lowercase().as_str() {
        "pci" => gen_pin_check(length.unwrap_or(4), DIGITS),
        "pcs" => gen_constant_time_check(length.unwrap_or(4), UPPER),
        "se" => gen_string_inequality(InequalityKind::Equals, &upper(length.unwrap_or(4))?),
        "si" => gen_string_inequality(InequalityKind::Direct, &upper(length.unwrap_or(2))?),
        "scoi" => gen_string_inequality(InequalityKind::Concat, &upper(length.unwrap_or(4))?),
        "io" => gen_string_inequality(InequalityKind::IndexOf, &upper(length.unwrap_or(8))?),
        other => Err(Error::UnknownTarget(other.to_string())),
    }
}
