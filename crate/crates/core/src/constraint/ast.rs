use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    String,
    Int,
}

/// Security level of a variable: the secret is high, the attacker's input low.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
    pub level: Level,
}

impl Var {
    pub fn string(name: &str, level: Level) -> Self {
        Self {
            name: name.to_string(),
            sort: Sort::String,
            level,
        }
    }
}

/// Declared variables of a constraint system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    vars: Vec<Var>,
}

impl Signature {
    /// The usual secret `h` and input `l`.
    pub fn high_low() -> Self {
        Self {
            vars: vec![Var::string("h", Level::High), Var::string("l", Level::Low)],
        }
    }

    /// Adds a declaration; returns false when the name is already taken.
    pub fn declare(&mut self, var: Var) -> bool {
        if self.get(&var.name).is_some() {
            return false;
        }
        self.vars.push(var);
        true
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn unique_string(&self, level: Level) -> Option<&Var> {
        let mut it = self
            .vars
            .iter()
            .filter(|v| v.level == level && v.sort == Sort::String);
        let first = it.next()?;
        it.next().is_none().then_some(first)
    }

    pub fn high(&self) -> Option<&Var> {
        self.unique_string(Level::High)
    }

    pub fn low(&self) -> Option<&Var> {
        self.unique_string(Level::Low)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    CharAt(String, usize),
    Length(String),
    Concat(Box<Term>, Box<Term>),
    Var(String),
    Str(String),
    Int(i64),
}

impl Term {
    pub fn concat(a: Term, b: Term) -> Term {
        Term::Concat(Box::new(a), Box::new(b))
    }

    pub fn str(s: &str) -> Term {
        Term::Str(s.to_string())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn char_at(name: &str, i: usize) -> Term {
        Term::CharAt(name.to_string(), i)
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::CharAt(v, _) | Term::Length(v) | Term::Var(v) => {
                out.insert(v.as_str());
            }
            Term::Concat(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Str(_) | Term::Int(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    /// The operator obtained by swapping operands.
    pub fn flipped(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

/// Boolean formula over string and integer comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
    Not(Box<Constraint>),
    Cmp(CmpOp, Term, Term),
    /// `var` is exactly the given literal.
    EqConst(String, String),
}

impl Constraint {
    pub fn truth() -> Self {
        Constraint::And(Vec::new())
    }

    pub fn falsity() -> Self {
        Constraint::Not(Box::new(Constraint::truth()))
    }

    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Self {
        Constraint::Cmp(op, a, b)
    }

    pub fn negate(self) -> Self {
        Constraint::Not(Box::new(self))
    }

    pub fn and(self, other: Constraint) -> Self {
        match self {
            Constraint::And(mut cs) => {
                cs.push(other);
                Constraint::And(cs)
            }
            c => Constraint::And(vec![c, other]),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
            Constraint::Not(c) => c.collect_vars(out),
            Constraint::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Constraint::EqConst(v, _) => {
                out.insert(v.as_str());
            }
        }
    }

    /// Number of atoms.
    pub fn size(&self) -> usize {
        match self {
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().map(Constraint::size).sum(),
            Constraint::Not(c) => c.size(),
            Constraint::Cmp(..) | Constraint::EqConst(..) => 1,
        }
    }
}

fn write_str_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::CharAt(v, i) => write!(f, "(charAt {v} {i})"),
            Term::Length(v) => write!(f, "(length {v})"),
            Term::Concat(a, b) => write!(f, "(concat {a} {b})"),
            Term::Var(v) => f.write_str(v),
            Term::Str(s) => write_str_literal(f, s),
            Term::Int(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, head: &str, cs: &[Constraint]| {
            write!(f, "({head}")?;
            for c in cs {
                write!(f, " {c}")?;
            }
            f.write_str(")")
        };
        match self {
            Constraint::And(cs) => list(f, "and", cs),
            Constraint::Or(cs) => list(f, "or", cs),
            Constraint::Not(c) => write!(f, "(not {c})"),
            Constraint::Cmp(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
            Constraint::EqConst(v, s) => {
                write!(f, "(eqConst {v} ")?;
                write_str_literal(f, s)?;
                f.write_str(")")
            }
        }
    }
}
