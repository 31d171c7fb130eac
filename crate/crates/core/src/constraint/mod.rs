//! Constraint language: AST, DSL, substitution and cache keys.

mod ast;
mod domain;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::{CmpOp, Constraint, Level, Signature, Sort, Term, Var};
pub use domain::{Domain, LengthMode};
pub use parse::{parse_constraint, parse_file, ConstraintFile};

use crate::error::{Error, Result};

/// Canonical serialization of a constraint, invariant under reordering of
/// conjuncts and disjuncts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn canonical(c: &Constraint) -> Constraint {
    fn flatten(c: &Constraint, and: bool, out: &mut Vec<Constraint>) {
        match (c, and) {
            (Constraint::And(cs), true) | (Constraint::Or(cs), false) => {
                cs.iter().for_each(|c| flatten(c, and, out))
            }
            _ => out.push(canonical(c)),
        }
    }
    match c {
        Constraint::And(_) | Constraint::Or(_) => {
            let and = matches!(c, Constraint::And(_));
            let mut children = Vec::new();
            flatten(c, and, &mut children);
            children.sort();
            if and {
                Constraint::And(children)
            } else {
                Constraint::Or(children)
            }
        }
        Constraint::Not(inner) => Constraint::Not(Box::new(canonical(inner))),
        Constraint::Cmp(op, a, b) if a > b => Constraint::Cmp(op.flipped(), b.clone(), a.clone()),
        other => other.clone(),
    }
}

pub fn canonical_key(c: &Constraint) -> CacheKey {
    CacheKey(canonical(c).to_string())
}

fn substitute_term(t: &Term, var: &str, value: &str) -> Term {
    match t {
        Term::Var(v) if v == var => Term::Str(value.to_string()),
        Term::CharAt(v, i) if v == var => {
            Term::Str(value.chars().nth(*i).map(String::from).unwrap_or_default())
        }
        Term::Length(v) if v == var => Term::Int(value.chars().count() as i64),
        Term::Concat(a, b) => Term::concat(substitute_term(a, var, value), substitute_term(b, var, value)),
        other => other.clone(),
    }
}

fn substitute_unchecked(c: &Constraint, var: &str, value: &str) -> Constraint {
    match c {
        Constraint::And(cs) => Constraint::And(cs.iter().map(|c| substitute_unchecked(c, var, value)).collect()),
        Constraint::Or(cs) => Constraint::Or(cs.iter().map(|c| substitute_unchecked(c, var, value)).collect()),
        Constraint::Not(inner) => Constraint::Not(Box::new(substitute_unchecked(inner, var, value))),
        Constraint::Cmp(op, a, b) => {
            Constraint::Cmp(*op, substitute_term(a, var, value), substitute_term(b, var, value))
        }
        Constraint::EqConst(v, lit) if v == var => {
            Constraint::Cmp(CmpOp::Eq, Term::str(value), Term::Str(lit.clone()))
        }
        other => other.clone(),
    }
}

/// Replaces every occurrence of `var` by the literal `value`.
pub fn substitute(c: &Constraint, var: &Var, value: &str, domain: &Domain) -> Result<Constraint> {
    if var.sort != Sort::String {
        return Err(Error::NotAStringVar(var.name.clone()));
    }
    domain.validate(&var.name, value)?;
    Ok(substitute_unchecked(c, &var.name, value))
}
