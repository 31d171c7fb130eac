//! Brute-force reference semantics for constraints: evaluate a formula on a
//! concrete assignment and enumerate every assignment of a small domain.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeMap;

use attack_synth::constraint::{CmpOp, Constraint, Domain, LengthMode, Term};
use rand::Rng;

pub type Asg = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Str(Vec<usize>),
    Int(i64),
}

fn codes(d: &Domain, s: &str) -> Vec<usize> {
    s.chars()
        .map(|c| d.alphabet().iter().position(|&a| a == c).expect("symbol in alphabet"))
        .collect()
}

fn term(t: &Term, asg: &Asg, d: &Domain) -> Value {
    match t {
        Term::CharAt(v, i) => Value::Str(codes(d, &asg[v]).get(*i).map(|&c| vec![c]).unwrap_or_default()),
        Term::Length(v) => Value::Int(asg[v].chars().count() as i64),
        Term::Concat(a, b) => match (term(a, asg, d), term(b, asg, d)) {
            (Value::Str(mut x), Value::Str(y)) => {
                x.extend(y);
                Value::Str(x)
            }
            _ => panic!("ill-sorted concat"),
        },
        Term::Var(v) => Value::Str(codes(d, &asg[v])),
        Term::Str(s) => Value::Str(codes(d, s)),
        Term::Int(n) => Value::Int(*n),
    }
}

fn holds(op: CmpOp, o: Ordering) -> bool {
    match op {
        CmpOp::Eq => o == Ordering::Equal,
        CmpOp::Ne => o != Ordering::Equal,
        CmpOp::Lt => o == Ordering::Less,
        CmpOp::Le => o != Ordering::Greater,
        CmpOp::Gt => o == Ordering::Greater,
        CmpOp::Ge => o != Ordering::Less,
    }
}

/// Truth of `c` under `asg`, straight from the definitions.
pub fn eval(c: &Constraint, asg: &Asg, d: &Domain) -> bool {
    match c {
        Constraint::And(cs) => cs.iter().all(|c| eval(c, asg, d)),
        Constraint::Or(cs) => cs.iter().any(|c| eval(c, asg, d)),
        Constraint::Not(c) => !eval(c, asg, d),
        Constraint::Cmp(op, a, b) => {
            let o = match (term(a, asg, d), term(b, asg, d)) {
                (Value::Str(x), Value::Str(y)) => x.cmp(&y),
                (Value::Int(x), Value::Int(y)) => x.cmp(&y),
                _ => panic!("ill-sorted comparison"),
            };
            holds(*op, o)
        }
        Constraint::EqConst(v, s) => &asg[v] == s,
    }
}

/// Every string `var` may take.
pub fn strings(d: &Domain, var: &str) -> Vec<String> {
    let n = d.track_len(var);
    let lengths: Vec<usize> = match d.length_mode() {
        LengthMode::Exact => vec![n],
        LengthMode::UpTo => (0..=n).collect(),
    };
    let mut out = Vec::new();
    for len in lengths {
        let mut idx = vec![0usize; len];
        loop {
            out.push(idx.iter().map(|&i| d.alphabet()[i]).collect());
            let mut p = 0;
            while p < len {
                idx[p] += 1;
                if idx[p] < d.alphabet().len() {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
            if p == len {
                break;
            }
        }
    }
    out
}

/// Every assignment of `vars`.
pub fn assignments(d: &Domain, vars: &[&str]) -> Vec<Asg> {
    let mut out = vec![Asg::new()];
    for v in vars {
        let vals = strings(d, v);
        out = out
            .into_iter()
            .flat_map(|a| {
                vals.iter().map(move |s| {
                    let mut b = a.clone();
                    b.insert(v.to_string(), s.clone());
                    b
                })
            })
            .collect();
    }
    out
}

pub fn brute_count(c: &Constraint, d: &Domain, vars: &[&str]) -> u64 {
    assignments(d, vars).iter().filter(|a| eval(c, a, d)).count() as u64
}

pub fn asg(pairs: &[(&str, &str)]) -> Asg {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn random_literal<R: Rng>(rng: &mut R, d: &Domain, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| d.alphabet()[rng.gen_range(0..d.alphabet().len())]).collect()
}

fn random_string_term<R: Rng>(rng: &mut R, d: &Domain, depth: usize) -> Term {
    let var = if rng.gen_bool(0.5) { "h" } else { "l" };
    let n = d.length_bound();
    match rng.gen_range(0..if depth > 0 { 5 } else { 4 }) {
        0 => Term::var(var),
        1 => Term::char_at(var, rng.gen_range(0..=n)),
        2 => Term::Str(random_literal(rng, d, n)),
        3 => Term::Str(random_literal(rng, d, 1)),
        _ => Term::concat(random_string_term(rng, d, depth - 1), random_string_term(rng, d, depth - 1)),
    }
}

fn random_atom<R: Rng>(rng: &mut R, d: &Domain) -> Constraint {
    let op = OPS[rng.gen_range(0..OPS.len())];
    match rng.gen_range(0..10) {
        0 => {
            let var = if rng.gen_bool(0.5) { "h" } else { "l" };
            let n = d.length_bound() as i64;
            let rhs = if rng.gen_bool(0.7) {
                Term::Int(rng.gen_range(0..=n + 1))
            } else {
                Term::Length(if var == "h" { "l" } else { "h" }.to_string())
            };
            Constraint::cmp(op, Term::Length(var.to_string()), rhs)
        }
        1 => {
            let var = if rng.gen_bool(0.5) { "h" } else { "l" };
            Constraint::EqConst(var.to_string(), random_literal(rng, d, d.length_bound()))
        }
        _ => Constraint::cmp(op, random_string_term(rng, d, 1), random_string_term(rng, d, 1)),
    }
}

/// A random well-sorted formula over `h` and `l`.
pub fn random_constraint<R: Rng>(rng: &mut R, d: &Domain, depth: usize) -> Constraint {
    if depth == 0 || rng.gen_bool(0.35) {
        return random_atom(rng, d);
    }
    match rng.gen_range(0..3) {
        0 => Constraint::Not(Box::new(random_constraint(rng, d, depth - 1))),
        k => {
            let n = rng.gen_range(0..=3);
            let cs = (0..n).map(|_| random_constraint(rng, d, depth - 1)).collect();
            if k == 1 {
                Constraint::And(cs)
            } else {
                Constraint::Or(cs)
            }
        }
    }
}

/// A small random domain: alphabet of 2 to 4 symbols, bound 1 to 3.
pub fn random_domain<R: Rng>(rng: &mut R) -> Domain {
    let size = rng.gen_range(2..=4);
    let len = rng.gen_range(1..=3);
    let mode = if rng.gen_bool(0.3) { LengthMode::UpTo } else { LengthMode::Exact };
    Domain::new(&"abcd"[..size], len, mode).unwrap()
}
