//! Constraint-to-automaton compilation.
//!
//! Atoms are compiled per vector of track lengths (a single vector in exact
//! mode). For fixed lengths every string term is a known sequence of symbol
//! sources, either a literal symbol or "character `i` of track `t`", so a
//! comparison is a lexicographic scan over two such sequences. The automaton
//! reads one tuple per position, buffers the symbols that the scan still
//! needs and settles the comparison as soon as both sides are available.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::ops::{build, odometer};
use super::Dfa;
use crate::constraint::{CmpOp, Constraint, Domain, Term};
use crate::error::{Error, Result};

/// Intermediate results of a connective are minimized past this size, which
/// keeps long conjunctions from growing with the product of their parts.
const MINIMIZE_ABOVE: usize = 256;

fn shrink(a: Dfa) -> Dfa {
    if a.num_states() > MINIMIZE_ABOVE {
        a.minimize()
    } else {
        a
    }
}

enum Compiled {
    Const(bool),
    Auto(Dfa),
}

/// Builds the automaton of `c` over `tracks`, which must cover the free
/// variables of `c`.
pub fn from_constraint(c: &Constraint, domain: &Domain, tracks: &[&str]) -> Result<Dfa> {
    let domain = Arc::new(domain.clone());
    let mut all: Vec<String> = tracks.iter().map(|t| t.to_string()).collect();
    all.sort();
    all.dedup();
    if all.is_empty() {
        return Err(Error::Unsupported("an automaton needs at least one track".into()));
    }
    if let Some(v) = c.free_variables().into_iter().find(|v| all.binary_search_by(|t| t.as_str().cmp(v)).is_err()) {
        return Err(Error::UnknownTrack(v.to_string()));
    }
    match compile(c, &domain)? {
        Compiled::Const(true) => Dfa::universe_arc(domain, all),
        Compiled::Const(false) => Ok(Dfa::empty_over(domain, all)),
        Compiled::Auto(a) => {
            if a.tracks == all {
                Ok(a)
            } else {
                let wf = Dfa::universe_arc(domain, all)?;
                a.intersect(&wf)
            }
        }
    }
}

fn compile(c: &Constraint, domain: &Arc<Domain>) -> Result<Compiled> {
    match c {
        Constraint::And(cs) => {
            let mut acc: Option<Dfa> = None;
            for child in cs {
                match compile(child, domain)? {
                    Compiled::Const(true) => {}
                    Compiled::Const(false) => return Ok(Compiled::Const(false)),
                    Compiled::Auto(a) => {
                        acc = Some(match acc {
                            None => a,
                            Some(prev) => shrink(prev.intersect(&a)?),
                        });
                    }
                }
            }
            Ok(acc.map_or(Compiled::Const(true), Compiled::Auto))
        }
        Constraint::Or(cs) => {
            let mut acc: Option<Dfa> = None;
            for child in cs {
                match compile(child, domain)? {
                    Compiled::Const(false) => {}
                    Compiled::Const(true) => return Ok(Compiled::Const(true)),
                    Compiled::Auto(a) => {
                        acc = Some(match acc {
                            None => a,
                            Some(prev) => shrink(prev.union(&a)?),
                        });
                    }
                }
            }
            Ok(acc.map_or(Compiled::Const(false), Compiled::Auto))
        }
        Constraint::Not(inner) => Ok(match compile(inner, domain)? {
            Compiled::Const(b) => Compiled::Const(!b),
            Compiled::Auto(a) => Compiled::Auto(a.complement()?),
        }),
        Constraint::Cmp(op, a, b) => compile_atom(*op, a, b, domain),
        Constraint::EqConst(v, s) => compile_atom(CmpOp::Eq, &Term::Var(v.clone()), &Term::Str(s.clone()), domain),
    }
}

fn is_int_term(t: &Term) -> bool {
    matches!(t, Term::Int(_) | Term::Length(_))
}

fn term_vars<'a>(t: &'a Term, out: &mut BTreeSet<&'a str>) {
    match t {
        Term::CharAt(v, _) | Term::Length(v) | Term::Var(v) => {
            out.insert(v);
        }
        Term::Concat(a, b) => {
            term_vars(a, out);
            term_vars(b, out);
        }
        Term::Str(_) | Term::Int(_) => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Src {
    Lit(u8),
    /// Character `idx` of atom track `track`.
    Track(u8, u8),
}

/// What an atom reduces to once track lengths are fixed.
enum Check {
    Fixed(bool),
    Lex(Vec<Src>, Vec<Src>),
}

fn int_value(t: &Term, tracks: &[&str], lens: &[usize]) -> Result<i64> {
    match t {
        Term::Int(n) => Ok(*n),
        Term::Length(v) => Ok(lens[tracks.iter().position(|t| t == v).expect("track of atom")] as i64),
        Term::Var(v) => Err(Error::Unsupported(format!("integer variable `{v}`"))),
        other => Err(Error::Unsupported(format!("`{other}` in integer position"))),
    }
}

fn sources(t: &Term, domain: &Domain, tracks: &[&str], lens: &[usize], out: &mut Vec<Src>) -> Result<()> {
    let track = |v: &str| tracks.iter().position(|t| *t == v).expect("track of atom");
    match t {
        Term::Var(v) => {
            let ti = track(v);
            out.extend((0..lens[ti]).map(|i| Src::Track(ti as u8, i as u8)));
        }
        Term::CharAt(v, i) => {
            let ti = track(v);
            if *i < lens[ti] {
                out.push(Src::Track(ti as u8, *i as u8));
            }
        }
        Term::Str(s) => {
            for c in s.chars() {
                let code = domain.symbol_index(c).ok_or(Error::SymbolOutsideAlphabet { symbol: c })?;
                out.push(Src::Lit(code));
            }
        }
        Term::Concat(a, b) => {
            sources(a, domain, tracks, lens, out)?;
            sources(b, domain, tracks, lens, out)?;
        }
        Term::Length(_) | Term::Int(_) => {
            return Err(Error::Unsupported(format!("integer term `{t}` in string position")))
        }
    }
    Ok(())
}

fn check_for(op: CmpOp, a: &Term, b: &Term, domain: &Domain, tracks: &[&str], lens: &[usize]) -> Result<Check> {
    if is_int_term(a) || is_int_term(b) {
        let x = int_value(a, tracks, lens)?;
        let y = int_value(b, tracks, lens)?;
        return Ok(Check::Fixed(op.holds(x.cmp(&y))));
    }
    let mut sa = Vec::new();
    let mut sb = Vec::new();
    sources(a, domain, tracks, lens, &mut sa)?;
    sources(b, domain, tracks, lens, &mut sb)?;
    Ok(Check::Lex(sa, sb))
}

fn compile_atom(op: CmpOp, a: &Term, b: &Term, domain: &Arc<Domain>) -> Result<Compiled> {
    let mut vars = BTreeSet::new();
    term_vars(a, &mut vars);
    term_vars(b, &mut vars);
    let tracks: Vec<&str> = vars.into_iter().collect();

    if tracks.is_empty() {
        return Ok(Compiled::Const(match check_for(op, a, b, domain, &[], &[])? {
            Check::Fixed(v) => v,
            Check::Lex(x, y) => {
                let lit = |s: &[Src]| -> Vec<u8> {
                    s.iter()
                        .map(|s| match s {
                            Src::Lit(c) => *c,
                            Src::Track(..) => unreachable!("closed term"),
                        })
                        .collect()
                };
                op.holds(lit(&x).cmp(&lit(&y)))
            }
        }));
    }
    if domain.width() > u8::MAX as usize {
        return Err(Error::Unsupported("strings longer than 255 symbols".into()));
    }

    let ranges: Vec<Vec<usize>> = tracks.iter().map(|t| domain.admissible_lengths(t).collect()).collect();
    let mut idx = vec![0usize; tracks.len()];
    let mut acc: Option<Dfa> = None;
    loop {
        let lens: Vec<usize> = idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
        let check = check_for(op, a, b, domain, &tracks, &lens)?;
        let part = match check {
            Check::Fixed(false) => None,
            Check::Fixed(true) => Some(scan_automaton(CmpOp::Eq, &[], &[], domain, &tracks, &lens)),
            Check::Lex(x, y) => Some(scan_automaton(op, &x, &y, domain, &tracks, &lens)),
        };
        if let Some(part) = part {
            acc = Some(match acc {
                None => part,
                Some(prev) => prev.union(&part)?,
            });
        }
        if !odometer(&mut idx, |i| ranges[i].len()) {
            break;
        }
    }
    let tracks: Vec<String> = tracks.iter().map(|t| t.to_string()).collect();
    Ok(Compiled::Auto(acc.unwrap_or_else(|| Dfa::empty_over(domain.clone(), tracks))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Progress {
    /// Next index of the lexicographic scan.
    At(u16),
    Done(Ordering),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ScanState {
    pos: u8,
    progress: Progress,
    /// Buffered (track, index, symbol) triples still needed by the scan.
    memory: Vec<(u8, u8, u8)>,
}

/// Automaton for the lexicographic comparison `x op y` with every track of
/// the atom at a fixed length. With empty `x` and `y` and `op` equality this
/// accepts exactly the assignments with those lengths.
fn scan_automaton(op: CmpOp, x: &[Src], y: &[Src], domain: &Arc<Domain>, tracks: &[&str], lens: &[usize]) -> Dfa {
    let width = domain.width();
    let pad = domain.pad();
    let radix = pad as u32 + 1;
    let common = x.len().min(y.len());

    // Last scan index at which each (track, index) source is used.
    let mut last_use: HashMap<(u8, u8), usize> = HashMap::new();
    for (p, s) in x.iter().zip(y).enumerate().flat_map(|(p, (a, b))| [(p, a), (p, b)]) {
        if let Src::Track(t, i) = *s {
            let e = last_use.entry((t, i)).or_insert(p);
            *e = (*e).max(p);
        }
    }

    let settle = |pos: usize, mut progress: Progress, memory: &mut Vec<(u8, u8, u8)>| -> Progress {
        let value = |s: Src, memory: &[(u8, u8, u8)]| -> Option<u8> {
            match s {
                Src::Lit(c) => Some(c),
                Src::Track(t, i) if (i as usize) < pos => memory
                    .iter()
                    .find(|&&(mt, mi, _)| mt == t && mi == i)
                    .map(|&(_, _, c)| c),
                Src::Track(..) => None,
            }
        };
        while let Progress::At(p) = progress {
            let p = p as usize;
            if p == common {
                progress = Progress::Done(x.len().cmp(&y.len()));
                break;
            }
            match (value(x[p], memory), value(y[p], memory)) {
                (Some(a), Some(b)) if a != b => progress = Progress::Done(a.cmp(&b)),
                (Some(_), Some(_)) => progress = Progress::At(p as u16 + 1),
                _ => break,
            }
        }
        match progress {
            Progress::At(p) => memory.retain(|&(t, i, _)| last_use.get(&(t, i)).is_some_and(|&u| u >= p as usize)),
            Progress::Done(_) => memory.clear(),
        }
        progress
    };

    let mut initial_memory = Vec::new();
    let start = ScanState {
        pos: 0,
        progress: settle(0, Progress::At(0), &mut initial_memory),
        memory: initial_memory,
    };

    build(
        domain.clone(),
        tracks.iter().map(|t| t.to_string()).collect(),
        start,
        |st: &ScanState, out| {
            let pos = st.pos as usize;
            if pos == width {
                return;
            }
            let options: Vec<Vec<u8>> = lens
                .iter()
                .map(|&len| if pos < len { (0..pad).collect() } else { vec![pad] })
                .collect();
            let mut idx = vec![0usize; options.len()];
            loop {
                let mut memory = st.memory.clone();
                let mut tuple = 0u32;
                for (t, opts) in options.iter().enumerate().rev() {
                    let c = opts[idx[t]];
                    tuple = tuple * radix + c as u32;
                    if c != pad {
                        if let Progress::At(p) = st.progress {
                            if last_use.get(&(t as u8, pos as u8)).is_some_and(|&u| u >= p as usize) {
                                memory.push((t as u8, pos as u8, c));
                            }
                        }
                    }
                }
                memory.sort_unstable();
                let progress = settle(pos + 1, st.progress, &mut memory);
                out.push((
                    tuple,
                    ScanState {
                        pos: st.pos + 1,
                        progress,
                        memory,
                    },
                ));
                if !odometer(&mut idx, |t| options[t].len()) {
                    break;
                }
            }
        },
        |st| st.pos as usize == width && matches!(st.progress, Progress::Done(ord) if op.holds(ord)),
    )
}
