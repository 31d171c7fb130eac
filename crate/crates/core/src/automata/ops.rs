use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::sync::Arc;

use super::{Dfa, DEAD};
use crate::constraint::{Domain, LengthMode};
use crate::error::{Error, Result};

/// Breadth-first construction from an implicit state space. `succ` lists the
/// live transitions of a state; omitted tuples go to the dead sink.
pub(crate) fn build<K, S, A>(domain: Arc<Domain>, tracks: Vec<String>, start: K, mut succ: S, accept: A) -> Dfa
where
    K: Clone + Eq + Hash,
    S: FnMut(&K, &mut Vec<(u32, K)>),
    A: Fn(&K) -> bool,
{
    let mut index: HashMap<K, u32> = HashMap::new();
    let mut keys: Vec<K> = Vec::new();
    let mut accepting = vec![false];
    let mut trans: Vec<Vec<(u32, u32)>> = vec![Vec::new()];

    index.insert(start.clone(), 1);
    keys.push(start);
    let mut buf = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let key = keys[i].clone();
        buf.clear();
        succ(&key, &mut buf);
        let mut row = Vec::with_capacity(buf.len());
        for (tuple, next) in buf.drain(..) {
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = keys.len() as u32 + 1;
                    index.insert(next.clone(), id);
                    keys.push(next);
                    id
                }
            };
            row.push((tuple, id));
        }
        row.sort_unstable_by_key(|&(t, _)| t);
        accepting.push(accept(&key));
        trans.push(row);
        i += 1;
    }

    let dfa = Dfa {
        domain,
        tracks,
        start: 1,
        accepting,
        trans,
    };
    dfa.trim()
}

impl Dfa {
    /// Redirects every state that cannot reach acceptance to the dead sink
    /// and drops unreachable states.
    pub(crate) fn trim(self) -> Dfa {
        let n = self.num_states();
        let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (s, row) in self.trans.iter().enumerate() {
            for &(_, t) in row {
                reverse[t as usize].push(s as u32);
            }
        }
        let mut live = self.accepting.clone();
        let mut stack: Vec<u32> = (0..n as u32).filter(|&s| live[s as usize]).collect();
        while let Some(s) = stack.pop() {
            for &p in &reverse[s as usize] {
                if !live[p as usize] {
                    live[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        live[DEAD as usize] = false;

        if !live[self.start as usize] {
            return Dfa::empty_over(self.domain, self.tracks);
        }

        // Renumber states reachable through live transitions, in BFS order.
        let mut remap = vec![DEAD; n];
        let mut order = vec![self.start];
        remap[self.start as usize] = 1;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            for &(_, t) in &self.trans[s as usize] {
                if live[t as usize] && remap[t as usize] == DEAD {
                    remap[t as usize] = order.len() as u32 + 1;
                    order.push(t);
                }
            }
            i += 1;
        }
        let mut accepting = vec![false];
        let mut trans = vec![Vec::new()];
        for &s in &order {
            accepting.push(self.accepting[s as usize]);
            trans.push(
                self.trans[s as usize]
                    .iter()
                    .filter(|&&(_, t)| live[t as usize])
                    .map(|&(tuple, t)| (tuple, remap[t as usize]))
                    .collect(),
            );
        }
        Dfa {
            domain: self.domain,
            tracks: self.tracks,
            start: 1,
            accepting,
            trans,
        }
    }

    /// The minimal equivalent automaton, by partition refinement.
    pub fn minimize(&self) -> Dfa {
        let trimmed = self.clone().trim();
        let n = trimmed.num_states();
        // dead is class 0; everything else starts split by acceptance
        let mut class: Vec<u32> = (0..n).map(|s| if s == 0 { 0 } else { 1 + trimmed.accepting[s] as u32 }).collect();
        let mut classes = 0;
        loop {
            let mut ids: HashMap<(u32, Vec<(u32, u32)>), u32> = HashMap::new();
            ids.insert((0, Vec::new()), 0);
            let next: Vec<u32> = (0..n)
                .map(|s| {
                    let sig: Vec<(u32, u32)> =
                        trimmed.trans[s].iter().map(|&(t, q)| (t, class[q as usize])).collect();
                    let fresh = ids.len() as u32;
                    *ids.entry((class[s], sig)).or_insert(fresh)
                })
                .collect();
            class = next;
            if ids.len() == classes {
                break;
            }
            classes = ids.len();
        }
        let mut accepting = vec![false; classes];
        let mut trans = vec![Vec::new(); classes];
        for s in 1..n {
            let c = class[s] as usize;
            accepting[c] = trimmed.accepting[s];
            trans[c] = trimmed.trans[s].iter().map(|&(t, q)| (t, class[q as usize])).collect();
        }
        Dfa {
            start: class[trimmed.start as usize],
            domain: trimmed.domain,
            tracks: trimmed.tracks,
            accepting,
            trans,
        }
        .trim()
    }

    pub(crate) fn empty_over(domain: Arc<Domain>, tracks: Vec<String>) -> Dfa {
        Dfa {
            domain,
            tracks,
            start: DEAD,
            accepting: vec![false],
            trans: vec![Vec::new()],
        }
    }

    fn normalized_tracks(tracks: &[&str]) -> Result<Vec<String>> {
        if tracks.is_empty() {
            return Err(Error::Unsupported("an automaton needs at least one track".into()));
        }
        let mut out: Vec<String> = tracks.iter().map(|t| t.to_string()).collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// The empty language over `tracks`.
    pub fn empty(domain: &Domain, tracks: &[&str]) -> Result<Dfa> {
        Ok(Dfa::empty_over(Arc::new(domain.clone()), Dfa::normalized_tracks(tracks)?))
    }

    /// All legal assignments of `tracks`.
    pub fn universe(domain: &Domain, tracks: &[&str]) -> Result<Dfa> {
        Dfa::universe_arc(Arc::new(domain.clone()), Dfa::normalized_tracks(tracks)?)
    }

    pub(crate) fn universe_arc(domain: Arc<Domain>, tracks: Vec<String>) -> Result<Dfa> {
        check_tuple_space(&domain, tracks.len())?;
        let width = domain.width();
        let pad = domain.pad();
        let radix = pad as u32 + 1;
        let lens: Vec<usize> = tracks.iter().map(|t| domain.track_len(t)).collect();
        let up_to = domain.length_mode() == LengthMode::UpTo;
        let dfa = build(
            domain,
            tracks,
            (0usize, 0u32),
            |&(pos, padded), out| {
                if pos == width {
                    return;
                }
                // Per track: (symbol, padded afterwards).
                let options: Vec<Vec<(u8, bool)>> = lens
                    .iter()
                    .enumerate()
                    .map(|(i, &len)| {
                        let already = padded & (1 << i) != 0;
                        if already || pos >= len {
                            vec![(pad, true)]
                        } else if up_to {
                            (0..=pad).map(|c| (c, c == pad)).collect()
                        } else {
                            (0..pad).map(|c| (c, false)).collect()
                        }
                    })
                    .collect();
                let mut idx = vec![0usize; options.len()];
                loop {
                    let mut tuple = 0u32;
                    let mut mask = 0u32;
                    for (i, opts) in options.iter().enumerate().rev() {
                        let (c, p) = opts[idx[i]];
                        tuple = tuple * radix + c as u32;
                        if p {
                            mask |= 1 << i;
                        }
                    }
                    out.push((tuple, (pos + 1, mask)));
                    if !odometer(&mut idx, |i| options[i].len()) {
                        break;
                    }
                }
            },
            |&(pos, _)| pos == width,
        );
        Ok(dfa)
    }

    /// Synchronous product over the union of the operands' tracks. A state
    /// accepts when `accept` holds for the operands' acceptance flags; a
    /// `required` operand that reaches its dead sink kills the product state.
    pub(crate) fn product<F>(ops: &[&Dfa], accept: F, required: &[bool]) -> Result<Dfa>
    where
        F: Fn(&[bool]) -> bool,
    {
        let first = ops.first().ok_or_else(|| Error::Unsupported("empty product".into()))?;
        let domain = first.domain.clone();
        if ops.iter().any(|o| !Arc::ptr_eq(&o.domain, &domain) && *o.domain != *domain) {
            return Err(Error::DomainMismatch);
        }
        let mut merged: Vec<String> = ops.iter().flat_map(|o| o.tracks.iter().cloned()).collect();
        merged.sort();
        merged.dedup();
        check_tuple_space(&domain, merged.len())?;
        let radix = first.radix();
        let n = merged.len();
        let pos_map: Vec<Vec<usize>> = ops
            .iter()
            .map(|o| o.tracks.iter().map(|t| merged.binary_search(t).unwrap()).collect())
            .collect();
        let covered: Vec<Vec<bool>> = pos_map
            .iter()
            .map(|m| {
                let mut c = vec![false; n];
                m.iter().for_each(|&p| c[p] = true);
                c
            })
            .collect();

        let start: Vec<u32> = ops.iter().map(|o| o.start).collect();
        if ops.iter().zip(required).any(|(o, &r)| r && o.start == DEAD) {
            return Ok(Dfa::empty_over(domain, merged));
        }

        let ctx = ProductCtx {
            ops,
            pos_map: &pos_map,
            required,
            radix,
        };
        let mut syms = vec![0u8; n];
        let mut op_syms: Vec<Vec<u8>> = ops.iter().map(|o| vec![0u8; o.tracks.len()]).collect();
        let dfa = build(
            domain.clone(),
            merged,
            start,
            |key: &Vec<u32>, out| {
                let driver = (0..ops.len())
                    .filter(|&i| required[i])
                    .min_by_key(|&i| ops[i].transitions(key[i]).len());
                match driver {
                    Some(d) => {
                        let free: Vec<usize> = (0..n).filter(|&p| !covered[d][p]).collect();
                        let mut dsyms = vec![0u8; ops[d].tracks.len()];
                        for &(tuple, _) in ops[d].transitions(key[d]) {
                            ops[d].decode_tuple(tuple, &mut dsyms);
                            for (&c, &p) in dsyms.iter().zip(&pos_map[d]) {
                                syms[p] = c;
                            }
                            ctx.expand(key, &mut syms, &mut op_syms, &free, out);
                        }
                    }
                    None => {
                        let free: Vec<usize> = (0..n).collect();
                        ctx.expand(key, &mut syms, &mut op_syms, &free, out);
                    }
                }
            },
            |key| {
                let flags: Vec<bool> = ops.iter().zip(key).map(|(o, &s)| o.is_accepting(s)).collect();
                accept(&flags)
            },
        );
        Ok(dfa)
    }

    pub fn intersect(&self, other: &Dfa) -> Result<Dfa> {
        Dfa::product(&[self, other], |f| f[0] && f[1], &[true, true])
    }

    pub fn intersect_all(ops: &[&Dfa]) -> Result<Dfa> {
        Dfa::product(ops, |f| f.iter().all(|&a| a), &vec![true; ops.len()])
    }

    pub fn union(&self, other: &Dfa) -> Result<Dfa> {
        let mut tracks: Vec<&str> = self.tracks.iter().chain(&other.tracks).map(String::as_str).collect();
        tracks.sort();
        tracks.dedup();
        let wf = Dfa::universe_arc(self.domain.clone(), Dfa::normalized_tracks(&tracks)?)?;
        Dfa::product(&[self, other, &wf], |f| (f[0] || f[1]) && f[2], &[false, false, true])
    }

    /// Complement relative to the legal assignments of this automaton's tracks.
    pub fn complement(&self) -> Result<Dfa> {
        let wf = Dfa::universe_arc(self.domain.clone(), self.tracks.clone())?;
        Dfa::product(&[self, &wf], |f| !f[0] && f[1], &[false, true])
    }

    /// Re-expresses the language over a superset of tracks; added tracks are
    /// unconstrained.
    pub fn lift(&self, tracks: &[&str]) -> Result<Dfa> {
        let mut all: Vec<&str> = tracks.to_vec();
        all.extend(self.tracks.iter().map(String::as_str));
        let all = Dfa::normalized_tracks(&all)?;
        if all == self.tracks {
            return Ok(self.clone());
        }
        let wf = Dfa::universe_arc(self.domain.clone(), all)?;
        self.intersect(&wf)
    }

    /// Existential projection onto `keep`, determinized by subset construction.
    pub fn project(&self, keep: &[&str]) -> Result<Dfa> {
        let keep = Dfa::normalized_tracks(keep)?;
        let positions: Vec<usize> = keep
            .iter()
            .map(|k| self.track_index(k))
            .collect::<Result<_>>()?;
        if keep == self.tracks {
            return Ok(self.clone());
        }
        let radix = self.radix();
        let mut syms = vec![0u8; self.tracks.len()];
        let start: Vec<u32> = if self.start == DEAD { Vec::new() } else { vec![self.start] };
        let dfa = build(
            self.domain.clone(),
            keep,
            start,
            |set: &Vec<u32>, out| {
                let mut moves: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
                for &s in set {
                    for &(tuple, t) in self.transitions(s) {
                        self.decode_tuple(tuple, &mut syms);
                        let projected = positions
                            .iter()
                            .rev()
                            .fold(0u32, |acc, &p| acc * radix + syms[p] as u32);
                        moves.entry(projected).or_default().push(t);
                    }
                }
                for (tuple, mut targets) in moves {
                    targets.sort_unstable();
                    targets.dedup();
                    out.push((tuple, targets));
                }
            },
            |set| set.iter().any(|&s| self.is_accepting(s)),
        );
        Ok(dfa)
    }
}

struct ProductCtx<'a> {
    ops: &'a [&'a Dfa],
    pos_map: &'a [Vec<usize>],
    required: &'a [bool],
    radix: u32,
}

impl ProductCtx<'_> {
    /// Emits successors for every filling of the `free` track positions.
    fn expand(
        &self,
        key: &[u32],
        syms: &mut [u8],
        op_syms: &mut [Vec<u8>],
        free: &[usize],
        out: &mut Vec<(u32, Vec<u32>)>,
    ) {
        let mut idx = vec![0usize; free.len()];
        'fill: loop {
            for (k, &p) in free.iter().enumerate() {
                syms[p] = idx[k] as u8;
            }
            let mut next = Vec::with_capacity(self.ops.len());
            for (i, op) in self.ops.iter().enumerate() {
                let s = key[i];
                let t = if s == DEAD {
                    DEAD
                } else {
                    for (slot, &p) in op_syms[i].iter_mut().zip(&self.pos_map[i]) {
                        *slot = syms[p];
                    }
                    op.next(s, op.encode_tuple(&op_syms[i]))
                };
                if t == DEAD && self.required[i] {
                    if !odometer(&mut idx, |_| self.radix as usize) {
                        break 'fill;
                    }
                    continue 'fill;
                }
                next.push(t);
            }
            let radix = self.radix;
            let tuple = syms.iter().rev().fold(0u32, |acc, &c| acc * radix + c as u32);
            out.push((tuple, next));
            if !odometer(&mut idx, |_| self.radix as usize) {
                break;
            }
        }
    }
}

fn check_tuple_space(domain: &Domain, tracks: usize) -> Result<()> {
    let radix = domain.pad() as u64 + 1;
    match radix.checked_pow(tracks as u32) {
        Some(n) if n <= u32::MAX as u64 => Ok(()),
        _ => Err(Error::Unsupported(format!("{tracks} tracks exceed the tuple alphabet limit"))),
    }
}

/// Advances a mixed-radix counter; false once it wraps around.
pub(crate) fn odometer(idx: &mut [usize], limit: impl Fn(usize) -> usize) -> bool {
    for (i, slot) in idx.iter_mut().enumerate() {
        *slot += 1;
        if *slot < limit(i) {
            return true;
        }
        *slot = 0;
    }
    false
}
