//! Multi-track deterministic automata over a bounded string domain.
//!
//! Every automaton reads tuple-strings of exactly `domain.width()` positions.
//! Each position carries one symbol per track; a track shorter than the width
//! is filled with a terminal padding symbol. Languages are always subsets of
//! the well-formed encodings of legal assignments, so complement is taken
//! relative to the domain.
//!
//! Transitions are stored sparsely: state `0` is the dead sink and every
//! tuple missing from a state's transition list leads there.

mod compile;
mod ops;
mod sample;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

pub use compile::from_constraint;
pub use sample::Sampler;

use crate::constraint::Domain;
use crate::error::{Error, Result};

/// Concrete values for the tracks of an automaton.
pub type Assignment = BTreeMap<String, String>;

pub(crate) const DEAD: u32 = 0;

#[derive(Debug, Clone)]
pub struct Dfa {
    domain: Arc<Domain>,
    tracks: Vec<String>,
    start: u32,
    accepting: Vec<bool>,
    trans: Vec<Vec<(u32, u32)>>,
}

impl Dfa {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn tracks(&self) -> &[String] {
        &self.tracks
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, s: u32) -> bool {
        self.accepting[s as usize]
    }

    /// Live transitions of `s`, sorted by tuple code.
    pub fn transitions(&self, s: u32) -> &[(u32, u32)] {
        &self.trans[s as usize]
    }

    pub fn num_transitions(&self) -> usize {
        self.trans.iter().map(Vec::len).sum()
    }

    /// Tuple-string length.
    pub fn width(&self) -> usize {
        self.domain.width()
    }

    pub(crate) fn radix(&self) -> u32 {
        self.domain.pad() as u32 + 1
    }

    #[inline]
    pub fn next(&self, s: u32, tuple: u32) -> u32 {
        let row = &self.trans[s as usize];
        match row.binary_search_by_key(&tuple, |&(t, _)| t) {
            Ok(i) => row[i].1,
            Err(_) => DEAD,
        }
    }

    pub(crate) fn encode_tuple(&self, symbols: &[u8]) -> u32 {
        let radix = self.radix();
        symbols.iter().rev().fold(0u32, |acc, &s| acc * radix + s as u32)
    }

    pub(crate) fn decode_tuple(&self, mut tuple: u32, out: &mut [u8]) {
        let radix = self.radix();
        for slot in out.iter_mut() {
            *slot = (tuple % radix) as u8;
            tuple /= radix;
        }
    }

    fn track_index(&self, name: &str) -> Result<usize> {
        self.tracks
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::UnknownTrack(name.to_string()))
    }

    /// Membership of a concrete assignment of every track.
    pub fn accepts(&self, asg: &Assignment) -> Result<bool> {
        let width = self.width();
        let pad = self.domain.pad();
        let mut columns = Vec::with_capacity(self.tracks.len());
        for t in &self.tracks {
            let value = asg.get(t).ok_or_else(|| Error::MissingTrack(t.clone()))?;
            let mut codes = self.domain.validate(t, value)?;
            codes.resize(width, pad);
            columns.push(codes);
        }
        let mut symbols = vec![0u8; self.tracks.len()];
        let mut state = self.start;
        for pos in 0..width {
            if state == DEAD {
                return Ok(false);
            }
            for (slot, col) in symbols.iter_mut().zip(&columns) {
                *slot = col[pos];
            }
            state = self.next(state, self.encode_tuple(&symbols));
        }
        Ok(self.is_accepting(state))
    }

    /// True iff no accepting state is reachable within `width` steps.
    pub fn is_empty(&self) -> bool {
        let mut frontier = vec![false; self.num_states()];
        frontier[self.start as usize] = true;
        for _ in 0..=self.width() {
            if frontier.iter().zip(&self.accepting).any(|(&f, &a)| f && a) {
                return false;
            }
            let mut next = vec![false; self.num_states()];
            for (s, _) in frontier.iter().enumerate().filter(|(_, &f)| f) {
                for &(_, t) in &self.trans[s] {
                    next[t as usize] = true;
                }
            }
            frontier = next;
        }
        true
    }

    /// Structural invariants: sorted unique tuple codes within range, targets
    /// in range, and an inert dead state.
    pub fn check_well_formed(&self) -> std::result::Result<(), String> {
        let n = self.num_states() as u32;
        let tuples = (self.radix() as u64).pow(self.tracks.len() as u32);
        if n == 0 || self.start >= n {
            return Err("missing states or start out of range".into());
        }
        if self.accepting[DEAD as usize] || !self.trans[DEAD as usize].is_empty() {
            return Err("dead state is accepting or has transitions".into());
        }
        if self.tracks.is_empty() || self.tracks.windows(2).any(|w| w[0] >= w[1]) {
            return Err("tracks must be nonempty, sorted and unique".into());
        }
        for (s, row) in self.trans.iter().enumerate() {
            if row.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(format!("state {s}: transitions not sorted/unique"));
            }
            if let Some(&(t, q)) = row.iter().find(|&&(t, q)| t as u64 >= tuples || q >= n || q == DEAD) {
                return Err(format!("state {s}: bad transition {t} -> {q}"));
            }
        }
        Ok(())
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  node [shape=circle];\n");
        let _ = writeln!(out, "  start [shape=point];\n  start -> s{};", self.start);
        let mut symbols = vec![0u8; self.tracks.len()];
        for s in 1..self.num_states() {
            let shape = if self.accepting[s] { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  s{s} [shape={shape}];");
            let mut labels: BTreeMap<u32, Vec<String>> = BTreeMap::new();
            for &(tuple, t) in &self.trans[s] {
                self.decode_tuple(tuple, &mut symbols);
                let label: String = symbols
                    .iter()
                    .map(|&c| {
                        if c == self.domain.pad() {
                            "#".to_string()
                        } else {
                            self.domain.symbol(c).to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("/");
                labels.entry(t).or_default().push(label);
            }
            for (t, ls) in labels {
                let _ = writeln!(out, "  s{s} -> s{t} [label=\"{}\"];", ls.join(",").replace('"', "\\\""));
            }
        }
        out.push_str("}\n");
        out
    }
}
