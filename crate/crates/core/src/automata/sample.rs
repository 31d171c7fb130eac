use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::Rng;

use super::{Assignment, Dfa, DEAD};
use crate::error::{Error, Result};

/// Uniform sampler over the accepted tuple-strings of an automaton.
///
/// `paths[d][s]` is the number of accepted suffixes of length `d` from `s`;
/// each step picks a transition with probability proportional to the count
/// of its target, so every accepted string is equally likely.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    dfa: &'a Dfa,
    paths: Vec<Vec<BigUint>>,
}

impl<'a> Sampler<'a> {
    pub fn new(dfa: &'a Dfa) -> Self {
        let n = dfa.num_states();
        let width = dfa.width();
        let mut paths = Vec::with_capacity(width + 1);
        paths.push((0..n).map(|s| BigUint::from(dfa.is_accepting(s as u32) as u8)).collect::<Vec<_>>());
        for d in 1..=width {
            let prev = &paths[d - 1];
            let row = (0..n)
                .map(|s| {
                    dfa.transitions(s as u32)
                        .iter()
                        .fold(BigUint::zero(), |acc, &(_, t)| acc + &prev[t as usize])
                })
                .collect();
            paths.push(row);
        }
        Self { dfa, paths }
    }

    /// Number of accepted assignments.
    pub fn total(&self) -> &BigUint {
        &self.paths[self.dfa.width()][self.dfa.start() as usize]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment> {
        let width = self.dfa.width();
        if self.dfa.start() == DEAD || self.total().is_zero() {
            return Err(Error::EmptyLanguage);
        }
        let tracks = self.dfa.tracks();
        let pad = self.dfa.domain().pad();
        let mut columns: Vec<String> = vec![String::new(); tracks.len()];
        let mut syms = vec![0u8; tracks.len()];
        let mut state = self.dfa.start();
        for remaining in (1..=width).rev() {
            let weights = &self.paths[remaining - 1];
            let here = &self.paths[remaining][state as usize];
            let mut pick = rng.gen_biguint_below(here);
            let mut chosen = None;
            for &(tuple, t) in self.dfa.transitions(state) {
                let w = &weights[t as usize];
                if pick < *w {
                    chosen = Some((tuple, t));
                    break;
                }
                pick -= w;
            }
            let (tuple, next) = chosen.expect("weights sum to the state's path count");
            self.dfa.decode_tuple(tuple, &mut syms);
            for (col, &c) in columns.iter_mut().zip(&syms) {
                if c != pad {
                    col.push(self.dfa.domain().symbol(c));
                }
            }
            state = next;
        }
        debug_assert!(self.dfa.is_accepting(state));
        Ok(tracks.iter().cloned().zip(columns).collect())
    }
}

impl Dfa {
    /// One uniformly random accepted assignment.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment> {
        Sampler::new(self).sample(rng)
    }
}
