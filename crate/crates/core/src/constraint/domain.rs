use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMode {
    /// Every string has exactly the track's length.
    Exact,
    /// Strings may be shorter than the track's length.
    UpTo,
}

impl fmt::Display for LengthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthMode::Exact => f.write_str("exact"),
            LengthMode::UpTo => f.write_str("up_to"),
        }
    }
}

/// The bounded universe of strings that variables range over.
///
/// The alphabet is ordered; lexicographic comparisons use the position of a
/// symbol in the alphabet. Individual variables may override the default
/// length bound (e.g. an 8-character secret against a 1-character input).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    alphabet: Vec<char>,
    length_bound: usize,
    length_mode: LengthMode,
    overrides: BTreeMap<String, usize>,
}

impl Domain {
    pub fn new(alphabet: &str, length_bound: usize, length_mode: LengthMode) -> Result<Self> {
        let symbols: Vec<char> = alphabet.chars().collect();
        if symbols.is_empty() {
            return Err(Error::InvalidDomain("alphabet is empty".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(Error::InvalidDomain(format!("duplicate symbol `{c}`")));
            }
        }
        if symbols.len() > 254 {
            return Err(Error::InvalidDomain("alphabet has more than 254 symbols".into()));
        }
        if length_bound == 0 {
            return Err(Error::InvalidDomain("length bound must be at least 1".into()));
        }
        Ok(Self {
            alphabet: symbols,
            length_bound,
            length_mode,
            overrides: BTreeMap::new(),
        })
    }

    pub fn digits(length_bound: usize) -> Self {
        Self::new("0123456789", length_bound, LengthMode::Exact).expect("valid alphabet")
    }

    pub fn uppercase(length_bound: usize) -> Self {
        Self::new("ABCDEFGHIJKLMNOPQRSTUVWXYZ", length_bound, LengthMode::Exact)
            .expect("valid alphabet")
    }

    /// Overrides the length bound of one variable.
    pub fn with_track_length(mut self, var: &str, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidDomain(format!("length of `{var}` must be at least 1")));
        }
        self.overrides.insert(var.to_string(), len);
        Ok(self)
    }

    pub fn with_mode(mut self, mode: LengthMode) -> Self {
        self.length_mode = mode;
        self
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn alphabet_string(&self) -> String {
        self.alphabet.iter().collect()
    }

    pub fn length_bound(&self) -> usize {
        self.length_bound
    }

    pub fn length_mode(&self) -> LengthMode {
        self.length_mode
    }

    pub fn overrides(&self) -> &BTreeMap<String, usize> {
        &self.overrides
    }

    /// Length bound of `var`.
    pub fn track_len(&self, var: &str) -> usize {
        self.overrides.get(var).copied().unwrap_or(self.length_bound)
    }

    /// Number of positions in every tuple-string: the longest track bound.
    pub fn width(&self) -> usize {
        self.overrides
            .values()
            .copied()
            .chain(std::iter::once(self.length_bound))
            .max()
            .unwrap_or(self.length_bound)
    }

    /// Padding symbol code; alphabet symbols are `0..pad()`.
    pub fn pad(&self) -> u8 {
        self.alphabet.len() as u8
    }

    pub fn symbol_index(&self, c: char) -> Option<u8> {
        self.alphabet.iter().position(|&s| s == c).map(|i| i as u8)
    }

    pub fn symbol(&self, code: u8) -> char {
        self.alphabet[code as usize]
    }

    /// Lengths a string for `var` may take.
    pub fn admissible_lengths(&self, var: &str) -> std::ops::RangeInclusive<usize> {
        let len = self.track_len(var);
        match self.length_mode {
            LengthMode::Exact => len..=len,
            LengthMode::UpTo => 0..=len,
        }
    }

    /// Symbol codes of `s`, failing on symbols outside the alphabet.
    pub fn encode(&self, s: &str) -> Result<Vec<u8>> {
        s.chars()
            .map(|c| self.symbol_index(c).ok_or(Error::SymbolOutsideAlphabet { symbol: c }))
            .collect()
    }

    /// Checks that `s` is a legal value for `var`.
    pub fn validate(&self, var: &str, s: &str) -> Result<Vec<u8>> {
        let codes = self.encode(s)?;
        if !self.admissible_lengths(var).contains(&codes.len()) {
            return Err(Error::LengthViolation {
                var: var.to_string(),
                len: codes.len(),
                bound: self.track_len(var),
            });
        }
        Ok(codes)
    }

    /// Number of legal values of `var`.
    pub fn size_of(&self, var: &str) -> num_bigint::BigUint {
        let base = num_bigint::BigUint::from(self.alphabet.len());
        self.admissible_lengths(var)
            .map(|n| base.pow(n as u32))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_alphabets() {
        assert!(Domain::new("", 2, LengthMode::Exact).is_err());
        assert!(Domain::new("AA", 2, LengthMode::Exact).is_err());
        assert!(Domain::new("AB", 0, LengthMode::Exact).is_err());
    }

    #[test]
    fn width_takes_longest_track() {
        let d = Domain::uppercase(8).with_track_length("l", 1).unwrap();
        assert_eq!(d.width(), 8);
        assert_eq!(d.track_len("l"), 1);
        assert_eq!(d.track_len("h"), 8);
    }

    #[test]
    fn sizes() {
        assert_eq!(Domain::digits(4).size_of("h"), 10_000u32.into());
        let d = Domain::new("ab", 2, LengthMode::UpTo).unwrap();
        assert_eq!(d.size_of("h"), 7u32.into());
    }

    #[test]
    fn validate_checks_length_and_symbols() {
        let d = Domain::digits(4);
        assert!(d.validate("l", "1337").is_ok());
        assert!(matches!(d.validate("l", "133"), Err(Error::LengthViolation { .. })));
        assert!(matches!(d.validate("l", "13a7"), Err(Error::SymbolOutsideAlphabet { symbol: 'a' })));
    }
}
