//! Exact model counting and the constraint-keyed automaton cache.

use std::collections::HashMap;
use std::ops::AddAssign;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::automata::{from_constraint, Dfa};
use crate::constraint::{canonical_key, substitute, CacheKey, Constraint, Domain, LengthMode, Level, Var};
use crate::error::{Error, Result};

/// Number of accepted tuple-strings of length `k` (or of every length up to
/// `k`), by iterated vector-matrix products over the transition relation.
pub fn count_paths<C>(dfa: &Dfa, k: usize, mode: LengthMode) -> C
where
    C: Clone + Zero + One + for<'a> AddAssign<&'a C>,
{
    let n = dfa.num_states();
    let mut reach = vec![C::zero(); n];
    reach[dfa.start() as usize] = C::one();
    let mut total = C::zero();
    let accepted = |reach: &[C], total: &mut C| {
        for (s, c) in reach.iter().enumerate() {
            if dfa.is_accepting(s as u32) {
                *total += c;
            }
        }
    };
    for _ in 0..k {
        if mode == LengthMode::UpTo {
            accepted(&reach, &mut total);
        }
        let mut next = vec![C::zero(); n];
        let mut live = false;
        for (s, c) in reach.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &(_, t) in dfa.transitions(s as u32) {
                next[t as usize] += c;
                live = true;
            }
        }
        reach = next;
        if !live {
            return total;
        }
    }
    accepted(&reach, &mut total);
    total
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResult<C = BigUint> {
    pub count: C,
    pub bound: usize,
    pub mode: LengthMode,
}

/// Counts every solution of an automaton built over `domain`: each accepted
/// tuple-string spans the full domain width, short tracks padded.
pub fn count_models(dfa: &Dfa) -> CountResult {
    CountResult {
        count: count_paths(dfa, dfa.width(), LengthMode::Exact),
        bound: dfa.domain().length_bound(),
        mode: dfa.domain().length_mode(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    /// Automata built by the counting routines (cached or not).
    pub constructed: u64,
    pub states_built: u64,
    /// Calls to `model_count` and `model_count_incremental`.
    pub queries: u64,
    /// Wall time spent inside counting queries, construction included.
    #[serde(with = "duration_secs")]
    pub count_time: Duration,
    /// Incremental counts confirmed against a from-scratch recount.
    pub checked: u64,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

type Slot = (CacheKey, Vec<String>);

/// Automata keyed by canonical constraint and track list.
///
/// Lookups take a shared lock; concurrent builders of the same key may both
/// construct and the last insert wins, which is harmless since both automata
/// accept the same language.
#[derive(Debug, Default)]
pub struct DfaCache {
    map: RwLock<HashMap<Slot, Arc<Dfa>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    constructed: AtomicU64,
    states_built: AtomicU64,
    queries: AtomicU64,
    count_nanos: AtomicU64,
    checked: AtomicU64,
}

fn slot(key: &CacheKey, tracks: &[&str]) -> Slot {
    let mut t: Vec<String> = tracks.iter().map(|s| s.to_string()).collect();
    t.sort();
    t.dedup();
    (key.clone(), t)
}

impl DfaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &CacheKey, tracks: &[&str]) -> bool {
        self.map.read().unwrap().contains_key(&slot(key, tracks))
    }

    /// Lookup that updates the hit/miss counters.
    pub fn get(&self, key: &CacheKey, tracks: &[&str]) -> Option<Arc<Dfa>> {
        let found = self.map.read().unwrap().get(&slot(key, tracks)).cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn insert(&self, key: &CacheKey, tracks: &[&str], dfa: Arc<Dfa>) {
        self.map.write().unwrap().insert(slot(key, tracks), dfa);
    }

    /// Cached automaton of `c`, compiling and inserting it on a miss.
    pub fn get_or_build(&self, c: &Constraint, domain: &Domain, tracks: &[&str]) -> Result<Arc<Dfa>> {
        let key = canonical_key(c);
        if let Some(a) = self.get(&key, tracks) {
            if a.domain() == domain {
                return Ok(a);
            }
        }
        let a = Arc::new(self.build(c, domain, tracks)?);
        self.insert(&key, tracks, a.clone());
        Ok(a)
    }

    /// Compiles without touching the map, but records the construction.
    pub fn build(&self, c: &Constraint, domain: &Domain, tracks: &[&str]) -> Result<Dfa> {
        let a = from_constraint(c, domain, tracks)?;
        self.note_built(&a);
        Ok(a)
    }

    pub(crate) fn note_built(&self, a: &Dfa) {
        self.constructed.fetch_add(1, Ordering::Relaxed);
        self.states_built.fetch_add(a.num_states() as u64, Ordering::Relaxed);
    }

    fn timed<T>(&self, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.count_nanos.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            constructed: self.constructed.load(Ordering::Relaxed),
            states_built: self.states_built.load(Ordering::Relaxed),
            queries: self.queries.load(Ordering::Relaxed),
            count_time: Duration::from_nanos(self.count_nanos.load(Ordering::Relaxed)),
            checked: self.checked.load(Ordering::Relaxed),
        }
    }

    /// Drops every cached automaton; statistics are kept.
    pub fn clear(&self) {
        self.map.write().unwrap().clear();
    }

    /// Drops every cached automaton and zeroes the statistics.
    pub fn reset(&self) {
        self.clear();
        for c in [
            &self.hits,
            &self.misses,
            &self.constructed,
            &self.states_built,
            &self.queries,
            &self.count_nanos,
            &self.checked,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

/// `#c` over `tracks`, through the cache.
pub fn model_count(c: &Constraint, domain: &Domain, tracks: &[&str], cache: &DfaCache) -> Result<CountResult> {
    cache.timed(|| {
        let a = cache.get_or_build(c, domain, tracks)?;
        Ok(count_models(&a))
    })
}

/// `#(c_h ∧ psi ∧ low = l_val)` over `(high, low)`.
///
/// The automaton of `c_h` over `high` must already be cached. The automaton
/// of `psi` is built once and cached; the one for `low = l_val` is built on
/// every call. The three are combined by a single product before counting.
pub fn model_count_incremental(
    c_h: &Constraint,
    psi: &Constraint,
    high: &str,
    low: &str,
    l_val: &str,
    domain: &Domain,
    cache: &DfaCache,
) -> Result<CountResult> {
    domain.validate(low, l_val)?;
    cache.timed(|| {
        let key = canonical_key(c_h);
        let a_h = cache.get(&key, &[high]).ok_or_else(|| Error::CacheMiss(key.to_string()))?;
        let a_psi = cache.get_or_build(psi, domain, &[high, low])?;
        let eq = Constraint::EqConst(low.to_string(), l_val.to_string());
        let a_l = cache.build(&eq, domain, &[low])?;
        let joint = Dfa::intersect_all(&[&a_h, &a_psi, &a_l])?;
        cache.note_built(&joint);
        Ok(count_models(&joint))
    })
}

/// Which counting route the information measures take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Recompile the whole instantiated constraint for every query.
    Scratch,
    /// Reuse cached automata for the knowledge and observation constraints.
    Incremental,
    /// Incremental, with every answer recomputed from scratch and compared.
    Checked,
}

/// Everything needed to count secrets for a given knowledge state.
#[derive(Debug, Clone, Copy)]
pub struct Counter<'a> {
    pub domain: &'a Domain,
    pub high: &'a str,
    pub low: &'a str,
    pub cache: &'a DfaCache,
    pub route: Route,
}

impl<'a> Counter<'a> {
    /// `#c_h` over the secret.
    pub fn secrets(&self, c_h: &Constraint) -> Result<BigUint> {
        Ok(model_count(c_h, self.domain, &[self.high], self.cache)?.count)
    }

    /// `#(c_h ∧ psi[low ↦ l_val])` over the secret.
    pub fn secrets_with(&self, c_h: &Constraint, psi: &Constraint, l_val: &str) -> Result<BigUint> {
        match self.route {
            Route::Incremental => {
                model_count_incremental(c_h, psi, self.high, self.low, l_val, self.domain, self.cache)
                    .map(|r| r.count)
            }
            Route::Scratch => {
                let low = Var::string(self.low, Level::Low);
                let inst = substitute(psi, &low, l_val, self.domain)?;
                self.secrets(&Constraint::And(vec![c_h.clone(), inst]))
            }
            Route::Checked => {
                let fast = Counter { route: Route::Incremental, ..*self }.secrets_with(c_h, psi, l_val)?;
                let slow = Counter { route: Route::Scratch, ..*self }.secrets_with(c_h, psi, l_val)?;
                if fast != slow {
                    return Err(Error::CountMismatch {
                        constraint: format!("{c_h} with {psi} at {l_val}"),
                        incremental: fast.to_string(),
                        scratch: slow.to_string(),
                    });
                }
                self.cache.checked.fetch_add(1, Ordering::Relaxed);
                Ok(fast)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{parse_constraint, Signature};

    fn p(text: &str, d: &Domain) -> Constraint {
        parse_constraint(text, &Signature::high_low(), d).unwrap()
    }

    #[test]
    fn reference_counts() {
        let d = Domain::uppercase(2);
        let cache = DfaCache::new();
        let c = |t: &str| model_count(&p(t, &d), &d, &["h"], &cache).unwrap().count;
        assert_eq!(c("(<= h \"MZ\")"), 338u32.into());
        assert_eq!(c("(and (<= h \"MZ\") (> h \"GM\"))"), 169u32.into());
        assert_eq!(c("(not (and))"), BigUint::zero());
        let d4 = Domain::digits(4);
        assert_eq!(model_count(&Constraint::truth(), &d4, &["h"], &cache).unwrap().count, 10_000u32.into());
    }

    #[test]
    fn generic_count_type() {
        let d = Domain::digits(4);
        let a = from_constraint(&Constraint::truth(), &d, &["h"]).unwrap();
        assert_eq!(count_paths::<u64>(&a, 4, LengthMode::Exact), 10_000);
        assert_eq!(count_paths::<u64>(&a, 3, LengthMode::Exact), 0);
        assert_eq!(count_paths::<u64>(&a, 4, LengthMode::UpTo), 10_000);
    }

    #[test]
    fn incremental_needs_cached_knowledge() {
        let d = Domain::uppercase(2);
        let cache = DfaCache::new();
        let psi = p("(<= h l)", &d);
        let r = model_count_incremental(&Constraint::truth(), &psi, "h", "l", "MZ", &d, &cache);
        assert!(matches!(r, Err(Error::CacheMiss(_))));
    }

    #[test]
    fn incremental_matches_scratch() {
        let d = Domain::uppercase(2);
        let cache = DfaCache::new();
        let le = p("(<= h l)", &d);
        let gt = p("(> h l)", &d);
        let gm = p("(> h \"GM\")", &d);
        for c_h in [Constraint::truth(), gm] {
            model_count(&c_h, &d, &["h"], &cache).unwrap();
            for (psi, want) in [(&le, None), (&gt, None), (&le, Some(169u32))] {
                let inc = Counter { domain: &d, high: "h", low: "l", cache: &cache, route: Route::Incremental };
                let scr = Counter { route: Route::Scratch, ..inc };
                let a = inc.secrets_with(&c_h, psi, "MZ").unwrap();
                assert_eq!(a, scr.secrets_with(&c_h, psi, "MZ").unwrap());
                if c_h == Constraint::truth() {
                    assert_eq!(a, 338u32.into());
                } else if let Some(w) = want {
                    assert_eq!(a, w.into());
                }
            }
        }
    }

    #[test]
    fn psi_is_built_once() {
        let d = Domain::uppercase(2);
        let cache = DfaCache::new();
        let psi = p("(<= h l)", &d);
        model_count(&Constraint::truth(), &d, &["h"], &cache).unwrap();
        let before = cache.len();
        for l in ["AA", "MZ", "ZZ", "QQ"] {
            model_count_incremental(&Constraint::truth(), &psi, "h", "l", l, &d, &cache).unwrap();
        }
        assert_eq!(cache.len(), before + 1);
        let s = cache.stats();
        assert_eq!(s.queries, 5);
        cache.reset();
        assert_eq!(cache.stats(), CacheStats::default());
    }
}
