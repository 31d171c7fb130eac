//! The adaptive attack: observation classes, the knowledge constraint and the
//! loop that picks inputs until the secret is pinned down.

mod run;
mod strategy;

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{from_constraint, Assignment, Dfa};
use crate::constraint::{canonical_key, substitute, Constraint, Domain, Level, Signature, Var};
use crate::count::{count_models, DfaCache};
use crate::error::{Error, Result};
use crate::info::{entropy_of_count, Bits};

pub use run::{run_attack, AttackTrace, Budgets, Outcome, TraceRow};
pub use strategy::{
    attack_input_model, attack_input_sa, get_input, get_neighbor_input, project_consistent, project_low, SaParams, Step,
    Strategy, NEIGHBOR_RETRIES,
};

/// One execution path of the target: its condition over `(h, l)` and the
/// number of instructions it executes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathConstraint {
    pub constraint: Constraint,
    pub cost: u64,
}

impl PathConstraint {
    pub fn new(constraint: Constraint, cost: u64) -> Self {
        Self { constraint, cost }
    }
}

/// Paths whose costs the attacker cannot tell apart, merged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationClass {
    pub id: usize,
    /// Lowest member cost.
    pub representative_cost: u64,
    pub cost_range: (u64, u64),
    /// Indices into the path list.
    pub members: Vec<usize>,
    /// Disjunction of the member path constraints.
    pub constraint: Constraint,
}

/// Sorts the distinct costs and starts a new class whenever the gap to the
/// previous cost is at least `delta`.
pub fn generate_constraints(paths: &[PathConstraint], delta: u64) -> Result<Vec<ObservationClass>> {
    if paths.is_empty() {
        return Err(Error::NoPaths);
    }
    if delta == 0 {
        return Err(Error::InvalidDelta);
    }
    let mut costs: Vec<u64> = paths.iter().map(|p| p.cost).collect();
    costs.sort_unstable();
    costs.dedup();
    let mut bands: Vec<(u64, u64)> = Vec::new();
    for c in costs {
        match bands.last_mut() {
            Some((_, hi)) if c - *hi < delta => *hi = c,
            _ => bands.push((c, c)),
        }
    }
    Ok(bands
        .into_iter()
        .enumerate()
        .map(|(id, (lo, hi))| {
            let members: Vec<usize> = (0..paths.len()).filter(|&i| (lo..=hi).contains(&paths[i].cost)).collect();
            let constraint = match members.as_slice() {
                [one] => paths[*one].constraint.clone(),
                many => Constraint::Or(many.iter().map(|&i| paths[i].constraint.clone()).collect()),
            };
            ObservationClass {
                id,
                representative_cost: lo,
                cost_range: (lo, hi),
                members,
                constraint,
            }
        })
        .collect())
}

/// A target prepared for attacking: its observation classes and their
/// automata over `(h, l)`.
#[derive(Debug, Clone)]
pub struct Attack {
    domain: Domain,
    high: String,
    low: String,
    classes: Vec<ObservationClass>,
    psis: Vec<Constraint>,
    psi_dfas: Vec<Arc<Dfa>>,
}

impl Attack {
    pub fn new(domain: &Domain, sig: &Signature, paths: &[PathConstraint], delta: u64) -> Result<Self> {
        let high = sig.high().ok_or(Error::BadSignature)?.name.clone();
        let low = sig.low().ok_or(Error::BadSignature)?.name.clone();
        for p in paths {
            if let Some(v) = p.constraint.free_variables().into_iter().find(|v| *v != high && *v != low) {
                return Err(Error::UnknownTrack(v.to_string()));
            }
        }
        let classes = generate_constraints(paths, delta)?;
        let psis: Vec<Constraint> = classes.iter().map(|c| c.constraint.clone()).collect();
        let psi_dfas = psis
            .iter()
            .map(|p| from_constraint(p, domain, &[&high, &low]).map(|a| Arc::new(a.minimize())))
            .collect::<Result<_>>()?;
        Ok(Self {
            domain: domain.clone(),
            high,
            low,
            classes,
            psis,
            psi_dfas,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn high(&self) -> &str {
        &self.high
    }

    pub fn low(&self) -> &str {
        &self.low
    }

    pub fn classes(&self) -> &[ObservationClass] {
        &self.classes
    }

    pub fn psis(&self) -> &[Constraint] {
        &self.psis
    }

    pub fn psi_dfa(&self, id: usize) -> &Arc<Dfa> {
        &self.psi_dfas[id]
    }

    pub fn low_var(&self) -> Var {
        Var::string(&self.low, Level::Low)
    }

    fn pair(&self, h: &str, l: &str) -> Assignment {
        [(self.high.clone(), h.to_string()), (self.low.clone(), l.to_string())].into()
    }

    /// Ids of every class satisfied by `(h, l)`.
    pub fn matching_classes(&self, h: &str, l: &str) -> Result<Vec<usize>> {
        let asg = self.pair(h, l);
        let mut out = Vec::new();
        for (i, a) in self.psi_dfas.iter().enumerate() {
            if a.accepts(&asg)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// The unique class observed when the secret is `h` and the input `l`.
    pub fn observe(&self, h: &str, l: &str) -> Result<usize> {
        match self.matching_classes(h, l)?.as_slice() {
            [one] => Ok(*one),
            other => Err(Error::NotAPartition(format!(
                "h = {h:?}, l = {l:?} satisfies {} observation classes",
                other.len()
            ))),
        }
    }

    /// Checks on `samples` uniformly drawn pairs that exactly one class holds.
    pub fn check_partition<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<()> {
        let hs = from_constraint(&Constraint::truth(), &self.domain, &[&self.high])?;
        let ls = from_constraint(&Constraint::truth(), &self.domain, &[&self.low])?;
        let hs = crate::automata::Sampler::new(&hs);
        let ls = crate::automata::Sampler::new(&ls);
        for _ in 0..samples {
            let h = hs.sample(rng)?.remove(&self.high).unwrap_or_default();
            let l = ls.sample(rng)?.remove(&self.low).unwrap_or_default();
            self.observe(&h, &l)?;
        }
        Ok(())
    }
}

/// What the attacker knows about the secret: the conjunction of every
/// instantiated observation so far and its automaton.
#[derive(Debug, Clone)]
pub struct KnowledgeState<F = f64> {
    pub c_h: Constraint,
    pub dfa: Arc<Dfa>,
    pub count: BigUint,
    pub entropy: Bits<F>,
    pub step: usize,
}

impl<F: Float> KnowledgeState<F> {
    /// No knowledge: every secret is possible.
    pub fn initial(attack: &Attack, cache: &DfaCache) -> Result<Self> {
        let c_h = Constraint::truth();
        let dfa = Arc::new(cache.build(&c_h, &attack.domain, &[&attack.high])?);
        Self::from_parts(c_h, dfa, 0, cache, &attack.high)
    }

    fn from_parts(c_h: Constraint, dfa: Arc<Dfa>, step: usize, cache: &DfaCache, high: &str) -> Result<Self> {
        let count = count_models(&dfa).count;
        let entropy = entropy_of_count(&count)?;
        let state = Self {
            c_h,
            dfa,
            count,
            entropy,
            step,
        };
        state.ensure_cached(cache, high);
        Ok(state)
    }

    /// Makes the knowledge automaton available to incremental counting.
    pub fn ensure_cached(&self, cache: &DfaCache, high: &str) {
        let key = canonical_key(&self.c_h);
        if !cache.contains(&key, &[high]) {
            cache.insert(&key, &[high], self.dfa.clone());
        }
    }

    /// `C_h ∧ ψ_o[l ↦ l_val]`, reusing the current automaton.
    pub fn update(&self, attack: &Attack, class: usize, l_val: &str, cache: &DfaCache) -> Result<Self> {
        let inst = substitute(&attack.psis[class], &attack.low_var(), l_val, &attack.domain)?;
        let step_dfa = cache.build(&inst, &attack.domain, &[&attack.high])?;
        let dfa = self.dfa.intersect(&step_dfa)?.minimize();
        cache.note_built(&dfa);
        let c_h = self.c_h.clone().and(inst);
        Self::from_parts(c_h, Arc::new(dfa), self.step + 1, cache, &attack.high)
    }

    pub fn admits(&self, attack: &Attack, h: &str) -> Result<bool> {
        self.dfa.accepts(&[(attack.high.clone(), h.to_string())].into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;

    fn pin_paths(d: &Domain) -> Vec<PathConstraint> {
        let sig = Signature::high_low();
        let mut out = Vec::new();
        for i in 0..=4 {
            let mut parts: Vec<String> = (0..i).map(|j| format!("(= (charAt l {j}) (charAt h {j}))")).collect();
            if i < 4 {
                parts.push(format!("(!= (charAt l {i}) (charAt h {i}))"));
            }
            let text = format!("(and {})", parts.join(" "));
            out.push(PathConstraint::new(parse_constraint(&text, &sig, d).unwrap(), 63 + 15 * i as u64));
        }
        out
    }

    #[test]
    fn pin_classes_are_the_five_costs() {
        let d = Domain::digits(4);
        let classes = generate_constraints(&pin_paths(&d), 10).unwrap();
        let costs: Vec<u64> = classes.iter().map(|c| c.representative_cost).collect();
        assert_eq!(costs, [63, 78, 93, 108, 123]);
        assert!(classes.iter().all(|c| c.members.len() == 1));
    }

    #[test]
    fn merging_by_gap() {
        let p = |c| PathConstraint::new(Constraint::truth(), c);
        let classes = generate_constraints(&[p(5), p(1), p(12), p(30), p(14)], 10).unwrap();
        let ranges: Vec<_> = classes.iter().map(|c| c.cost_range).collect();
        assert_eq!(ranges, [(1, 14), (30, 30)]);
        assert_eq!(classes[0].members, [0, 1, 2, 4]);
        assert_eq!(generate_constraints(&[p(7), p(7)], 10).unwrap().len(), 1);
        assert!(matches!(generate_constraints(&[], 10), Err(Error::NoPaths)));
        assert!(matches!(generate_constraints(&[p(1)], 0), Err(Error::InvalidDelta)));
    }

    #[test]
    fn observations_of_the_pin_trace() {
        let d = Domain::digits(4);
        let attack = Attack::new(&d, &Signature::high_low(), &pin_paths(&d), 10).unwrap();
        let cost = |h, l| attack.classes()[attack.observe(h, l).unwrap()].representative_cost;
        assert_eq!(cost("1337", "1058"), 78);
        assert_eq!(cost("1337", "8299"), 63);
        assert_eq!(cost("1337", "1337"), 123);
    }

    #[test]
    fn knowledge_updates_shrink_the_secret_set() {
        let d = Domain::digits(4);
        let attack = Attack::new(&d, &Signature::high_low(), &pin_paths(&d), 10).unwrap();
        let cache = DfaCache::new();
        let k0: KnowledgeState = KnowledgeState::initial(&attack, &cache).unwrap();
        assert_eq!(k0.count, 10_000u32.into());
        let k1 = k0.update(&attack, attack.observe("1337", "8299").unwrap(), "8299", &cache).unwrap();
        assert_eq!(k1.count, 9_000u32.into());
        let k2 = k1.update(&attack, attack.observe("1337", "0002").unwrap(), "0002", &cache).unwrap();
        assert_eq!(k2.count, 8_000u32.into());
        let k3 = k2.update(&attack, attack.observe("1337", "1058").unwrap(), "1058", &cache).unwrap();
        assert_eq!(k3.count, 900u32.into());
        assert!(k3.admits(&attack, "1337").unwrap());
        assert!((k1.entropy.value() - 13.13).abs() < 1e-2);
        assert!((k2.entropy.value() - 12.96).abs() < 1e-2);
        assert!((k3.entropy.value() - 9.813).abs() < 1e-3);
    }
}
