//! Input selection: the low-input projection, random model choice and
//! simulated annealing over mutual information.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{Float, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Attack, KnowledgeState};
use crate::automata::{from_constraint, Dfa, Sampler};
use crate::constraint::Constraint;
use crate::count::{Counter, DfaCache, Route};
use crate::error::{Error, Result};
use crate::info::{mutual_info, Bits};

/// Mutation attempts before a neighbor falls back to a fresh sample.
pub const NEIGHBOR_RETRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Uniform random model of the low-input projection.
    #[serde(rename = "model")]
    Model,
    /// Simulated annealing, every count compiled from scratch.
    #[serde(rename = "sa")]
    Sa,
    /// Simulated annealing with incremental counting.
    #[serde(rename = "sa-inc")]
    SaIncremental,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Model, Strategy::Sa, Strategy::SaIncremental];

    pub fn route(self) -> Route {
        match self {
            Strategy::Sa => Route::Scratch,
            Strategy::Model | Strategy::SaIncremental => Route::Incremental,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Model => "model",
            Strategy::Sa => "sa",
            Strategy::SaIncremental => "sa-inc",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "model" | "m" => Ok(Strategy::Model),
            "sa" => Ok(Strategy::Sa),
            "sa-inc" | "sa-i" | "sai" => Ok(Strategy::SaIncremental),
            other => Err(format!("unknown strategy `{other}` (expected model, sa or sa-inc)")),
        }
    }
}

/// Geometric cooling schedule `t ← t − t·k` from `t0` down to `t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams<F = f64> {
    pub t0: F,
    pub t_min: F,
    pub cooling: F,
}

impl<F: Float> SaParams<F> {
    pub fn new(t0: F, t_min: F, cooling: F) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidSaParams(m.to_string()));
        if !(t0.is_finite() && t_min.is_finite() && cooling.is_finite()) {
            return bad("parameters must be finite");
        }
        if t_min <= F::zero() || t0 <= F::zero() {
            return bad("temperatures must be positive");
        }
        if t_min >= t0 {
            return bad("t_min must be below t0");
        }
        if cooling <= F::zero() || cooling >= F::one() {
            return bad("cooling rate must lie strictly between 0 and 1");
        }
        Ok(Self { t0, t_min, cooling })
    }

    /// Number of neighbor evaluations per input choice.
    pub fn iterations(&self) -> usize {
        let mut t = self.t0;
        let mut n = 0;
        while t >= self.t_min {
            n += 1;
            t = t - t * self.cooling;
        }
        n
    }
}

impl<F: Float> Default for SaParams<F> {
    fn default() -> Self {
        let c = |x: f64| F::from(x).unwrap();
        Self {
            t0: c(10.0),
            t_min: c(0.001),
            cooling: c(0.1),
        }
    }
}

/// For every class, the inputs for which some remaining secret produces it.
fn feasible_inputs(k: &KnowledgeState<impl Float>, attack: &Attack) -> Result<Vec<Dfa>> {
    attack
        .psi_dfas
        .iter()
        .map(|psi| k.dfa.intersect(psi)?.project(&[attack.low()]))
        .collect()
}

/// `∃h. C_h ∧ ⋁ψ`: every input consistent with what is known.
pub fn project_consistent<F: Float>(k: &KnowledgeState<F>, attack: &Attack) -> Result<Dfa> {
    let feasible = feasible_inputs(k, attack)?;
    let mut acc: Option<Dfa> = None;
    for f in feasible {
        acc = Some(match acc {
            None => f,
            Some(a) => a.union(&f)?,
        });
    }
    let acc = acc.ok_or(Error::NoPaths)?;
    if acc.is_empty() {
        return Err(Error::EmptyLanguage);
    }
    Ok(acc)
}

/// The inputs worth trying: those for which at least two observations are
/// still possible. When no input can split the remaining secrets, every
/// input is consistent (the classes cover the whole domain), so this is the
/// full input space.
pub fn project_low<F: Float>(k: &KnowledgeState<F>, attack: &Attack) -> Result<Dfa> {
    if k.count.is_zero() {
        return Err(Error::EmptyLanguage);
    }
    if attack.psi_dfas.len() >= 2 {
        let feasible = feasible_inputs(k, attack)?;
        let ops: Vec<&Dfa> = feasible.iter().collect();
        let split = Dfa::product(&ops, |f| f.iter().filter(|&&a| a).count() >= 2, &vec![false; ops.len()])?;
        if !split.is_empty() {
            return Ok(split);
        }
    }
    from_constraint(&Constraint::truth(), attack.domain(), &[attack.low()])
}

/// Everything that stays fixed while one input is chosen.
pub struct Step<'a, F = f64> {
    attack: &'a Attack,
    knowledge: &'a KnowledgeState<F>,
    counter: Counter<'a>,
    c_l: Dfa,
    memo: RefCell<HashMap<String, Bits<F>>>,
}

impl<'a, F: Float> Step<'a, F> {
    pub fn new(attack: &'a Attack, knowledge: &'a KnowledgeState<F>, cache: &'a DfaCache, route: Route) -> Result<Self> {
        knowledge.ensure_cached(cache, attack.high());
        Ok(Self {
            attack,
            knowledge,
            counter: Counter {
                domain: attack.domain(),
                high: attack.high(),
                low: attack.low(),
                cache,
                route,
            },
            c_l: project_low(knowledge, attack)?,
            memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn c_l(&self) -> &Dfa {
        &self.c_l
    }

    pub fn admits(&self, l_val: &str) -> Result<bool> {
        self.c_l.accepts(&[(self.attack.low().to_string(), l_val.to_string())].into())
    }

    /// `I(h; o | l = l_val)` under the current knowledge, memoized per step.
    pub fn mutual_info(&self, l_val: &str) -> Result<Bits<F>> {
        if let Some(&i) = self.memo.borrow().get(l_val) {
            return Ok(i);
        }
        let i = mutual_info(&self.knowledge.c_h, self.attack.psis(), l_val, &self.counter)?;
        self.memo.borrow_mut().insert(l_val.to_string(), i);
        Ok(i)
    }
}

/// A uniformly random member of `C_l`.
pub fn get_input<F: Float, R: Rng + ?Sized>(step: &Step<'_, F>, rng: &mut R) -> Result<String> {
    let mut asg = Sampler::new(&step.c_l).sample(rng)?;
    Ok(asg.remove(step.attack.low()).unwrap_or_default())
}

/// Changes one uniformly chosen position of `l_val` to a different uniformly
/// chosen symbol, retrying until the result lies in `C_l`; falls back to a
/// fresh sample of `C_l`.
pub fn get_neighbor_input<F: Float, R: Rng + ?Sized>(l_val: &str, step: &Step<'_, F>, rng: &mut R) -> Result<String> {
    let alphabet = step.attack.domain().alphabet();
    let mut chars: Vec<char> = l_val.chars().collect();
    if !chars.is_empty() && alphabet.len() > 1 {
        for _ in 0..NEIGHBOR_RETRIES {
            let pos = rng.gen_range(0..chars.len());
            let old = chars[pos];
            let mut pick = rng.gen_range(0..alphabet.len() - 1);
            if alphabet[pick] == old || alphabet[..pick].contains(&old) {
                pick += 1;
            }
            chars[pos] = alphabet[pick];
            let cand: String = chars.iter().collect();
            if step.admits(&cand)? {
                return Ok(cand);
            }
            chars[pos] = old;
        }
    }
    get_input(step, rng)
}

/// Strategy M: a random model of `C_l`, with its expected gain.
pub fn attack_input_model<F: Float, R: Rng + ?Sized>(step: &Step<'_, F>, rng: &mut R) -> Result<(String, Bits<F>)> {
    let l = get_input(step, rng)?;
    let i = step.mutual_info(&l)?;
    Ok((l, i))
}

/// Simulated annealing over `C_l`, maximizing mutual information. Returns
/// the best input seen.
pub fn attack_input_sa<F: Float, R: Rng + ?Sized>(
    step: &Step<'_, F>,
    params: &SaParams<F>,
    rng: &mut R,
) -> Result<(String, Bits<F>)> {
    let mut l = get_input(step, rng)?;
    let mut i = step.mutual_info(&l)?;
    let mut best = (l.clone(), i);
    let mut t = params.t0;
    while t >= params.t_min {
        let cand = get_neighbor_input(&l, step, rng)?;
        let i_new = step.mutual_info(&cand)?;
        let accept = i_new > i || {
            let u = F::from(rng.gen::<f64>()).unwrap();
            ((i_new.value() - i.value()) / t).exp() > u
        };
        if accept {
            l = cand;
            i = i_new;
            if i > best.1 {
                best = (l.clone(), i);
            }
        }
        t = t - t * params.cooling;
    }
    Ok(best)
}
