use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::strategy::{attack_input_model, attack_input_sa, SaParams, Step, Strategy};
use super::{Attack, KnowledgeState};
use crate::count::{CacheStats, DfaCache, Route};
use crate::error::{Error, Result};
use crate::info::Bits;

/// Separates the partition-audit stream from the strategy's stream.
const AUDIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// When to give up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_steps: usize,
    pub time_budget: Option<Duration>,
    /// Consecutive steps without expected gain before leakage is declared
    /// exhausted.
    pub stagnation_steps: usize,
    pub stagnation_bits: f64,
    /// Random `(h, l)` pairs checked for a unique observation before the run.
    pub partition_samples: usize,
    /// Empty the automaton cache before every step.
    pub reset_cache_each_step: bool,
    /// Confirm every incremental count against a from-scratch recount.
    pub verify_incremental: bool,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            max_steps: 500,
            time_budget: None,
            stagnation_steps: 3,
            stagnation_bits: 1e-6,
            partition_samples: 200,
            reset_cache_each_step: false,
            verify_incremental: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The secret is known.
    Complete,
    /// No input can reveal anything more.
    Exhausted,
    /// Step or time budget ran out first.
    Budget,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Exhausted => 2,
            Outcome::Budget => 3,
        }
    }

    pub fn is_complete(self) -> bool {
        self == Outcome::Complete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<F = f64> {
    pub step: usize,
    pub entropy_before: Bits<F>,
    pub entropy_after: Bits<F>,
    pub input: String,
    pub observation_id: usize,
    pub cost: u64,
    /// Expected gain of the input when it was chosen.
    pub mutual_info: Bits<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace<F = f64> {
    pub strategy: Strategy,
    pub seed: u64,
    pub secret: String,
    pub outcome: Outcome,
    pub steps: usize,
    pub h_init: Bits<F>,
    pub h_final: Bits<F>,
    pub rows: Vec<TraceRow<F>>,
    /// Cache counters as of the end of the run.
    pub cache: CacheStats,
    pub wall_time_secs: f64,
}

impl<F: Float + std::fmt::Display> AttackTrace<F> {
    pub const CSV_HEADER: &'static str = "step,entropy_bits,input,observation_id,cost";

    /// One line per step; the entropy column is the value after the step's
    /// observation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{},{},{}",
                r.step, r.entropy_after, r.input, r.observation_id, r.cost
            );
        }
        out
    }

    pub fn inputs(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.input.as_str()).collect()
    }

    /// Everything but timings and cache counters.
    pub fn same_attack(&self, other: &Self) -> bool {
        self.rows == other.rows && self.outcome == other.outcome && self.secret == other.secret
    }
}

/// Attacks the secret `secret` until it is known, nothing more can be
/// learned, or a budget runs out.
pub fn run_attack<F: Float>(
    attack: &Attack,
    secret: &str,
    strategy: Strategy,
    params: &SaParams<F>,
    budgets: &Budgets,
    seed: u64,
    cache: &DfaCache,
) -> Result<AttackTrace<F>> {
    let started = Instant::now();
    attack.domain().validate(attack.high(), secret)?;
    let mut audit_rng = ChaCha8Rng::seed_from_u64(seed ^ AUDIT_STREAM);
    attack.check_partition(budgets.partition_samples, &mut audit_rng)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let route = match (strategy.route(), budgets.verify_incremental) {
        (Route::Incremental, true) => Route::Checked,
        (r, _) => r,
    };
    let gain_floor = F::from(budgets.stagnation_bits).unwrap();
    let mut knowledge: KnowledgeState<F> = KnowledgeState::initial(attack, cache)?;
    let h_init = knowledge.entropy;
    let mut rows = Vec::new();
    let mut flat_steps = 0;
    let outcome = loop {
        if knowledge.entropy.value() == F::zero() {
            break Outcome::Complete;
        }
        if flat_steps >= budgets.stagnation_steps {
            break Outcome::Exhausted;
        }
        if rows.len() >= budgets.max_steps || budgets.time_budget.is_some_and(|b| started.elapsed() >= b) {
            break Outcome::Budget;
        }
        if budgets.reset_cache_each_step {
            cache.clear();
        }
        let (input, gain) = {
            let step = Step::new(attack, &knowledge, cache, route)?;
            match strategy {
                Strategy::Model => attack_input_model(&step, &mut rng)?,
                Strategy::Sa | Strategy::SaIncremental => attack_input_sa(&step, params, &mut rng)?,
            }
        };
        flat_steps = if gain.value() < gain_floor { flat_steps + 1 } else { 0 };
        let observed = attack.observe(secret, &input)?;
        let next = knowledge.update(attack, observed, &input, cache)?;
        if !next.admits(attack, secret)? {
            return Err(Error::SecretExcluded {
                secret: secret.to_string(),
            });
        }
        rows.push(TraceRow {
            step: next.step,
            entropy_before: knowledge.entropy,
            entropy_after: next.entropy,
            input,
            observation_id: observed,
            cost: attack.classes()[observed].representative_cost,
            mutual_info: gain,
        });
        knowledge = next;
    };
    Ok(AttackTrace {
        strategy,
        seed,
        secret: secret.to_string(),
        outcome,
        steps: rows.len(),
        h_init,
        h_final: knowledge.entropy,
        rows,
        cache: cache.stats(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{parse_constraint, Domain, Signature};
    use crate::engine::PathConstraint;

    fn pin(d: &Domain) -> Attack {
        let sig = Signature::high_low();
        let n = d.length_bound();
        let paths: Vec<PathConstraint> = (0..=n)
            .map(|i| {
                let mut parts: Vec<String> = (0..i).map(|j| format!("(= (charAt l {j}) (charAt h {j}))")).collect();
                if i < n {
                    parts.push(format!("(!= (charAt l {i}) (charAt h {i}))"));
                }
                let c = parse_constraint(&format!("(and {})", parts.join(" ")), &sig, d).unwrap();
                PathConstraint::new(c, 63 + 15 * i as u64)
            })
            .collect();
        Attack::new(d, &sig, &paths, 10).unwrap()
    }

    #[test]
    fn model_strategy_recovers_a_short_pin() {
        let d = Domain::digits(2);
        let attack = pin(&d);
        let cache = DfaCache::new();
        let t: AttackTrace =
            run_attack(&attack, "37", Strategy::Model, &SaParams::default(), &Budgets::default(), 7, &cache).unwrap();
        assert_eq!(t.outcome, Outcome::Complete);
        assert_eq!(t.rows.last().unwrap().input, "37");
        assert_eq!(t.h_final.value(), 0.0);
        assert!(t.rows.windows(2).all(|w| w[1].entropy_after <= w[0].entropy_after));
        let csv = t.to_csv();
        assert!(csv.starts_with("step,entropy_bits,input,observation_id,cost\n"));
        assert_eq!(csv.lines().count(), t.steps + 1);
    }

    #[test]
    fn single_class_exhausts() {
        let d = Domain::digits(2);
        let sig = Signature::high_low();
        let paths = vec![PathConstraint::new(crate::constraint::Constraint::truth(), 5)];
        let attack = Attack::new(&d, &sig, &paths, 10).unwrap();
        let cache = DfaCache::new();
        let t: AttackTrace =
            run_attack(&attack, "42", Strategy::Sa, &SaParams::default(), &Budgets::default(), 1, &cache).unwrap();
        assert_eq!(t.outcome, Outcome::Exhausted);
        assert_eq!(t.outcome.exit_code(), 2);
        assert_eq!(t.h_final, t.h_init);
    }

    #[test]
    fn step_budget() {
        let d = Domain::digits(3);
        let attack = pin(&d);
        let cache = DfaCache::new();
        let budgets = Budgets {
            max_steps: 2,
            ..Budgets::default()
        };
        let t: AttackTrace =
            run_attack(&attack, "999", Strategy::Model, &SaParams::default(), &budgets, 3, &cache).unwrap();
        assert_eq!(t.outcome, Outcome::Budget);
        assert_eq!(t.steps, 2);
    }
}
