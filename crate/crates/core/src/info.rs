//! Shannon measures over a uniformly distributed secret, computed from exact
//! model counts.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{Float, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::count::Counter;
use crate::error::{Error, Result};

/// A nonnegative finite quantity of information in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bits<F = f64>(F);

impl<F: Float> Bits<F> {
    /// Clamps tiny negative rounding noise to zero.
    pub fn new(value: F) -> Self {
        assert!(value.is_finite(), "information must be finite");
        Bits(value.max(F::zero()))
    }

    pub fn zero() -> Self {
        Bits(F::zero())
    }

    pub fn value(self) -> F {
        self.0
    }
}

impl<F: Float + fmt::Display> fmt::Display for Bits<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*}", p, self.0),
            None => write!(f, "{}", self.0),
        }
    }
}

fn cast<F: Float>(x: f64) -> F {
    F::from(x).expect("f64 fits the float type")
}

/// `log2 n` from the bit length plus the leading 53 bits, so it stays exact
/// to double precision for counts far beyond `f64::MAX`.
pub fn log2_count<F: Float>(n: &BigUint) -> F {
    assert!(!n.is_zero(), "log2 of zero");
    let bits = n.bits();
    let v = if bits <= 53 {
        n.to_f64().unwrap().log2()
    } else {
        let shift = bits - 53;
        (n >> shift).to_f64().unwrap().log2() + shift as f64
    };
    cast(v)
}

/// `log2 #C_h`; zero for a single model.
pub fn entropy_of_count<F: Float>(n: &BigUint) -> Result<Bits<F>> {
    if n.is_zero() {
        return Err(Error::Unsatisfiable);
    }
    Ok(Bits::new(log2_count(n)))
}

/// `Σ (c_i / total) · log2 c_i`, zero counts contributing nothing.
pub fn conditional_entropy_of_counts<F: Float>(total: &BigUint, counts: &[BigUint]) -> Result<Bits<F>> {
    if total.is_zero() {
        return Err(Error::Unsatisfiable);
    }
    let log_total: F = log2_count(total);
    let two = cast::<F>(2.0);
    let mut acc = F::zero();
    for c in counts.iter().filter(|c| !c.is_zero()) {
        let lc: F = log2_count(c);
        acc = acc + two.powf(lc - log_total) * lc;
    }
    Ok(Bits::new(acc))
}

/// `p(o_i | l_val)` for every class, as floats.
pub fn probabilities<F: Float>(total: &BigUint, counts: &[BigUint]) -> Vec<F> {
    let log_total: F = log2_count(total);
    counts
        .iter()
        .map(|c| {
            if c.is_zero() {
                F::zero()
            } else {
                cast::<F>(2.0).powf(log2_count::<F>(c) - log_total)
            }
        })
        .collect()
}

/// `H(h) = log2 #C_h`.
pub fn entropy<F: Float>(c_h: &Constraint, counter: &Counter<'_>) -> Result<Bits<F>> {
    entropy_of_count(&counter.secrets(c_h)?)
}

/// `#(C_h ∧ ψ_i[l ↦ l_val])` for every class.
pub fn observation_counts(c_h: &Constraint, psis: &[Constraint], l_val: &str, counter: &Counter<'_>) -> Result<Vec<BigUint>> {
    psis.iter().map(|psi| counter.secrets_with(c_h, psi, l_val)).collect()
}

/// `H(h | o, l = l_val)`.
pub fn conditional_entropy<F: Float>(
    c_h: &Constraint,
    psis: &[Constraint],
    l_val: &str,
    counter: &Counter<'_>,
) -> Result<Bits<F>> {
    let total = counter.secrets(c_h)?;
    conditional_entropy_of_counts(&total, &observation_counts(c_h, psis, l_val, counter)?)
}

/// `I(h; o | l = l_val) = H(h) − H(h | o, l = l_val)`, never negative.
pub fn mutual_info<F: Float>(c_h: &Constraint, psis: &[Constraint], l_val: &str, counter: &Counter<'_>) -> Result<Bits<F>> {
    let total = counter.secrets(c_h)?;
    let counts = observation_counts(c_h, psis, l_val, counter)?;
    mutual_info_of_counts(&total, &counts)
}

pub fn mutual_info_of_counts<F: Float>(total: &BigUint, counts: &[BigUint]) -> Result<Bits<F>> {
    let h: Bits<F> = entropy_of_count(total)?;
    let hc: Bits<F> = conditional_entropy_of_counts(total, counts)?;
    Ok(Bits::new(h.value() - hc.value()))
}
