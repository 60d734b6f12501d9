//! Two-point minimax floor on enumerable product spaces.
//!
//! For a two-point family {P₀, Q₀} with functional margin
//! |ψ(P₀) − ψ(Q₀)| ≥ γ, every estimator based on n i.i.d. samples obeys
//!
//!   Rₙ(P₀, Q₀) ≥ ½ |ψ(P₀) − ψ(Q₀)| (1 − TV(P₀ⁿ, Q₀ⁿ)).
//!
//! With n small enough to enumerate the product space, the Bayes-optimal
//! two-point risk under absolute loss is computable exactly (posterior
//! median per sample sequence), so the bound can be checked against a
//! universal lower-bound witness rather than a sampled estimator.

use crate::error::TheoryError;
use crate::scalar::{lit, Scalar};

use super::DiscreteTaskDistribution;

/// Enumeration cap: |Z|^n sequences with |Z| ≤ 8 and n ≤ 4 stays small.
pub const MAX_ENUMERABLE_N: usize = 4;

#[derive(Debug, Clone)]
pub struct LeCamReport<T: Scalar> {
    /// TV(P₀ⁿ, Q₀ⁿ), exact by enumeration.
    pub product_tv: T,
    /// ½ |ψ(P₀) − ψ(Q₀)| (1 − product_tv).
    pub bound: T,
    /// Exact Bayes risk of the equal-weight two-point problem under
    /// absolute loss.
    pub bayes_risk: T,
    /// The floor constant at the evaluated n: γ(1 − product_tv)/2.
    pub floor_constant: T,
    /// δ · bound: average-error floor contributed by an uncovered pair.
    pub error_floor: T,
}

/// Exact TV between n-fold products of two task distributions.
pub fn product_tv<T: Scalar>(
    p: &DiscreteTaskDistribution<T>,
    q: &DiscreteTaskDistribution<T>,
    n: usize,
) -> Result<T, TheoryError> {
    if p.atoms() != q.atoms() {
        return Err(TheoryError::OutcomeSpaceMismatch {
            left: p.atoms(),
            right: q.atoms(),
        });
    }
    if n == 0 || n > MAX_ENUMERABLE_N {
        return Err(TheoryError::EnumerationTooLarge {
            n,
            limit: MAX_ENUMERABLE_N,
        });
    }
    let atoms = p.atoms();
    let mut l1 = T::zero();
    let mut sequence = vec![0usize; n];
    loop {
        let mut pp = T::one();
        let mut qq = T::one();
        for &z in &sequence {
            pp *= p.probs()[z];
            qq *= q.probs()[z];
        }
        l1 += (pp - qq).abs();
        // odometer increment
        let mut pos = 0;
        loop {
            sequence[pos] += 1;
            if sequence[pos] < atoms {
                break;
            }
            sequence[pos] = 0;
            pos += 1;
            if pos == n {
                return Ok(l1 * lit(0.5));
            }
        }
    }
}

/// Compute the two-point bound and the exact Bayes risk; `delta` scales the
/// resulting average-error floor and `gamma` is the required margin.
pub fn lecam_floor<T: Scalar>(
    p0: &DiscreteTaskDistribution<T>,
    q0: &DiscreteTaskDistribution<T>,
    n: usize,
    delta: T,
    gamma: T,
) -> Result<LeCamReport<T>, TheoryError> {
    let margin = (p0.psi - q0.psi).abs();
    if margin < gamma {
        return Err(TheoryError::MarginTooSmall {
            margin: margin.to_f64().unwrap_or(f64::NAN),
            gamma: gamma.to_f64().unwrap_or(f64::NAN),
        });
    }
    let tv = product_tv(p0, q0, n)?;
    let half = lit::<T>(0.5);
    let bound = half * margin * (T::one() - tv);

    // Exact Bayes risk under the equal-weight two-point prior and absolute
    // loss: per sequence the optimal estimate is the posterior median,
    // i.e. the ψ of the more likely model (any value between them at ties).
    let atoms = p0.atoms();
    let mut bayes = T::zero();
    let mut sequence = vec![0usize; n];
    'enumerate: loop {
        let mut pp = T::one();
        let mut qq = T::one();
        for &z in &sequence {
            pp *= p0.probs()[z];
            qq *= q0.probs()[z];
        }
        // posterior weights ∝ (pp, qq); estimate ψ(P₀) if pp ≥ qq else ψ(Q₀)
        let risk_here = if pp >= qq {
            half * qq * margin
        } else {
            half * pp * margin
        };
        bayes += risk_here;
        let mut pos = 0;
        loop {
            sequence[pos] += 1;
            if sequence[pos] < atoms {
                break;
            }
            sequence[pos] = 0;
            pos += 1;
            if pos == n {
                break 'enumerate;
            }
        }
    }

    let floor_constant = gamma * (T::one() - tv) * half;
    Ok(LeCamReport {
        product_tv: tv,
        bound,
        bayes_risk: bayes,
        floor_constant,
        error_floor: delta * bound,
    })
}
