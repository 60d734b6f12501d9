//! Executable verification of the discrete meta-prior mismatch theory:
//! the TV ≥ δ bound, the two-point minimax error floor, and the
//! pushforward reduction of uncovered mass. Everything is finite and
//! enumerated exactly.

pub mod battery;
pub mod lecam;
pub mod pushforward;

pub use battery::{run_batteries, BatteryConfig, BatteryOutcome, VerificationRow};
pub use lecam::{lecam_floor, product_tv, LeCamReport};
pub use pushforward::{spn_pushforward_delta, PushforwardReport, TaskMap};

use crate::error::TheoryError;
use crate::scalar::{lit, Scalar};

/// Per-atom tolerance deciding when two task distributions are "the same"
/// (the executable stand-in for support membership).
pub const ATOM_TOL: f64 = 1e-12;

/// A task distribution over a small finite outcome space, together with
/// its scalar prediction-relevant functional ψ(P).
#[derive(Debug, Clone)]
pub struct DiscreteTaskDistribution<T: Scalar> {
    probs: Vec<T>,
    pub psi: T,
}

impl<T: Scalar> DiscreteTaskDistribution<T> {
    pub fn new(probs: Vec<T>, psi: T) -> Result<Self, TheoryError> {
        if probs.is_empty() || probs.len() > 8 {
            return Err(TheoryError::InvalidDistribution(format!(
                "outcome space must have 1..=8 atoms, got {}",
                probs.len()
            )));
        }
        let mut total = T::zero();
        for &p in &probs {
            if p < T::zero() || !p.is_finite() {
                return Err(TheoryError::InvalidDistribution(
                    "negative or non-finite probability".into(),
                ));
            }
            total += p;
        }
        if (total - T::one()).abs() > lit(1e-12) {
            return Err(TheoryError::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteTaskDistribution { probs, psi })
    }

    /// Bernoulli(p) over {0, 1} with ψ = mean.
    pub fn bernoulli(p: T) -> Result<Self, TheoryError> {
        DiscreteTaskDistribution::new(vec![T::one() - p, p], p)
    }

    pub fn atoms(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Equality up to the per-atom tolerance.
    pub fn same_as(&self, other: &Self) -> bool {
        self.probs.len() == other.probs.len()
            && self
                .probs
                .iter()
                .zip(other.probs.iter())
                .all(|(&a, &b)| (a - b).abs() <= lit(ATOM_TOL))
    }

    /// Exact TV distance between two distributions on the same outcome
    /// space: half the L1 distance (equivalently the max over subsets).
    pub fn tv(&self, other: &Self) -> Result<T, TheoryError> {
        if self.atoms() != other.atoms() {
            return Err(TheoryError::OutcomeSpaceMismatch {
                left: self.atoms(),
                right: other.atoms(),
            });
        }
        let l1: T = self
            .probs
            .iter()
            .zip(other.probs.iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum();
        Ok(l1 * lit(0.5))
    }
}

/// Finite weighted family of task distributions.
#[derive(Debug, Clone)]
pub struct DiscreteMetaPrior<T: Scalar> {
    tasks: Vec<DiscreteTaskDistribution<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteMetaPrior<T> {
    pub fn new(
        tasks: Vec<DiscreteTaskDistribution<T>>,
        weights: Vec<T>,
    ) -> Result<Self, TheoryError> {
        if tasks.is_empty() || tasks.len() != weights.len() {
            return Err(TheoryError::InvalidDistribution(
                "need matching non-empty task and weight lists".into(),
            ));
        }
        let mut total = T::zero();
        for &w in &weights {
            if w < T::zero() || !w.is_finite() {
                return Err(TheoryError::InvalidDistribution(
                    "negative or non-finite weight".into(),
                ));
            }
            total += w;
        }
        if (total - T::one()).abs() > lit(1e-12) {
            return Err(TheoryError::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let atoms = tasks[0].atoms();
        if tasks.iter().any(|t| t.atoms() != atoms) {
            return Err(TheoryError::OutcomeSpaceMismatch {
                left: atoms,
                right: tasks.iter().map(|t| t.atoms()).find(|&a| a != atoms).unwrap(),
            });
        }
        Ok(DiscreteMetaPrior { tasks, weights })
    }

    pub fn tasks(&self) -> &[DiscreteTaskDistribution<T>] {
        &self.tasks
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn atoms(&self) -> usize {
        self.tasks[0].atoms()
    }

    /// Support = positive-weight members.
    pub fn support(&self) -> Vec<&DiscreteTaskDistribution<T>> {
        self.tasks
            .iter()
            .zip(self.weights.iter())
            .filter(|(_, &w)| w > T::zero())
            .map(|(t, _)| t)
            .collect()
    }

    pub fn contains(&self, task: &DiscreteTaskDistribution<T>) -> bool {
        self.support().iter().any(|t| t.same_as(task))
    }

    /// TV distance between two meta-priors over the joint support: group
    /// equal tasks, then take half the L1 distance of the grouped weights.
    pub fn tv(&self, other: &Self) -> Result<T, TheoryError> {
        if self.atoms() != other.atoms() {
            return Err(TheoryError::OutcomeSpaceMismatch {
                left: self.atoms(),
                right: other.atoms(),
            });
        }
        // group tasks equal up to tolerance, accumulating each prior's mass
        let mut groups: Vec<(DiscreteTaskDistribution<T>, T, T)> = Vec::new();
        for (task, &w) in self.tasks.iter().zip(self.weights.iter()) {
            match groups.iter_mut().find(|(rep, _, _)| rep.same_as(task)) {
                Some((_, ws, _)) => *ws += w,
                None => groups.push((task.clone(), w, T::zero())),
            }
        }
        for (task, &w) in other.tasks.iter().zip(other.weights.iter()) {
            match groups.iter_mut().find(|(rep, _, _)| rep.same_as(task)) {
                Some((_, _, wo)) => *wo += w,
                None => groups.push((task.clone(), T::zero(), w)),
            }
        }
        let l1: T = groups.iter().map(|(_, a, b)| (*a - *b).abs()).sum();
        Ok(l1 * lit(0.5))
    }
}

/// Mismatch summary between a strategic and a non-strategic meta-prior.
#[derive(Debug, Clone)]
pub struct MismatchReport<T: Scalar> {
    /// Indices (into the strategic prior's task list) of uncovered tasks.
    pub uncovered: Vec<usize>,
    /// Uncovered strategic mass δ.
    pub delta: T,
    /// TV distance between the two meta-priors.
    pub tv: T,
    /// Smallest ψ-margin between an uncovered task and the non-strategic
    /// support; None when nothing is uncovered. Feeds the two-point floor.
    pub gamma: Option<T>,
}

/// Uncovered strategic mass δ and the TV lower bound TV ≥ δ.
pub fn uncovered_mass<T: Scalar>(
    strategic: &DiscreteMetaPrior<T>,
    nonstrategic: &DiscreteMetaPrior<T>,
) -> Result<MismatchReport<T>, TheoryError> {
    if strategic.atoms() != nonstrategic.atoms() {
        return Err(TheoryError::OutcomeSpaceMismatch {
            left: strategic.atoms(),
            right: nonstrategic.atoms(),
        });
    }
    let mut uncovered = Vec::new();
    let mut delta = T::zero();
    for (i, (task, &w)) in strategic
        .tasks()
        .iter()
        .zip(strategic.weights().iter())
        .enumerate()
    {
        if w > T::zero() && !nonstrategic.contains(task) {
            uncovered.push(i);
            delta += w;
        }
    }
    let tv = strategic.tv(nonstrategic)?;
    debug_assert!(tv >= delta - lit(1e-12), "TV {tv} below delta {delta}");
    let mut gamma: Option<T> = None;
    for &i in &uncovered {
        let psi_p = strategic.tasks()[i].psi;
        for q in nonstrategic.support() {
            let margin = (psi_p - q.psi).abs();
            gamma = Some(match gamma {
                Some(g) => g.min(margin),
                None => margin,
            });
        }
    }
    Ok(MismatchReport {
        uncovered,
        delta,
        tv,
        gamma,
    })
}
