//! Pushforward of the strategic meta-prior through an inference-time task
//! map T, and the induced reduction of uncovered mass:
//! δ_SPN = δ − recovered_mass, with δ_SPN < δ exactly when the recovered
//! set has positive mass.

use crate::error::TheoryError;
use crate::scalar::Scalar;

use super::{uncovered_mass, DiscreteMetaPrior, DiscreteTaskDistribution};

/// A task-level map applied by the inference-time alignment stage. It must
/// fix every member of the non-strategic support.
pub type TaskMap<'a, T> =
    dyn Fn(&DiscreteTaskDistribution<T>) -> DiscreteTaskDistribution<T> + 'a;

#[derive(Debug, Clone)]
pub struct PushforwardReport<T: Scalar> {
    pub delta: T,
    pub delta_spn: T,
    pub recovered_mass: T,
    /// Strategic task indices recovered into the non-strategic support.
    pub recovered: Vec<usize>,
}

/// Compute δ, δ_SPN and the recovered mass for a map T satisfying the
/// support-fixing condition T(P) = P on the non-strategic support.
pub fn spn_pushforward_delta<T: Scalar>(
    strategic: &DiscreteMetaPrior<T>,
    nonstrategic: &DiscreteMetaPrior<T>,
    map: &TaskMap<'_, T>,
) -> Result<PushforwardReport<T>, TheoryError> {
    // precondition: T fixes the non-strategic support
    for (index, task) in nonstrategic.support().iter().enumerate() {
        let image = map(task);
        if !image.same_as(task) {
            return Err(TheoryError::SupportNotFixed { index });
        }
    }

    let base = uncovered_mass(strategic, nonstrategic)?;
    let mut delta_spn = T::zero();
    let mut recovered_mass = T::zero();
    let mut recovered = Vec::new();
    for (i, (task, &w)) in strategic
        .tasks()
        .iter()
        .zip(strategic.weights().iter())
        .enumerate()
    {
        if w <= T::zero() {
            continue;
        }
        let image = map(task);
        let in_support_before = nonstrategic.contains(task);
        let in_support_after = nonstrategic.contains(&image);
        if !in_support_after {
            delta_spn += w;
        }
        if !in_support_before && in_support_after {
            recovered_mass += w;
            recovered.push(i);
        }
    }

    debug_assert!(
        (base.delta - recovered_mass - delta_spn).abs() <= T::from_f64(1e-12).unwrap(),
        "pushforward identity violated"
    );
    Ok(PushforwardReport {
        delta: base.delta,
        delta_spn,
        recovered_mass,
        recovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(probs: Vec<f64>, psi: f64) -> DiscreteTaskDistribution<f64> {
        DiscreteTaskDistribution::new(probs, psi).unwrap()
    }

    fn three_task_setup() -> (DiscreteMetaPrior<f64>, DiscreteMetaPrior<f64>) {
        let p1 = dist(vec![0.9, 0.1], 0.1); // uncovered
        let p2 = dist(vec![0.5, 0.5], 0.5); // shared
        let p3 = dist(vec![0.2, 0.8], 0.8); // non-strategic only
        let strategic = DiscreteMetaPrior::new(vec![p1, p2.clone()], vec![0.3, 0.7]).unwrap();
        let nonstrategic = DiscreteMetaPrior::new(vec![p2, p3], vec![0.6, 0.4]).unwrap();
        (strategic, nonstrategic)
    }

    #[test]
    fn identity_map_recovers_nothing() {
        let (s, ns) = three_task_setup();
        let report = spn_pushforward_delta(&s, &ns, &|t| t.clone()).unwrap();
        assert_eq!(report.recovered_mass, 0.0);
        assert!((report.delta_spn - report.delta).abs() < 1e-15);
    }

    #[test]
    fn full_recovery_drives_delta_to_zero() {
        let (s, ns) = three_task_setup();
        let shared = dist(vec![0.5, 0.5], 0.5);
        let map = move |t: &DiscreteTaskDistribution<f64>| {
            if ns_contains(t) {
                t.clone()
            } else {
                shared.clone()
            }
        };
        // helper closure capturing the support test
        fn ns_contains(t: &DiscreteTaskDistribution<f64>) -> bool {
            let p2 = DiscreteTaskDistribution::new(vec![0.5, 0.5], 0.5).unwrap();
            let p3 = DiscreteTaskDistribution::new(vec![0.2, 0.8], 0.8).unwrap();
            p2.same_as(t) || p3.same_as(t)
        }
        let report = spn_pushforward_delta(&s, &ns, &map).unwrap();
        assert_eq!(report.delta_spn, 0.0);
        assert!((report.recovered_mass - 0.3).abs() < 1e-15);
        assert_eq!(report.recovered, vec![0]);
    }

    #[test]
    fn support_fixing_violation_names_the_task() {
        let (s, ns) = three_task_setup();
        let elsewhere = dist(vec![0.05, 0.95], 0.95);
        let map = move |_: &DiscreteTaskDistribution<f64>| elsewhere.clone();
        match spn_pushforward_delta(&s, &ns, &map) {
            Err(TheoryError::SupportNotFixed { index }) => assert_eq!(index, 0),
            other => panic!("expected SupportNotFixed, got {other:?}"),
        }
    }

    #[test]
    fn monotone_and_exact_identity() {
        let (s, ns) = three_task_setup();
        let p2 = dist(vec![0.5, 0.5], 0.5);
        // partial map: moves the uncovered task somewhere still uncovered
        let off_support = dist(vec![0.85, 0.15], 0.15);
        let map = move |t: &DiscreteTaskDistribution<f64>| {
            if t.same_as(&dist(vec![0.9, 0.1], 0.1)) {
                off_support.clone()
            } else {
                t.clone()
            }
        };
        let _ = p2;
        let report = spn_pushforward_delta(&s, &ns, &map).unwrap();
        assert!(report.delta_spn <= report.delta);
        assert!((report.delta - report.recovered_mass - report.delta_spn).abs() < 1e-15);
    }
}
