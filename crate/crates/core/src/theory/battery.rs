//! Randomized verification batteries over the finite constructions, with
//! one CSV row per checked configuration.

use std::io::Write;
use std::path::Path;

use crate::error::TheoryError;
use crate::numeric::RngStream;
use crate::scalar::{lit, Scalar};

use super::lecam::lecam_floor;
use super::pushforward::spn_pushforward_delta;
use super::{uncovered_mass, DiscreteMetaPrior, DiscreteTaskDistribution};

/// Battery sizes and seed.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub lemma_pairs: usize,
    pub lecam_pairs: usize,
    pub pushforward_configs: usize,
    pub seed: u64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            lemma_pairs: 1000,
            lecam_pairs: 100,
            pushforward_configs: 500,
            seed: 0,
        }
    }
}

/// One verification row; inapplicable fields stay `None`.
#[derive(Debug, Clone)]
pub struct VerificationRow {
    pub config_id: String,
    pub delta: Option<f64>,
    pub tv: Option<f64>,
    pub bound: Option<f64>,
    pub bayes_risk: Option<f64>,
    pub delta_spn: Option<f64>,
    pub recovered_mass: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct BatteryOutcome {
    pub rows: Vec<VerificationRow>,
    pub all_passed: bool,
    /// First failing config id, if any.
    pub first_failure: Option<String>,
}

fn random_simplex<T: Scalar>(rng: &mut RngStream, atoms: usize) -> Vec<T> {
    // exponential draws normalized to the simplex
    let raw: Vec<f64> = (0..atoms)
        .map(|_| (-(1.0 - rng.uniform::<f64>()).ln()).max(1e-9))
        .collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<T> = raw.iter().map(|&v| lit(v / total)).collect();
    // force exact unit sum at working precision
    let acc: T = probs.iter().copied().sum();
    let last = probs.len() - 1;
    probs[last] += T::one() - acc;
    probs
}

fn mean_functional<T: Scalar>(probs: &[T]) -> T {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| lit::<T>(i as f64) * p)
        .sum()
}

fn random_task<T: Scalar>(rng: &mut RngStream, atoms: usize) -> DiscreteTaskDistribution<T> {
    let probs = random_simplex(rng, atoms);
    let psi = mean_functional(&probs);
    DiscreteTaskDistribution::new(probs, psi).expect("constructed simplex valid")
}

fn random_weights<T: Scalar>(rng: &mut RngStream, count: usize) -> Vec<T> {
    random_simplex(rng, count)
}

/// Random pair of meta-priors over a shared task pool with partial overlap.
fn random_prior_pair<T: Scalar>(
    rng: &mut RngStream,
) -> (DiscreteMetaPrior<T>, DiscreteMetaPrior<T>) {
    let atoms = 2 + rng.index(3);
    let pool: Vec<DiscreteTaskDistribution<T>> =
        (0..(2 + rng.index(4))).map(|_| random_task(rng, atoms)).collect();
    let pick = |rng: &mut RngStream, pool: &[DiscreteTaskDistribution<T>]| {
        let count = 1 + rng.index(pool.len());
        let perm = rng.permutation(pool.len());
        let tasks: Vec<DiscreteTaskDistribution<T>> =
            perm[..count].iter().map(|&i| pool[i].clone()).collect();
        let weights = random_weights(rng, count);
        DiscreteMetaPrior::new(tasks, weights).expect("constructed prior valid")
    };
    (pick(rng, &pool), pick(rng, &pool))
}

/// Constructed pair with δ = 0.3: the 0.3-weight strategic task lies
/// outside the non-strategic support.
pub fn constructed_delta_03<T: Scalar>() -> (DiscreteMetaPrior<T>, DiscreteMetaPrior<T>) {
    let p1 = DiscreteTaskDistribution::new(vec![lit(0.9), lit(0.1)], lit(0.1)).unwrap();
    let p2 = DiscreteTaskDistribution::new(vec![lit(0.5), lit(0.5)], lit(0.5)).unwrap();
    let p3 = DiscreteTaskDistribution::new(vec![lit(0.2), lit(0.8)], lit(0.8)).unwrap();
    (
        DiscreteMetaPrior::new(vec![p1, p2.clone()], vec![lit(0.3), lit(0.7)]).unwrap(),
        DiscreteMetaPrior::new(vec![p2, p3], vec![lit(0.6), lit(0.4)]).unwrap(),
    )
}

/// Constructed pair with disjoint supports: δ = TV = 1.
pub fn constructed_delta_1<T: Scalar>() -> (DiscreteMetaPrior<T>, DiscreteMetaPrior<T>) {
    let p1 = DiscreteTaskDistribution::new(vec![T::one(), T::zero()], T::zero()).unwrap();
    let p2 = DiscreteTaskDistribution::new(vec![T::zero(), T::one()], T::one()).unwrap();
    (
        DiscreteMetaPrior::new(vec![p1], vec![T::one()]).unwrap(),
        DiscreteMetaPrior::new(vec![p2], vec![T::one()]).unwrap(),
    )
}

/// Run the three batteries and collect per-config rows.
pub fn run_batteries(config: &BatteryConfig) -> Result<BatteryOutcome, TheoryError> {
    let mut rows = Vec::new();
    let root = RngStream::new(config.seed);

    // Lemma battery: TV >= delta with slack >= -1e-12, plus the two pins.
    {
        let mut rng = root.child(1);
        for case in 0..config.lemma_pairs {
            let (s, ns): (DiscreteMetaPrior<f64>, DiscreteMetaPrior<f64>) = match case {
                0 => constructed_delta_03(),
                1 => constructed_delta_1(),
                _ => random_prior_pair(&mut rng),
            };
            let report = uncovered_mass(&s, &ns)?;
            let mut pass = report.tv >= report.delta - 1e-12;
            if case == 0 {
                pass &= (report.delta - 0.3).abs() < 1e-12 && report.tv >= 0.3 - 1e-12;
            }
            if case == 1 {
                pass &= (report.delta - 1.0).abs() < 1e-12 && (report.tv - 1.0).abs() < 1e-12;
            }
            rows.push(VerificationRow {
                config_id: format!("lemma-{case:04}"),
                delta: Some(report.delta),
                tv: Some(report.tv),
                bound: None,
                bayes_risk: None,
                delta_spn: None,
                recovered_mass: None,
                pass,
            });
        }
    }

    // Two-point battery: exact Bayes risk >= bound at n in {1,2,3}.
    {
        let mut rng = root.child(2);
        for case in 0..config.lecam_pairs {
            let (p0, q0): (DiscreteTaskDistribution<f64>, DiscreteTaskDistribution<f64>) =
                if case == 0 {
                    (
                        DiscreteTaskDistribution::bernoulli(0.2).unwrap(),
                        DiscreteTaskDistribution::bernoulli(0.8).unwrap(),
                    )
                } else {
                    // Bernoulli or trinomial pair with margin at least 0.1
                    loop {
                        let atoms = 2 + rng.index(2);
                        let a = random_task::<f64>(&mut rng, atoms);
                        let b = random_task::<f64>(&mut rng, atoms);
                        if (a.psi - b.psi).abs() >= 0.1 {
                            break (a, b);
                        }
                    }
                };
            let gamma = 0.1f64.min((p0.psi - q0.psi).abs());
            for n in 1..=3usize {
                let report = lecam_floor(&p0, &q0, n, 1.0, gamma)?;
                let mut pass = report.bayes_risk >= report.bound - 1e-12;
                if case == 0 && n == 1 {
                    pass &= (report.bound - 0.12).abs() < 1e-12;
                }
                rows.push(VerificationRow {
                    config_id: format!("lecam-{case:04}-n{n}"),
                    delta: None,
                    tv: Some(report.product_tv),
                    bound: Some(report.bound),
                    bayes_risk: Some(report.bayes_risk),
                    delta_spn: None,
                    recovered_mass: None,
                    pass,
                });
            }
        }
    }

    // Pushforward battery: delta_spn = delta - recovered exactly, never
    // above delta, strictly below iff recovered mass is positive.
    {
        let mut rng = root.child(3);
        for case in 0..config.pushforward_configs {
            let (s, ns): (DiscreteMetaPrior<f64>, DiscreteMetaPrior<f64>) = if case == 0 {
                constructed_delta_03()
            } else {
                random_prior_pair(&mut rng)
            };
            // map: fix the non-strategic support, send uncovered tasks into
            // the support with probability one half
            let ns_clone = ns.clone();
            let target = ns.support().first().map(|t| (*t).clone());
            let decisions: Vec<bool> = (0..s.tasks().len())
                .map(|_| case == 0 || rng.bernoulli(0.5))
                .collect();
            let tasks_snapshot: Vec<DiscreteTaskDistribution<f64>> = s.tasks().to_vec();
            let map = move |t: &DiscreteTaskDistribution<f64>| {
                if ns_clone.contains(t) {
                    return t.clone();
                }
                let idx = tasks_snapshot.iter().position(|u| u.same_as(t));
                match (idx.map(|i| decisions[i]).unwrap_or(false), &target) {
                    (true, Some(dest)) => dest.clone(),
                    _ => t.clone(),
                }
            };
            let report = spn_pushforward_delta(&s, &ns, &map)?;
            let identity_ok =
                (report.delta - report.recovered_mass - report.delta_spn).abs() <= 1e-12;
            let monotone_ok = report.delta_spn <= report.delta + 1e-15;
            let strict_ok = if report.recovered_mass > 0.0 {
                report.delta_spn < report.delta
            } else {
                (report.delta_spn - report.delta).abs() <= 1e-15
            };
            let mut pass = identity_ok && monotone_ok && strict_ok;
            if case == 0 {
                pass &= report.delta_spn == 0.0 && (report.recovered_mass - 0.3).abs() < 1e-12;
            }
            rows.push(VerificationRow {
                config_id: format!("pushforward-{case:04}"),
                delta: Some(report.delta),
                tv: None,
                bound: None,
                bayes_risk: None,
                delta_spn: Some(report.delta_spn),
                recovered_mass: Some(report.recovered_mass),
                pass,
            });
        }
    }

    let first_failure = rows.iter().find(|r| !r.pass).map(|r| r.config_id.clone());
    Ok(BatteryOutcome {
        all_passed: first_failure.is_none(),
        first_failure,
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

/// Write the battery rows as CSV.
pub fn write_battery_csv(outcome: &BatteryOutcome, path: &Path) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        file,
        "config_id,delta,tv,bound,bayes_risk,delta_spn,recovered_mass,pass"
    )?;
    for row in &outcome.rows {
        writeln!(
            file,
            "{},{},{},{},{},{},{},{}",
            row.config_id,
            opt(row.delta),
            opt(row.tv),
            opt(row.bound),
            opt(row.bayes_risk),
            opt(row.delta_spn),
            opt(row.recovered_mass),
            if row.pass { 1 } else { 0 },
        )?;
    }
    Ok(())
}
