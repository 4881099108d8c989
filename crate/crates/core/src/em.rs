//! EM over a latent class with the Naive Bayes parametric form.
//!
//! The default E-step imputes the most probable class for every row
//! (classification EM); the soft E-step spreads each row over the classes in
//! proportion to the posterior.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Level, ObservationSet};
use crate::naive_bayes::{ParameterSet, SufficientStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Imputation {
    #[default]
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub imputation: Imputation,
    /// Add-α pseudo-counts in the M-step; 0 gives plain maximum likelihood.
    pub smoothing: f64,
}

impl EmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            epsilon: 1e-3,
            max_iterations: 500,
            seed,
            imputation: Imputation::Hard,
            smoothing: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResult {
    pub params: ParameterSet,
    /// Imputed class per row. In soft mode, the most probable class under
    /// the final parameters.
    pub assignments: Vec<usize>,
    /// Number of M-steps performed, counting the one after initialization.
    pub iterations: usize,
    pub converged: bool,
    /// Parameter distance after each iteration from the second on.
    pub trajectory: Vec<f64>,
    /// Complete-data log-likelihood of the imputed sample after each M-step
    /// (hard mode only).
    pub log_likelihoods: Vec<f64>,
    /// Classes that ended with no support.
    pub empty_classes: Vec<usize>,
}

/// Uniform random class for each of `n` rows; deterministic in `seed`.
pub fn random_init(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| if k <= 1 { 0 } else { rng.random_range(0..k) })
        .collect()
}

/// Output of one E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    /// Imputed classes (hard mode only).
    pub assignments: Option<Vec<usize>>,
    pub counts: SufficientStats,
}

/// Rows grouped by identical feature vector, in first-appearance order.
pub(crate) fn distinct_vectors(fvs: &[Vec<Level>]) -> Vec<(Vec<Level>, Vec<usize>)> {
    let mut index: HashMap<&[Level], usize> = HashMap::new();
    let mut groups: Vec<(Vec<Level>, Vec<usize>)> = Vec::new();
    for (r, fv) in fvs.iter().enumerate() {
        match index.get(fv.as_slice()) {
            Some(&g) => groups[g].1.push(r),
            None => {
                index.insert(fv, groups.len());
                groups.push((fv.clone(), vec![r]));
            }
        }
    }
    groups
}

/// Computes each distinct vector's posterior once and reports every row
/// whose vector has zero evidence.
pub(crate) fn grouped_posteriors(
    params: &ParameterSet,
    groups: &[(Vec<Level>, Vec<usize>)],
) -> Result<Vec<Vec<f64>>> {
    let mut bad = Vec::new();
    let mut out = Vec::with_capacity(groups.len());
    for (fv, rows) in groups {
        match params.posterior(fv) {
            Ok(p) => out.push(p),
            Err(Error::ZeroEvidence { .. }) => {
                bad.extend_from_slice(rows);
                out.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        bad.sort_unstable();
        Err(Error::ZeroEvidence { rows: bad })
    }
}

/// One E-step over the feature vectors of `data`.
pub fn e_step(params: &ParameterSet, data: &ObservationSet, mode: Imputation) -> Result<EStep> {
    let fvs = data.feature_vectors();
    e_step_vectors(params, &fvs, mode)
}

fn e_step_vectors(params: &ParameterSet, fvs: &[Vec<Level>], mode: Imputation) -> Result<EStep> {
    let groups = distinct_vectors(fvs);
    let posteriors = grouped_posteriors(params, &groups)?;
    let k = params.num_classes();
    let mut counts = SufficientStats::zeros(k, &params.feature_cards());
    match mode {
        Imputation::Hard => {
            let mut assignments = vec![0; fvs.len()];
            for ((fv, rows), post) in groups.iter().zip(&posteriors) {
                let s = crate::naive_bayes::argmax(post);
                for &r in rows {
                    assignments[r] = s;
                }
                counts.add(fv, s, rows.len() as f64);
            }
            Ok(EStep {
                assignments: Some(assignments),
                counts,
            })
        }
        Imputation::Soft => {
            for ((fv, rows), post) in groups.iter().zip(&posteriors) {
                for (s, &p) in post.iter().enumerate() {
                    if p > 0.0 {
                        counts.add(fv, s, p * rows.len() as f64);
                    }
                }
            }
            Ok(EStep {
                assignments: None,
                counts,
            })
        }
    }
}

/// Largest absolute componentwise difference between two parameter vectors.
pub fn param_distance(old: &ParameterSet, new: &ParameterSet) -> Result<f64> {
    if old.num_classes() != new.num_classes() || old.feature_cards() != new.feature_cards() {
        return Err(Error::ShapeMismatch(
            "parameter sets have different shapes".into(),
        ));
    }
    Ok(old
        .flatten()
        .iter()
        .zip(new.flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Complete-data log-likelihood `Σ log p(f, s)` of an imputed sample.
pub fn complete_log_likelihood(
    params: &ParameterSet,
    fvs: &[Vec<Level>],
    classes: &[usize],
) -> Result<f64> {
    fvs.iter()
        .zip(classes)
        .map(|(fv, &s)| params.joint_prob(fv, s).map(f64::ln))
        .sum()
}

/// Runs EM from a seeded random assignment.
pub fn run_em(data: &ObservationSet, config: &EmConfig) -> Result<EmResult> {
    config.validate()?;
    let init = random_init(data.len(), config.k, config.seed);
    run_em_from(data, config, &init)
}

/// Runs EM from an explicit initial assignment.
pub fn run_em_from(data: &ObservationSet, config: &EmConfig, init: &[usize]) -> Result<EmResult> {
    config.validate()?;
    let fvs = data.feature_vectors();
    let cards = data.schema().feature_cardinalities();
    let k = config.k;

    let mut stats = SufficientStats::from_assignments(&fvs, init, k, &cards)?;
    let mut params = stats.estimate(config.smoothing)?;
    let mut assignments = init.to_vec();
    let mut log_likelihoods = Vec::new();
    if config.imputation == Imputation::Hard {
        log_likelihoods.push(complete_log_likelihood(&params, &fvs, &assignments)?);
    }
    let mut trajectory = Vec::new();
    let mut iterations = 1;
    let mut converged = false;

    while iterations < config.max_iterations {
        let step = e_step_vectors(&params, &fvs, config.imputation)?;
        stats = step.counts;
        let next = stats.estimate(config.smoothing)?;
        iterations += 1;
        if let Some(a) = step.assignments {
            assignments = a;
            log_likelihoods.push(complete_log_likelihood(&next, &fvs, &assignments)?);
        }
        let distance = param_distance(&params, &next)?;
        trajectory.push(distance);
        params = next;
        if distance < config.epsilon {
            converged = true;
            break;
        }
    }

    if config.imputation == Imputation::Soft {
        let groups = distinct_vectors(&fvs);
        let posteriors = grouped_posteriors(&params, &groups)?;
        for ((_, rows), post) in groups.iter().zip(&posteriors) {
            let s = crate::naive_bayes::argmax(post);
            for &r in rows {
                assignments[r] = s;
            }
        }
    }

    let empty_classes = params.empty_classes();
    Ok(EmResult {
        params,
        assignments,
        iterations,
        converged,
        trajectory,
        log_likelihoods,
        empty_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::FeatureSchema;
    use approx::assert_abs_diff_eq;

    fn toy() -> ObservationSet {
        let schema = FeatureSchema::new(vec!["F1".into(), "F2".into()], vec![2, 2], None).unwrap();
        let rows = [(0, 1), (0, 1), (1, 1), (1, 1), (0, 1), (0, 0), (0, 0), (0, 0), (0, 1), (1, 1)]
            .iter()
            .map(|&(a, b)| vec![a, b])
            .collect();
        ObservationSet::from_levels(schema, rows).unwrap()
    }

    const INIT: [usize; 10] = [0, 2, 1, 1, 0, 2, 0, 1, 1, 0];

    #[test]
    fn random_init_is_seeded() {
        let a = random_init(10, 3, 7);
        assert_eq!(a, random_init(10, 3, 7));
        assert!(a.iter().all(|&s| s < 3));
        assert_eq!(random_init(4, 1, 9), vec![0; 4]);
    }

    #[test]
    fn hard_e_step_reproduces_worked_assignment() {
        let data = toy();
        let fvs = data.feature_vectors();
        let p1 = SufficientStats::from_assignments(&fvs, &INIT, 3, &[2, 2])
            .unwrap()
            .estimate(0.0)
            .unwrap();
        let step = e_step(&p1, &data, Imputation::Hard).unwrap();
        let a = step.assignments.unwrap();
        assert_eq!(a, vec![0, 0, 1, 1, 0, 2, 2, 2, 0, 1]);
        assert_eq!(step.counts.joint[0][0][0], 4.0);
        assert_eq!(step.counts.joint[0][1][1], 3.0);
        assert_eq!(step.counts.joint[1][2][0], 3.0);

        let p2 = step.counts.estimate(0.0).unwrap();
        let again = e_step(&p2, &data, Imputation::Hard).unwrap();
        assert_eq!(again.assignments.unwrap(), a);
    }

    #[test]
    fn soft_e_step_with_uniform_params_splits_evenly() {
        let data = toy();
        let step = e_step(&ParameterSet::uniform(2, &[2, 2]), &data, Imputation::Soft).unwrap();
        assert!(step.assignments.is_none());
        // seven rows have F1 = 1 (level 0)
        assert_abs_diff_eq!(step.counts.joint[0][0][0], 3.5);
        assert_abs_diff_eq!(step.counts.joint[0][1][1], 1.5);
        assert_abs_diff_eq!(step.counts.class[1], 5.0);
    }

    #[test]
    fn distance_of_reference_vectors() {
        let old = ParameterSet::new(
            vec![0.4, 0.4, 0.2],
            vec![
                vec![vec![0.75, 0.25], vec![0.5, 0.5], vec![1.0, 0.0]],
                vec![vec![0.25, 0.75], vec![0.25, 0.75], vec![0.5, 0.5]],
            ],
        )
        .unwrap();
        let new = ParameterSet::new(
            vec![0.4, 0.3, 0.3],
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(param_distance(&old, &new).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(param_distance(&old, &old).unwrap(), 0.0);
        assert_eq!(
            param_distance(&old, &new).unwrap(),
            param_distance(&new, &old).unwrap()
        );
        let other = ParameterSet::uniform(2, &[2, 2]);
        assert!(matches!(
            param_distance(&old, &other),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn worked_example_converges_on_third_iteration() {
        let data = toy();
        let mut config = EmConfig::new(3, 0);
        config.epsilon = 0.01;
        let result = run_em_from(&data, &config, &INIT).unwrap();
        assert!(result.converged);
        assert_eq!(result.iterations, 3);
        assert_eq!(result.assignments, vec![0, 0, 1, 1, 0, 2, 2, 2, 0, 1]);
        assert_abs_diff_eq!(result.trajectory[0], 0.5, epsilon = 1e-12);
        assert_eq!(result.trajectory[1], 0.0);
    }

    #[test]
    fn single_class_converges_immediately() {
        let data = toy();
        let result = run_em(&data, &EmConfig::new(1, 3)).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2);
        assert_eq!(result.params.prior(), &[1.0]);
        assert!(result.assignments.iter().all(|&s| s == 0));
    }

    #[test]
    fn likelihood_does_not_drop_on_small_instance() {
        let schema = FeatureSchema::new(vec!["A".into(), "B".into()], vec![2, 2], None).unwrap();
        let data =
            ObservationSet::from_levels(schema, vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 0]])
                .unwrap();
        for seed in 0..20 {
            let r = run_em(&data, &EmConfig::new(2, seed)).unwrap();
            let first = r.log_likelihoods[0];
            let last = *r.log_likelihoods.last().unwrap();
            assert!(last >= first - 1e-9, "seed {seed}: {first} -> {last}");
        }
    }

    #[test]
    fn soft_mode_runs_to_convergence() {
        let data = toy();
        let mut config = EmConfig::new(3, 5);
        config.imputation = Imputation::Soft;
        config.max_iterations = 2000;
        let r = run_em(&data, &config).unwrap();
        assert!(r.converged);
        assert!(r.log_likelihoods.is_empty());
        assert_eq!(r.assignments.len(), 10);
        let total: f64 = r.params.prior().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let data = toy();
        let mut config = EmConfig::new(2, 0);
        config.epsilon = 0.0;
        assert!(run_em(&data, &config).is_err());
    }
}
