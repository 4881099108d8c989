//! Gibbs sampling for the Naive Bayes latent-class model.
//!
//! Each iteration draws a class for every row from its posterior (the
//! stochastic E-step), then draws every parameter distribution from the
//! Dirichlet posterior formed by adding the imputed counts to the prior
//! (the stochastic M-step). Chains are kept after the burn-in and checked
//! with a Geweke window comparison; final classes are per-row chain medians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::em::{distinct_vectors, grouped_posteriors, random_init};
use crate::error::{Error, Result};
use crate::events::{Level, ObservationSet};
use crate::naive_bayes::{ParameterSet, SufficientStats};

/// Shortest chain the Geweke check accepts.
pub const MIN_CHAIN_LEN: usize = 20;

/// Dirichlet distribution `D(α_1, …, α_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alphas: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("Dirichlet with no components".into()));
        }
        if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet parameters must be positive: {alphas:?}"
            )));
        }
        Ok(Self { alphas })
    }

    /// The non-informative prior `D(1, …, 1)`.
    pub fn uniform(q: usize) -> Self {
        Self {
            alphas: vec![1.0; q],
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alphas.iter().sum();
        self.alphas.iter().map(|a| a / total).collect()
    }
}

/// Multinomial counts times a Dirichlet prior: the alphas add elementwise.
pub fn posterior_dirichlet(counts: &[f64], prior: &DirichletParams) -> Result<DirichletParams> {
    if counts.len() != prior.len() {
        return Err(Error::LengthMismatch {
            expected: prior.len(),
            actual: counts.len(),
        });
    }
    if counts.iter().any(|&c| c < 0.0) {
        return Err(Error::InvalidParameter("negative count".into()));
    }
    DirichletParams::new(
        counts
            .iter()
            .zip(&prior.alphas)
            .map(|(c, a)| c + a)
            .collect(),
    )
}

/// One draw from a Dirichlet by normalizing independent Gamma(α_i, 1) draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(dp: &DirichletParams, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = dp
        .alphas
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .expect("alphas are validated positive")
                .sample(rng)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|x| x / total).collect()
    } else {
        // every draw underflowed; fall back to the component with the most mass
        let best = crate::naive_bayes::argmax(&dp.alphas);
        (0..dp.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect()
    }
}

/// Prior for every distribution of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesPrior {
    pub class: DirichletParams,
    /// One prior per feature, shared by every class row of that feature.
    pub conditionals: Vec<DirichletParams>,
}

impl NaiveBayesPrior {
    pub fn uniform(k: usize, feature_cards: &[usize]) -> Self {
        Self {
            class: DirichletParams::uniform(k),
            conditionals: feature_cards
                .iter()
                .map(|&c| DirichletParams::uniform(c))
                .collect(),
        }
    }

    fn check(&self, k: usize, feature_cards: &[usize]) -> Result<()> {
        let shapes: Vec<usize> = self.conditionals.iter().map(DirichletParams::len).collect();
        if self.class.len() != k || shapes != feature_cards {
            return Err(Error::ShapeMismatch(format!(
                "prior shape ({}, {shapes:?}) does not match ({k}, {feature_cards:?})",
                self.class.len()
            )));
        }
        Ok(())
    }
}

/// The Dirichlet posteriors from which one stochastic M-step samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorScheme {
    pub class: DirichletParams,
    /// `conditionals[i][s]` is the posterior of `p(F_i | S = s)`.
    pub conditionals: Vec<Vec<DirichletParams>>,
}

/// Dirichlet posteriors for every distribution given imputed counts.
pub fn posterior_scheme(stats: &SufficientStats, prior: &NaiveBayesPrior) -> Result<PosteriorScheme> {
    let class = posterior_dirichlet(&stats.class, &prior.class)?;
    let conditionals = stats
        .joint
        .iter()
        .zip(&prior.conditionals)
        .map(|(feature, p)| {
            feature
                .iter()
                .map(|row| posterior_dirichlet(row, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorScheme {
        class,
        conditionals,
    })
}

fn sample_params<R: Rng + ?Sized>(scheme: &PosteriorScheme, rng: &mut R) -> Result<ParameterSet> {
    let prior = sample_dirichlet(&scheme.class, rng);
    let conditionals = scheme
        .conditionals
        .iter()
        .map(|f| f.iter().map(|d| sample_dirichlet(d, rng)).collect())
        .collect();
    ParameterSet::from_unnormalized(prior, conditionals)
}

/// Draws a class for every row from its posterior. Rows that share a
/// feature vector are drawn independently.
pub fn stochastic_e_step<R: Rng + ?Sized>(
    params: &ParameterSet,
    data: &ObservationSet,
    rng: &mut R,
) -> Result<Vec<usize>> {
    stochastic_e_step_vectors(params, &data.feature_vectors(), rng)
}

fn stochastic_e_step_vectors<R: Rng + ?Sized>(
    params: &ParameterSet,
    fvs: &[Vec<Level>],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let groups = distinct_vectors(fvs);
    let posteriors = grouped_posteriors(params, &groups)?;
    let mut row_post = vec![0usize; fvs.len()];
    for (g, (_, rows)) in groups.iter().enumerate() {
        for &r in rows {
            row_post[r] = g;
        }
    }
    Ok(row_post
        .into_iter()
        .map(|g| draw_categorical(&posteriors[g], rng))
        .collect())
}

fn draw_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Compares the means of the first and last `window_frac` of a chain.
///
/// `z = (m1 − m2) / sqrt(v1/n1 + v2/n2)` with sample variances; the chain
/// passes when `|z| ≤ z_max`. Two constant windows pass only if they agree.
pub fn geweke_converged(chain: &[f64], window_frac: f64, z_max: f64) -> Result<bool> {
    Ok(geweke_z(chain, window_frac)?.is_none_or(|z| z.abs() <= z_max))
}

/// The Geweke z-score, or `None` when both windows are constant and equal.
/// Constant windows with different values give an infinite score.
pub fn geweke_z(chain: &[f64], window_frac: f64) -> Result<Option<f64>> {
    if chain.len() < MIN_CHAIN_LEN {
        return Err(Error::ChainTooShort {
            len: chain.len(),
            min: MIN_CHAIN_LEN,
        });
    }
    if !(window_frac > 0.0 && window_frac < 0.5) {
        return Err(Error::InvalidParameter(format!("window fraction {window_frac}")));
    }
    let n = ((window_frac * chain.len() as f64).ceil() as usize).max(2);
    let (m1, v1) = mean_var(&chain[..n]);
    let (m2, v2) = mean_var(&chain[chain.len() - n..]);
    let se2 = v1 / n as f64 + v2 / n as f64;
    if se2 == 0.0 {
        return Ok(if m1 == m2 { None } else { Some(f64::INFINITY) });
    }
    Ok(Some((m1 - m2) / se2.sqrt()))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Lower median of a class chain: the element at `⌊(len − 1)/2⌋` once sorted.
pub fn class_chain_median(chain: &[usize]) -> Result<usize> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = chain.to_vec();
    sorted.sort_unstable();
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Arithmetic median of a real-valued chain.
pub fn chain_median(chain: &[f64]) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = chain.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub k: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub monitor: usize,
    pub increment: usize,
    /// Cap on total iterations, burn-in included.
    pub max_total: usize,
    pub geweke_window_frac: f64,
    pub geweke_z_max: f64,
    /// `None` means `D(1, …, 1)` everywhere.
    pub prior: Option<NaiveBayesPrior>,
}

impl GibbsConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            burn_in: 500,
            monitor: 1000,
            increment: 500,
            max_total: 5000,
            geweke_window_frac: 0.10,
            geweke_z_max: 2.0,
            prior: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.burn_in == 0 || self.monitor == 0 || self.increment == 0 {
            return Err(Error::InvalidParameter(
                "burn-in, monitor and increment must be positive".into(),
            ));
        }
        if self.monitor < MIN_CHAIN_LEN {
            return Err(Error::InvalidParameter(format!(
                "monitor window must be at least {MIN_CHAIN_LEN}"
            )));
        }
        if self.max_total < self.burn_in + self.monitor {
            return Err(Error::InvalidParameter(
                "max_total is smaller than burn-in plus monitor".into(),
            ));
        }
        if !(self.geweke_window_frac > 0.0 && self.geweke_window_frac < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "window fraction {}",
                self.geweke_window_frac
            )));
        }
        Ok(())
    }
}

/// Post-burn-in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    /// One chain per entry of the flattened parameter vector
    /// (prior, then conditionals; see [`ParameterSet::flatten`]).
    pub params: Vec<Vec<f64>>,
    /// One chain of sampled classes per row.
    pub classes: Vec<Vec<usize>>,
}

impl Chains {
    pub fn len(&self) -> usize {
        self.classes
            .first()
            .map_or_else(|| self.params.first().map_or(0, Vec::len), Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsResult {
    /// Per-row median of the class chain.
    pub assignments: Vec<usize>,
    /// Per-parameter chain medians, renormalized per distribution.
    pub params: ParameterSet,
    pub chains: Chains,
    pub converged: bool,
    /// Total iterations, burn-in included.
    pub iterations: usize,
}

/// Runs the sampler from a seeded random assignment.
pub fn run_gibbs(data: &ObservationSet, config: &GibbsConfig) -> Result<GibbsResult> {
    config.validate()?;
    let init = random_init(data.len(), config.k, config.seed);
    run_gibbs_from(data, config, &init)
}

/// Runs the sampler from an explicit initial assignment.
pub fn run_gibbs_from(
    data: &ObservationSet,
    config: &GibbsConfig,
    init: &[usize],
) -> Result<GibbsResult> {
    config.validate()?;
    let fvs = data.feature_vectors();
    let cards = data.schema().feature_cardinalities();
    let k = config.k;
    let prior = match &config.prior {
        Some(p) => {
            p.check(k, &cards)?;
            p.clone()
        }
        None => NaiveBayesPrior::uniform(k, &cards),
    };
    // separate stream from the one random_init uses
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let stats = SufficientStats::from_assignments(&fvs, init, k, &cards)?;
    let mut params = sample_params(&posterior_scheme(&stats, &prior)?, &mut rng)?;
    let mut iterations = 1;
    let n_params = params.flatten().len();
    let mut chains = Chains {
        params: vec![Vec::new(); n_params],
        classes: vec![Vec::new(); fvs.len()],
    };

    let step = |params: &mut ParameterSet, rng: &mut ChaCha8Rng| -> Result<Vec<usize>> {
        let classes = stochastic_e_step_vectors(params, &fvs, rng)?;
        let stats = SufficientStats::from_assignments(&fvs, &classes, k, &cards)?;
        *params = sample_params(&posterior_scheme(&stats, &prior)?, rng)?;
        Ok(classes)
    };

    while iterations < config.burn_in {
        step(&mut params, &mut rng)?;
        iterations += 1;
    }

    let mut target = config.monitor;
    let converged = loop {
        while chains.len() < target {
            let classes = step(&mut params, &mut rng)?;
            iterations += 1;
            for (chain, s) in chains.classes.iter_mut().zip(classes) {
                chain.push(s);
            }
            for (chain, p) in chains.params.iter_mut().zip(params.flatten()) {
                chain.push(p);
            }
        }
        if all_converged(&chains, config)? {
            break true;
        }
        if iterations + config.increment > config.max_total {
            break false;
        }
        target += config.increment;
    };

    let assignments = chains
        .classes
        .iter()
        .map(|c| class_chain_median(c))
        .collect::<Result<Vec<_>>>()?;
    let medians = chains
        .params
        .iter()
        .map(|c| chain_median(c))
        .collect::<Result<Vec<_>>>()?;
    let params = unflatten(&medians, k, &cards)?;

    Ok(GibbsResult {
        assignments,
        params,
        chains,
        converged,
        iterations,
    })
}

fn all_converged(chains: &Chains, config: &GibbsConfig) -> Result<bool> {
    for chain in &chains.params {
        if !geweke_converged(chain, config.geweke_window_frac, config.geweke_z_max)? {
            return Ok(false);
        }
    }
    let mut buf = Vec::new();
    for chain in &chains.classes {
        buf.clear();
        buf.extend(chain.iter().map(|&s| s as f64));
        if !geweke_converged(&buf, config.geweke_window_frac, config.geweke_z_max)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn unflatten(values: &[f64], k: usize, cards: &[usize]) -> Result<ParameterSet> {
    let prior = values[..k].to_vec();
    let mut offset = k;
    let conditionals = cards
        .iter()
        .map(|&c| {
            (0..k)
                .map(|_| {
                    let row = values[offset..offset + c].to_vec();
                    offset += c;
                    row
                })
                .collect()
        })
        .collect();
    ParameterSet::from_unnormalized(prior, conditionals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::FeatureSchema;
    use approx::assert_abs_diff_eq;

    fn d(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    #[test]
    fn conjugate_update_adds_counts() {
        assert_eq!(posterior_dirichlet(&[3.0, 1.0], &d(&[1.0, 1.0])).unwrap(), d(&[4.0, 2.0]));
        assert_eq!(
            posterior_dirichlet(&[4.0, 4.0, 2.0], &d(&[1.0, 1.0, 1.0])).unwrap(),
            d(&[5.0, 5.0, 3.0])
        );
        assert_eq!(posterior_dirichlet(&[0.0, 0.0], &d(&[1.0, 1.0])).unwrap(), d(&[1.0, 1.0]));
        assert!(matches!(
            posterior_dirichlet(&[1.0], &d(&[1.0, 1.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dirichlet_rejects_nonpositive_alphas() {
        assert!(DirichletParams::new(vec![1.0, 0.0]).is_err());
        assert!(DirichletParams::new(vec![]).is_err());
    }

    #[test]
    fn dirichlet_draws_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = sample_dirichlet(&d(&[0.5, 2.0, 3.0]), &mut rng);
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        let concentrated = sample_dirichlet(&d(&[1000.0, 1.0]), &mut rng);
        assert!(concentrated[0] >= 0.95);
    }

    #[test]
    fn one_hot_posterior_always_draws_that_class() {
        let p = ParameterSet::new(vec![0.0, 1.0], vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]]).unwrap();
        let schema = FeatureSchema::new(vec!["A".into()], vec![2], None).unwrap();
        let data = ObservationSet::from_levels(schema, vec![vec![0], vec![1], vec![0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            assert_eq!(stochastic_e_step(&p, &data, &mut rng).unwrap(), vec![1, 1, 1]);
        }
    }

    #[test]
    fn geweke_edge_cases() {
        assert!(geweke_converged(&[0.3; 50], 0.1, 2.0).unwrap());
        let mut step = vec![0.0; 500];
        step.extend(vec![1.0; 500]);
        assert!(!geweke_converged(&step, 0.1, 2.0).unwrap());
        assert!(matches!(
            geweke_converged(&[1.0; 5], 0.1, 2.0),
            Err(Error::ChainTooShort { len: 5, .. })
        ));
    }

    #[test]
    fn medians() {
        assert_eq!(class_chain_median(&[0, 0, 0, 1, 1, 1, 1, 1, 1, 2]).unwrap(), 1);
        assert_eq!(class_chain_median(&[2, 0, 1]).unwrap(), 1);
        assert_eq!(class_chain_median(&[4]).unwrap(), 4);
        assert_eq!(class_chain_median(&[0, 1]).unwrap(), 0);
        assert!(matches!(class_chain_median(&[]), Err(Error::Empty)));
        assert_eq!(chain_median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(chain_median(&[1.0, 2.0]).unwrap(), 1.5);
    }

    #[test]
    fn single_class_prior_is_exactly_one() {
        let schema = FeatureSchema::new(vec!["A".into()], vec![2], None).unwrap();
        let data = ObservationSet::from_levels(schema, vec![vec![0], vec![1], vec![1]]).unwrap();
        let mut config = GibbsConfig::new(1, 9);
        config.burn_in = 10;
        config.monitor = 40;
        config.max_total = 100;
        let r = run_gibbs(&data, &config).unwrap();
        assert!(r.chains.params[0].iter().all(|&p| p == 1.0));
        assert_eq!(r.params.prior(), &[1.0]);
        assert_eq!(r.assignments, vec![0, 0, 0]);
    }

    #[test]
    fn config_validation() {
        let schema = FeatureSchema::new(vec!["A".into()], vec![2], None).unwrap();
        let data = ObservationSet::from_levels(schema, vec![vec![0]]).unwrap();
        let mut config = GibbsConfig::new(2, 0);
        config.geweke_window_frac = 0.5;
        assert!(run_gibbs(&data, &config).is_err());
        let mut config = GibbsConfig::new(2, 0);
        config.max_total = 10;
        assert!(run_gibbs(&data, &config).is_err());
    }
}
