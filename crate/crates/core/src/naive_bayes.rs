//! The Naive Bayes parametric form: features conditionally independent
//! given the class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Level, MarginalCounts};

const SUM_TOLERANCE: f64 = 1e-9;

/// Class prior `p(S)` and per-feature conditionals `p(F_i | S)`.
///
/// `conditionals[i][s][f]` is `p(F_i = f | S = s)`. A class with no support
/// in the data it was estimated from has all-zero conditional rows and is
/// flagged in `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    prior: Vec<f64>,
    conditionals: Vec<Vec<Vec<f64>>>,
    degenerate: Vec<bool>,
}

impl ParameterSet {
    /// Validates shapes and normalization. A class whose conditional rows are
    /// all zero is accepted and marked degenerate.
    pub fn new(prior: Vec<f64>, conditionals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = prior.len();
        check_distribution(&prior, "class prior")?;
        let mut degenerate = vec![false; k];
        for (i, feature) in conditionals.iter().enumerate() {
            if feature.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "feature {i} has {} class rows, expected {k}",
                    feature.len()
                )));
            }
            let width = feature.first().map_or(0, Vec::len);
            for (s, row) in feature.iter().enumerate() {
                if row.len() != width || width == 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "feature {i}, class {s}: ragged conditional row"
                    )));
                }
                if row.iter().all(|&p| p == 0.0) {
                    degenerate[s] = true;
                } else {
                    check_distribution(row, &format!("p(F{i} | S={s})"))?;
                }
            }
        }
        for (s, &d) in degenerate.iter().enumerate() {
            let all_zero = conditionals
                .iter()
                .all(|f| f[s].iter().all(|&p| p == 0.0));
            if d && !all_zero {
                return Err(Error::InvalidParameter(format!(
                    "class {s} is degenerate for some features but not others"
                )));
            }
        }
        Ok(Self {
            prior,
            conditionals,
            degenerate,
        })
    }

    /// Rescales every distribution to sum to one. Useful for tables rounded
    /// for display, and for summaries assembled from sampled medians.
    pub fn from_unnormalized(prior: Vec<f64>, conditionals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let prior = normalize(prior);
        let conditionals = conditionals
            .into_iter()
            .map(|f| f.into_iter().map(normalize).collect())
            .collect();
        Self::new(prior, conditionals)
    }

    /// Uniform prior and conditionals.
    pub fn uniform(k: usize, feature_cards: &[usize]) -> Self {
        let prior = vec![1.0 / k as f64; k];
        let conditionals = feature_cards
            .iter()
            .map(|&c| vec![vec![1.0 / c as f64; c]; k])
            .collect();
        Self {
            prior,
            conditionals,
            degenerate: vec![false; k],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.prior.len()
    }

    pub fn num_features(&self) -> usize {
        self.conditionals.len()
    }

    pub fn feature_cards(&self) -> Vec<usize> {
        self.conditionals.iter().map(|f| f[0].len()).collect()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn conditionals(&self) -> &[Vec<Vec<f64>>] {
        &self.conditionals
    }

    /// `p(F_feature = level | S = class)`.
    pub fn conditional(&self, feature: usize, class: usize, level: Level) -> f64 {
        self.conditionals[feature][class][level]
    }

    pub fn is_degenerate(&self, class: usize) -> bool {
        self.degenerate[class]
    }

    /// Classes with zero prior mass.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|&s| self.prior[s] == 0.0)
            .collect()
    }

    /// The parameter vector: the prior, then each feature's conditional
    /// rows class by class.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.prior.clone();
        for feature in &self.conditionals {
            for row in feature {
                out.extend_from_slice(row);
            }
        }
        out
    }

    fn check_fv(&self, fv: &[Level]) -> Result<()> {
        if fv.len() != self.num_features() {
            return Err(Error::LengthMismatch {
                expected: self.num_features(),
                actual: fv.len(),
            });
        }
        for (i, (&f, feature)) in fv.iter().zip(&self.conditionals).enumerate() {
            if f >= feature[0].len() {
                return Err(Error::LevelOutOfRange {
                    row: 0,
                    var: i,
                    level: f,
                    cardinality: feature[0].len(),
                });
            }
        }
        Ok(())
    }

    fn joint_unchecked(&self, fv: &[Level], s: usize) -> f64 {
        fv.iter()
            .zip(&self.conditionals)
            .fold(self.prior[s], |acc, (&f, feature)| acc * feature[s][f])
    }

    /// `p(S = s) · ∏ p(F_i = f_i | S = s)`.
    pub fn joint_prob(&self, fv: &[Level], s: usize) -> Result<f64> {
        self.check_fv(fv)?;
        if s >= self.num_classes() {
            return Err(Error::LabelOutOfRange {
                label: s,
                k: self.num_classes(),
            });
        }
        Ok(self.joint_unchecked(fv, s))
    }

    /// As [`joint_prob`](Self::joint_prob), but a zero-support class is an error.
    pub fn joint_prob_strict(&self, fv: &[Level], s: usize) -> Result<f64> {
        if s < self.num_classes() && self.degenerate[s] {
            return Err(Error::DegenerateClass { class: s });
        }
        self.joint_prob(fv, s)
    }

    /// `p(F_1 = f_1, …, F_n = f_n)`, summed over classes.
    pub fn evidence(&self, fv: &[Level]) -> Result<f64> {
        self.check_fv(fv)?;
        Ok((0..self.num_classes())
            .map(|s| self.joint_unchecked(fv, s))
            .sum())
    }

    /// `p(S | f_1, …, f_n)`.
    pub fn posterior(&self, fv: &[Level]) -> Result<Vec<f64>> {
        self.check_fv(fv)?;
        let joint: Vec<f64> = (0..self.num_classes())
            .map(|s| self.joint_unchecked(fv, s))
            .collect();
        let total: f64 = joint.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroEvidence { rows: Vec::new() });
        }
        Ok(joint.into_iter().map(|p| p / total).collect())
    }

    /// Most probable class; ties go to the lowest class index.
    pub fn classify(&self, fv: &[Level]) -> Result<usize> {
        let post = self.posterior(fv)?;
        Ok(argmax(&post))
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.into_iter().map(|x| x / total).collect()
    } else {
        v
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::ShapeMismatch(format!("{what} is empty")));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidParameter(format!("{what} has an entry outside [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Possibly fractional sufficient statistics of Naive Bayes:
/// `freq(S)` and `freq(F_i, S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// `class[s]` = freq(S = s).
    pub class: Vec<f64>,
    /// `joint[i][s][f]` = freq(F_i = f, S = s).
    pub joint: Vec<Vec<Vec<f64>>>,
}

impl SufficientStats {
    pub fn zeros(k: usize, feature_cards: &[usize]) -> Self {
        Self {
            class: vec![0.0; k],
            joint: feature_cards.iter().map(|&c| vec![vec![0.0; c]; k]).collect(),
        }
    }

    /// Counts of a hard class assignment.
    pub fn from_assignments(
        fvs: &[Vec<Level>],
        classes: &[usize],
        k: usize,
        feature_cards: &[usize],
    ) -> Result<Self> {
        if fvs.len() != classes.len() {
            return Err(Error::LengthMismatch {
                expected: fvs.len(),
                actual: classes.len(),
            });
        }
        let mut stats = Self::zeros(k, feature_cards);
        for (fv, &s) in fvs.iter().zip(classes) {
            if s >= k {
                return Err(Error::LabelOutOfRange { label: s, k });
            }
            stats.add(fv, s, 1.0);
        }
        Ok(stats)
    }

    pub(crate) fn add(&mut self, fv: &[Level], s: usize, weight: f64) {
        self.class[s] += weight;
        for (feature, &f) in self.joint.iter_mut().zip(fv) {
            feature[s][f] += weight;
        }
    }

    pub fn total(&self) -> f64 {
        self.class.iter().sum()
    }

    /// Maximum likelihood estimates with optional add-`smoothing` counts.
    /// Without smoothing a class with no support gets prior 0 and
    /// all-zero (degenerate) conditional rows.
    pub fn estimate(&self, smoothing: f64) -> Result<ParameterSet> {
        if smoothing < 0.0 || !smoothing.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothing {smoothing}")));
        }
        let k = self.class.len();
        let n = self.total();
        let denom = n + smoothing * k as f64;
        if denom <= 0.0 {
            return Err(Error::EmptyData);
        }
        let prior = self.class.iter().map(|&c| (c + smoothing) / denom).collect();
        let mut degenerate = vec![false; k];
        let conditionals = self
            .joint
            .iter()
            .map(|feature| {
                feature
                    .iter()
                    .enumerate()
                    .map(|(s, row)| {
                        let support: f64 = row.iter().sum::<f64>() + smoothing * row.len() as f64;
                        if support > 0.0 {
                            row.iter().map(|&c| (c + smoothing) / support).collect()
                        } else {
                            degenerate[s] = true;
                            vec![0.0; row.len()]
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ParameterSet {
            prior,
            conditionals,
            degenerate,
        })
    }
}

/// Maximum likelihood estimates `p̂(S) = freq(S)/N` and
/// `p̂(F_i|S) = freq(F_i,S)/freq(S)` from marginal count tables.
///
/// `class_counts` is a one-variable table over the class; each entry of
/// `joint_counts` is a two-variable table over one feature and the class,
/// in either variable order. The feature order of the result follows
/// `joint_counts`.
pub fn mle_from_counts(
    class_counts: &MarginalCounts,
    joint_counts: &[MarginalCounts],
    n: u64,
) -> Result<ParameterSet> {
    mle_from_counts_smoothed(class_counts, joint_counts, n, 0.0)
}

/// [`mle_from_counts`] with add-`smoothing` pseudo-counts.
pub fn mle_from_counts_smoothed(
    class_counts: &MarginalCounts,
    joint_counts: &[MarginalCounts],
    n: u64,
    smoothing: f64,
) -> Result<ParameterSet> {
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if class_counts.vars().len() != 1 {
        return Err(Error::ShapeMismatch("class counts must cover one variable".into()));
    }
    if class_counts.total() != n {
        return Err(Error::InconsistentCounts(format!(
            "class counts total {} but N = {n}",
            class_counts.total()
        )));
    }
    let class_var = class_counts.vars()[0];
    let k = class_counts.cards()[0];
    let mut stats = SufficientStats {
        class: class_counts.cells().iter().map(|&c| c as f64).collect(),
        joint: Vec::with_capacity(joint_counts.len()),
    };
    for (i, table) in joint_counts.iter().enumerate() {
        if table.vars().len() != 2 || table.position(class_var).is_none() {
            return Err(Error::ShapeMismatch(format!(
                "table {i} must cover one feature and the class"
            )));
        }
        let margin = table.project(&[class_var])?;
        if margin.cells() != class_counts.cells() {
            return Err(Error::InconsistentCounts(format!(
                "table {i} has class margin {:?}, expected {:?}",
                margin.cells(),
                class_counts.cells()
            )));
        }
        let feature_var = table.vars()[1 - table.position(class_var).unwrap()];
        let ordered = table.project(&[class_var, feature_var])?;
        let card = ordered.cards()[1];
        stats.joint.push(
            (0..k)
                .map(|s| (0..card).map(|f| ordered.get(&[s, f]) as f64).collect())
                .collect(),
        );
    }
    stats.estimate(smoothing)
}
