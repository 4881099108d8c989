//! Evaluation protocols: mapped accuracy for unsupervised groupings, the
//! majority baseline, confusion matrices, cross validation, repeated
//! trials and learning curves.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{agglomerate, dissimilarity_matrix, Linkage};
use crate::decomposable::{classify_joint, naive_mix, sequential_select, SelectConfig};
use crate::em::{run_em, EmConfig, Imputation};
use crate::error::{Error, Result};
use crate::events::{Level, ObservationSet};
use crate::gibbs::{run_gibbs, GibbsConfig};
use crate::naive_bayes::{ParameterSet, SufficientStats};

/// Largest `k` for which the exhaustive mapping search is run.
pub const MAX_MAPPING_K: usize = 8;

/// `mapping[group]` is the sense assigned to that group.
pub type Mapping = Vec<usize>;

fn check_labels(groups: &[usize], gold: &[usize], k: usize) -> Result<()> {
    if groups.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            actual: groups.len(),
        });
    }
    if let Some(&label) = groups.iter().chain(gold).find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, k });
    }
    Ok(())
}

fn agreement(groups: &[usize], gold: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; k]; k];
    for (&g, &s) in groups.iter().zip(gold) {
        table[g][s] += 1;
    }
    table
}

/// Fraction of rows whose mapped group equals the gold sense.
pub fn mapping_accuracy(groups: &[usize], gold: &[usize], mapping: &[usize]) -> Result<f64> {
    check_labels(groups, gold, mapping.len())?;
    if gold.is_empty() {
        return Err(Error::EmptyData);
    }
    let hits = groups
        .iter()
        .zip(gold)
        .filter(|(&g, &s)| mapping[g] == s)
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Highest accuracy over every bijection of groups onto senses. Ties go to
/// the lexicographically smallest mapping.
pub fn best_mapping_accuracy(groups: &[usize], gold: &[usize], k: usize) -> Result<(f64, Mapping)> {
    if k > MAX_MAPPING_K {
        return Err(Error::KTooLarge {
            k,
            max: MAX_MAPPING_K,
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    check_labels(groups, gold, k)?;
    if gold.is_empty() {
        return Err(Error::EmptyData);
    }
    let table = agreement(groups, gold, k);
    let mut best_hits = 0;
    let mut best: Option<Mapping> = None;
    for perm in (0..k).permutations(k) {
        let hits: usize = perm.iter().enumerate().map(|(g, &s)| table[g][s]).sum();
        if best.is_none() || hits > best_hits {
            best_hits = hits;
            best = Some(perm);
        }
    }
    Ok((
        best_hits as f64 / gold.len() as f64,
        best.expect("k ≥ 1 has a permutation"),
    ))
}

/// Share of the most frequent gold label.
pub fn majority_baseline(gold: &[usize]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyData);
    }
    let counts = gold.iter().counts();
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(max as f64 / gold.len() as f64)
}

fn majority_label(labels: &[usize]) -> usize {
    let counts = labels.iter().counts();
    // most frequent, lowest label on ties
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map(|(&l, _)| l)
        .unwrap_or(0)
}

/// Rows are gold senses, columns are mapped groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.cells.len()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.cells[i][i]).sum()
    }

    /// The actual distribution of senses.
    pub fn row_totals(&self) -> Vec<u64> {
        self.cells.iter().map(|r| r.iter().sum()).collect()
    }

    /// The discovered distribution of groups.
    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.k())
            .map(|j| self.cells.iter().map(|r| r[j]).sum())
            .collect()
    }
}

pub fn confusion(groups: &[usize], gold: &[usize], mapping: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if mapping.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: mapping.len(),
        });
    }
    check_labels(groups, gold, k)?;
    let mut cells = vec![vec![0u64; k]; k];
    for (&g, &s) in groups.iter().zip(gold) {
        cells[s][mapping[g]] += 1;
    }
    Ok(ConfusionMatrix { cells })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
    /// False when there was a single value and the standard deviation was
    /// set to 0.
    pub std_dev_defined: bool,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() == 1 {
            return Ok(Self {
                mean,
                std_dev: 0.0,
                count: 1,
                std_dev_defined: false,
            });
        }
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Ok(Self {
            mean,
            std_dev: (ss / (n - 1.0)).sqrt(),
            count: values.len(),
            std_dev_defined: true,
        })
    }
}

/// A learner trained on labeled rows.
pub trait SupervisedLearner {
    fn name(&self) -> &str;

    /// Trains on `train` and predicts a class for every row of `test`.
    fn fit_predict(&self, train: &ObservationSet, test: &ObservationSet) -> Result<Vec<Level>>;
}

/// A learner that partitions unlabeled rows into `k` groups.
pub trait Clusterer {
    fn name(&self) -> &str;

    fn cluster(&self, data: &ObservationSet, k: usize, seed: u64) -> Result<Vec<usize>>;
}

fn class_count(data: &ObservationSet) -> Result<usize> {
    data.schema().class_cardinality().ok_or(Error::NoClassVariable)
}

/// Predicts the most frequent training class for every row.
#[derive(Debug, Clone, Copy, Default)]
pub struct Majority;

impl SupervisedLearner for Majority {
    fn name(&self) -> &str {
        "MAJORITY"
    }

    fn fit_predict(&self, train: &ObservationSet, test: &ObservationSet) -> Result<Vec<Level>> {
        let s = majority_label(&train.labels()?);
        Ok(vec![s; test.len()])
    }
}

/// Naive Bayes with maximum likelihood (or add-`smoothing`) estimates.
/// Rows whose feature values were never seen with any class fall back to
/// the training majority class.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveBayes {
    pub smoothing: f64,
}

impl NaiveBayes {
    pub fn train(&self, train: &ObservationSet) -> Result<ParameterSet> {
        let k = class_count(train)?;
        let labels = train.labels()?;
        let stats = SufficientStats::from_assignments(
            &train.feature_vectors(),
            &labels,
            k,
            &train.schema().feature_cardinalities(),
        )?;
        stats.estimate(self.smoothing)
    }
}

impl SupervisedLearner for NaiveBayes {
    fn name(&self) -> &str {
        "NAIVE_BAYES"
    }

    fn fit_predict(&self, train: &ObservationSet, test: &ObservationSet) -> Result<Vec<Level>> {
        let params = self.train(train)?;
        let fallback = majority_label(&train.labels()?);
        test.feature_vectors()
            .iter()
            .map(|fv| match params.classify(fv) {
                Err(Error::ZeroEvidence { .. }) => Ok(fallback),
                other => other,
            })
            .collect()
    }
}

fn classify_with_fallback(
    joint: &crate::decomposable::JointTable,
    train: &ObservationSet,
    test: &ObservationSet,
) -> Result<Vec<Level>> {
    let class_var = train.schema().class_index().ok_or(Error::NoClassVariable)?;
    let fallback = majority_label(&train.labels()?);
    test.feature_vectors()
        .iter()
        .map(|fv| match classify_joint(joint, fv, class_var) {
            Err(Error::ZeroEvidence { .. }) => Ok(fallback),
            other => other,
        })
        .collect()
}

/// Classifies with the model chosen by a sequential search.
#[derive(Debug, Clone, Copy, Default)]
pub struct Select {
    pub config: SelectConfig,
}

impl SupervisedLearner for Select {
    fn name(&self) -> &str {
        "SELECT"
    }

    fn fit_predict(&self, train: &ObservationSet, test: &ObservationSet) -> Result<Vec<Level>> {
        let selection = sequential_select(train, &self.config)?;
        let fitted = crate::decomposable::fit(&selection.selected, train)?;
        classify_with_fallback(&fitted.joint, train, test)
    }
}

/// Classifies with the average of every model visited by a sequential
/// search.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveMix {
    pub config: SelectConfig,
}

impl SupervisedLearner for NaiveMix {
    fn name(&self) -> &str {
        "NAIVE_MIX"
    }

    fn fit_predict(&self, train: &ObservationSet, test: &ObservationSet) -> Result<Vec<Level>> {
        let selection = sequential_select(train, &self.config)?;
        let joint = naive_mix(&selection.sequence, train)?;
        classify_with_fallback(&joint, train, test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Em {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub imputation: Imputation,
}

impl Default for Em {
    fn default() -> Self {
        let c = EmConfig::new(1, 0);
        Self {
            epsilon: c.epsilon,
            max_iterations: c.max_iterations,
            imputation: c.imputation,
        }
    }
}

impl Clusterer for Em {
    fn name(&self) -> &str {
        "EM"
    }

    fn cluster(&self, data: &ObservationSet, k: usize, seed: u64) -> Result<Vec<usize>> {
        let config = EmConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            imputation: self.imputation,
            ..EmConfig::new(k, seed)
        };
        Ok(run_em(data, &config)?.assignments)
    }
}

/// Gibbs sampling with the schedule of `template`; `k` and `seed` are
/// replaced per call.
#[derive(Debug, Clone)]
pub struct Gibbs {
    pub template: GibbsConfig,
}

impl Default for Gibbs {
    fn default() -> Self {
        Self {
            template: GibbsConfig::new(1, 0),
        }
    }
}

impl Clusterer for Gibbs {
    fn name(&self) -> &str {
        "GIBBS"
    }

    fn cluster(&self, data: &ObservationSet, k: usize, seed: u64) -> Result<Vec<usize>> {
        let config = GibbsConfig {
            k,
            seed,
            ..self.template.clone()
        };
        Ok(run_gibbs(data, &config)?.assignments)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Agglomerative {
    pub linkage: Linkage,
}

impl Clusterer for Agglomerative {
    fn name(&self) -> &str {
        match self.linkage {
            Linkage::Ward => "WARD",
            Linkage::McQuitty => "MCQUITTY",
        }
    }

    fn cluster(&self, data: &ObservationSet, k: usize, seed: u64) -> Result<Vec<usize>> {
        Ok(agglomerate(&dissimilarity_matrix(data), self.linkage, k, seed)?.assignments)
    }
}

/// Splits a seeded shuffle of `0..n` into `folds` contiguous parts; the
/// first `n % folds` parts get one extra row.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut parts = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        parts.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(parts)
}

fn training_rows(parts: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    parts
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != held_out)
        .flat_map(|(_, p)| p.iter().copied())
        .collect()
}

fn accuracy(predicted: &[Level], gold: &[Level]) -> f64 {
    let hits = predicted.iter().zip(gold).filter(|(a, b)| a == b).count();
    hits as f64 / gold.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
}

fn run_fold(
    data: &ObservationSet,
    learner: &dyn SupervisedLearner,
    fold: usize,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<FoldResult> {
    let wrap = |e: Error| Error::LearnerFailure {
        fold,
        source: Box::new(e),
    };
    let train = data.subset(train_rows)?;
    let test = data.subset(test_rows)?;
    let predicted = learner.fit_predict(&train, &test).map_err(wrap)?;
    if predicted.len() != test.len() {
        return Err(wrap(Error::LengthMismatch {
            expected: test.len(),
            actual: predicted.len(),
        }));
    }
    Ok(FoldResult {
        fold,
        train_size: train.len(),
        test_size: test.len(),
        accuracy: accuracy(&predicted, &test.labels()?),
    })
}

/// `folds`-fold cross validation over a seeded shuffle of the rows.
pub fn k_fold_cv(
    data: &ObservationSet,
    folds: usize,
    learner: &dyn SupervisedLearner,
    seed: u64,
) -> Result<CvReport> {
    data.labels()?;
    let parts = fold_partition(data.len(), folds, seed)?;
    let results = (0..folds)
        .map(|f| run_fold(data, learner, f, &training_rows(&parts, f), &parts[f]))
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    Ok(CvReport {
        summary: Summary::of(&accs)?,
        folds: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub accuracy: f64,
    pub mapping: Mapping,
    pub assignments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

/// Runs a clusterer with seeds `base_seed..base_seed + trials` and scores
/// each grouping by its best mapping onto `gold`.
pub fn repeated_trials(
    data: &ObservationSet,
    gold: &[usize],
    k: usize,
    learner: &dyn Clusterer,
    trials: usize,
    base_seed: u64,
) -> Result<TrialsReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    if gold.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            actual: gold.len(),
        });
    }
    let results = (0..trials as u64)
        .map(|t| {
            let seed = base_seed.wrapping_add(t);
            let assignments = learner.cluster(data, k, seed)?;
            let (accuracy, mapping) = best_mapping_accuracy(&assignments, gold, k)?;
            Ok(TrialResult {
                seed,
                accuracy,
                mapping,
                assignments,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    Ok(TrialsReport {
        summary: Summary::of(&accs)?,
        trials: results,
    })
}

/// Training sizes 10, 50, 100 and then every further 100 up to `max`.
pub fn default_schedule(max: usize) -> Vec<usize> {
    [10, 50]
        .into_iter()
        .chain((1..).map(|i| i * 100))
        .take_while(|&m| m <= max)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
}

/// Accuracy as a function of training size. For every fold, the training
/// rows are the other folds in a seeded random order and a model of size
/// `m` is trained on the first `m` of them; the held-out fold is the test
/// set. Samples for different sizes are nested.
pub fn learning_curve(
    data: &ObservationSet,
    sizes: &[usize],
    learner: &dyn SupervisedLearner,
    folds: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    data.labels()?;
    let parts = fold_partition(data.len(), folds, seed)?;
    let available = data.len() - parts.iter().map(Vec::len).max().unwrap_or(0);
    if let Some(&size) = sizes.iter().find(|&&m| m > available || m == 0) {
        return Err(Error::SizeTooLarge { size, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pools: Vec<Vec<usize>> = (0..folds)
        .map(|f| {
            let mut rows = training_rows(&parts, f);
            rows.shuffle(&mut rng);
            rows
        })
        .collect();
    sizes
        .iter()
        .map(|&m| {
            let results = (0..folds)
                .map(|f| run_fold(data, learner, f, &pools[f][..m], &parts[f]))
                .collect::<Result<Vec<_>>>()?;
            let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
            Ok(CurvePoint {
                size: m,
                summary: Summary::of(&accs)?,
                folds: results,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_mapping_example() {
        // groups 1,1,1,2,2,2,2,3,3,3 and senses a,a,b,b,b,b,c,c,c,a
        let groups = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2];
        let gold = [0, 0, 1, 1, 1, 1, 2, 2, 2, 0];
        let (acc, mapping) = best_mapping_accuracy(&groups, &gold, 3).unwrap();
        assert_abs_diff_eq!(acc, 0.7);
        assert_eq!(mapping, vec![0, 1, 2]);
        let worst = (0..3)
            .permutations(3)
            .map(|p| mapping_accuracy(&groups, &gold, &p).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(worst <= 0.3 + 1e-12);
        assert!((0..3)
            .permutations(3)
            .any(|p| (mapping_accuracy(&groups, &gold, &p).unwrap() - 0.3).abs() < 1e-12));
    }

    #[test]
    fn shifted_labels_are_recovered() {
        let gold = [0, 1, 2, 0, 1, 2];
        let groups: Vec<usize> = gold.iter().map(|g| (g + 1) % 3).collect();
        let (acc, mapping) = best_mapping_accuracy(&groups, &gold, 3).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(mapping, vec![2, 0, 1]);
    }

    #[test]
    fn ties_take_the_smallest_permutation() {
        let (acc, mapping) = best_mapping_accuracy(&[0, 0], &[0, 1], 2).unwrap();
        assert_eq!(acc, 0.5);
        assert_eq!(mapping, vec![0, 1]);
    }

    #[test]
    fn mapping_errors() {
        assert!(matches!(
            best_mapping_accuracy(&[0], &[0], 9),
            Err(Error::KTooLarge { k: 9, max: 8 })
        ));
        assert!(matches!(
            best_mapping_accuracy(&[0, 3], &[0, 1], 2),
            Err(Error::LabelOutOfRange { label: 3, k: 2 })
        ));
        assert!(best_mapping_accuracy(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn majority_shares() {
        let mut gold = vec![0; 68];
        gold.extend(vec![1; 22]);
        gold.extend(vec![2; 10]);
        assert_abs_diff_eq!(majority_baseline(&gold).unwrap(), 0.68);
        assert_abs_diff_eq!(majority_baseline(&[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(majority_baseline(&[]).is_err());
    }

    #[test]
    fn confusion_totals() {
        let groups = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2];
        let gold = [0, 0, 1, 1, 1, 1, 2, 2, 2, 0];
        let m = confusion(&groups, &gold, &[0, 1, 2], 3).unwrap();
        assert_eq!(m.total(), 10);
        assert_eq!(m.trace(), 7);
        assert_eq!(m.row_totals(), vec![3, 4, 3]);
        assert_eq!(m.column_totals(), vec![3, 4, 3]);
        let perfect = confusion(&gold, &gold, &[0, 1, 2], 3).unwrap();
        assert_eq!(perfect.trace(), 10);
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.std_dev, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let one = Summary::of(&[0.7]).unwrap();
        assert_eq!(one.std_dev, 0.0);
        assert!(!one.std_dev_defined);
    }

    #[test]
    fn partition_sizes() {
        let parts = fold_partition(23, 10, 4).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        let mut all: Vec<usize> = parts.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(fold_partition(5, 10, 0).is_err());
    }

    #[test]
    fn schedule() {
        assert_eq!(default_schedule(350), vec![10, 50, 100, 200, 300]);
        assert_eq!(default_schedule(9), Vec::<usize>::new());
    }
}
