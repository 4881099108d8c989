use serde::{Deserialize, Serialize};

use super::DecomposableModel;
use crate::error::{Error, Result};
use crate::events::{advance, flat_index, marginal_counts, Level, MarginalCounts, ObservationSet};

/// Largest dense event space a fit will materialize.
pub const MAX_EVENT_CELLS: usize = 1 << 24;

/// Probability per full event, row-major over all schema variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let size: usize = cards.iter().product();
        if probs.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                actual: probs.len(),
            });
        }
        Ok(Self { cards, probs })
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, levels: &[Level]) -> f64 {
        self.probs[flat_index(&self.cards, levels)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// How degrees of freedom are counted during model search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DofMode {
    /// Main effects plus one interaction block per edge; every single-edge
    /// step between binary variables changes this by exactly 1.
    #[default]
    Pairwise,
    /// Free parameters of the model's marginals.
    Raw,
    /// Free parameters with zero marginal estimates removed.
    Adjusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: DecomposableModel,
    pub joint: JointTable,
    pub g_squared: f64,
    pub adjusted_dof: i64,
    pub raw_dof: i64,
}

impl FitResult {
    pub fn dof(&self, mode: DofMode) -> i64 {
        match mode {
            DofMode::Pairwise => pairwise_dof(&self.model, self.joint.cards()),
            DofMode::Raw => self.raw_dof,
            DofMode::Adjusted => self.adjusted_dof,
        }
    }
}

pub(crate) struct Marginals {
    pub cliques: Vec<MarginalCounts>,
    pub separators: Vec<MarginalCounts>,
    pub n: f64,
}

impl Marginals {
    pub fn count(model: &DecomposableModel, data: &ObservationSet) -> Result<Self> {
        let cliques = model
            .cliques()
            .iter()
            .map(|c| marginal_counts(data, c))
            .collect::<Result<_>>()?;
        let separators = model
            .separators()
            .iter()
            .map(|s| marginal_counts(data, s))
            .collect::<Result<_>>()?;
        Ok(Self {
            cliques,
            separators,
            n: data.len() as f64,
        })
    }

    /// Clique-product estimate of one full event; `0/0` is taken as 0.
    /// Variables in `uniform` enter as `1/cardinality` instead of through a
    /// marginal.
    pub fn estimate(&self, levels: &[Level], uniform: &[(usize, usize)]) -> f64 {
        let mut p = 1.0;
        let mut sub = Vec::new();
        for table in &self.cliques {
            if let [v] = table.vars() {
                if let Some(&(_, card)) = uniform.iter().find(|(u, _)| u == v) {
                    p /= card as f64;
                    continue;
                }
            }
            sub.clear();
            sub.extend(table.vars().iter().map(|&v| levels[v]));
            p *= table.get(&sub) as f64 / self.n;
            if p == 0.0 {
                return 0.0;
            }
        }
        for table in &self.separators {
            sub.clear();
            sub.extend(table.vars().iter().map(|&v| levels[v]));
            let q = table.get(&sub) as f64 / self.n;
            if q == 0.0 {
                return 0.0;
            }
            p /= q;
        }
        p
    }
}

pub(crate) fn dense_joint(
    model: &DecomposableModel,
    data: &ObservationSet,
    uniform: &[(usize, usize)],
) -> Result<JointTable> {
    let cards = data.schema().cardinalities().to_vec();
    if model.num_vars() != cards.len() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} variables, data has {}",
            model.num_vars(),
            cards.len()
        )));
    }
    let cells = cards
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .filter(|&c| c <= MAX_EVENT_CELLS)
        .ok_or(Error::EventSpaceTooLarge {
            cells: cards.iter().fold(1usize, |a, &c| a.saturating_mul(c)),
            limit: MAX_EVENT_CELLS,
        })?;
    let marginals = Marginals::count(model, data)?;
    let mut levels = vec![0; cards.len()];
    let mut probs = Vec::with_capacity(cells);
    for _ in 0..cells {
        probs.push(marginals.estimate(&levels, uniform));
        advance(&mut levels, &cards);
    }
    JointTable::new(cards, probs)
}

/// Maximum likelihood fit of a decomposable model, with its deviance and
/// degrees of freedom.
pub fn fit(model: &DecomposableModel, data: &ObservationSet) -> Result<FitResult> {
    let joint = dense_joint(model, data, &[])?;
    let all: Vec<usize> = (0..data.schema().num_vars()).collect();
    let observed = marginal_counts(data, &all)?;
    let g_squared = g_squared(&observed, &joint, data.len() as u64)?;
    Ok(FitResult {
        model: model.clone(),
        g_squared,
        adjusted_dof: adjusted_dof(model, data)?,
        raw_dof: raw_dof(model, data.schema().cardinalities()),
        joint,
    })
}

/// Likelihood ratio statistic `G² = 2 Σ f_i ln(f_i / e_i)` with `e_i = N·p_i`.
/// Cells with `f_i = 0` contribute nothing.
pub fn g_squared(observed: &MarginalCounts, fitted: &JointTable, n: u64) -> Result<f64> {
    if observed.cells().len() != fitted.probs().len() {
        return Err(Error::LengthMismatch {
            expected: fitted.probs().len(),
            actual: observed.cells().len(),
        });
    }
    let n = n as f64;
    let mut total = 0.0;
    for (&f, &p) in observed.cells().iter().zip(fitted.probs()) {
        if f == 0 {
            continue;
        }
        let e = n * p;
        if e <= 0.0 {
            return Err(Error::ZeroExpectedNonzeroObserved { observed: f });
        }
        let f = f as f64;
        total += f * (f / e).ln();
    }
    Ok(2.0 * total)
}

/// Free parameters of the model's marginal tables:
/// `Σ_cliques (cells − 1) − Σ_separators (cells − 1)`.
pub fn raw_dof(model: &DecomposableModel, cards: &[usize]) -> i64 {
    let size = |vars: &[usize]| vars.iter().map(|&v| cards[v]).product::<usize>() as i64 - 1;
    model.cliques().iter().map(|c| size(c)).sum::<i64>()
        - model.separators().iter().map(|s| size(s)).sum::<i64>()
}

/// `Σ_v (c_v − 1) + Σ_{edges uv} (c_u − 1)(c_v − 1)`: the main effects and
/// two-way interaction terms of the model graph.
pub fn pairwise_dof(model: &DecomposableModel, cards: &[usize]) -> i64 {
    let c = |v: usize| cards[v] as i64 - 1;
    (0..model.num_vars()).map(c).sum::<i64>()
        + model.graph().edges().map(|(a, b)| c(a) * c(b)).sum::<i64>()
}

/// As [`raw_dof`], counting only marginal cells with a non-zero estimate.
pub fn adjusted_dof(model: &DecomposableModel, data: &ObservationSet) -> Result<i64> {
    let nonzero = |vars: &[usize]| -> Result<i64> {
        let table = marginal_counts(data, vars)?;
        Ok(table.cells().iter().filter(|&&c| c > 0).count() as i64 - 1)
    };
    let mut dof = 0;
    for c in model.cliques() {
        dof += nonzero(c)?;
    }
    for s in model.separators() {
        dof -= nonzero(s)?;
    }
    Ok(dof)
}

/// `G²` computed over the observed events only, without a dense table.
pub(crate) fn sparse_g_squared(model: &DecomposableModel, data: &ObservationSet) -> Result<f64> {
    let marginals = Marginals::count(model, data)?;
    let mut events: Vec<Vec<Level>> = data
        .rows()
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .map(|x| x.ok_or(Error::MissingValue { row: r }))
                .collect()
        })
        .collect::<Result<_>>()?;
    events.sort_unstable();
    let n = data.len() as f64;
    let mut total = 0.0;
    for group in events.chunk_by(|a, b| a == b) {
        let f = group.len() as f64;
        let e = n * marginals.estimate(&group[0], &[]);
        if e <= 0.0 {
            return Err(Error::ZeroExpectedNonzeroObserved {
                observed: group.len() as u64,
            });
        }
        total += f * (f / e).ln();
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposable::{parse_model, ModelGraph};
    use crate::events::FeatureSchema;
    use approx::assert_abs_diff_eq;

    /// The 24-row three-variable example: freq(A, B, C) in row-major order.
    fn example() -> ObservationSet {
        let freq = [0, 1, 5, 12, 0, 3, 2, 1];
        let schema = FeatureSchema::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![2, 2, 2],
            Some(2),
        )
        .unwrap();
        let mut rows = Vec::new();
        for (cell, &f) in freq.iter().enumerate() {
            for _ in 0..f {
                rows.push(vec![cell >> 2, (cell >> 1) & 1, cell & 1]);
            }
        }
        ObservationSet::from_levels(schema, rows).unwrap()
    }

    fn model(s: &str) -> DecomposableModel {
        let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        parse_model(s, &names).unwrap()
    }

    #[test]
    fn reference_deviances() {
        let data = example();
        for (m, g2) in [
            ("(A)(B)(C)", 10.14),
            ("(AB)(C)", 4.56),
            ("(A)(BC)", 7.07),
            ("(AB)(BC)", 1.48),
            ("(ABC)", 0.0),
        ] {
            let r = fit(&model(m), &data).unwrap();
            assert_abs_diff_eq!(r.g_squared, g2, epsilon = 0.01);
            assert_abs_diff_eq!(r.joint.total(), 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(sparse_g_squared(&model(m), &data).unwrap(), r.g_squared, epsilon = 1e-9);
        }
    }

    #[test]
    fn saturated_fit_is_empirical() {
        let data = example();
        let r = fit(&DecomposableModel::saturated(3), &data).unwrap();
        let freq = [0, 1, 5, 12, 0, 3, 2, 1];
        for (p, f) in r.joint.probs().iter().zip(freq) {
            assert_abs_diff_eq!(*p, f as f64 / 24.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.g_squared, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn observed_equal_to_expected_has_zero_deviance() {
        let observed = MarginalCounts::from_cells(vec![0], vec![2], vec![3, 1]).unwrap();
        let fitted = JointTable::new(vec![2], vec![0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(g_squared(&observed, &fitted, 4).unwrap(), 0.0);
        let bad = JointTable::new(vec![2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            g_squared(&observed, &bad, 4),
            Err(Error::ZeroExpectedNonzeroObserved { observed: 1 })
        ));
    }

    #[test]
    fn dof_counts() {
        let schema = FeatureSchema::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![2, 2, 2],
            None,
        )
        .unwrap();
        let all: Vec<Vec<usize>> = (0..8).map(|c| vec![c >> 2, (c >> 1) & 1, c & 1]).collect();
        let full = ObservationSet::from_levels(schema.clone(), all).unwrap();
        let sat = DecomposableModel::saturated(3);
        assert_eq!(adjusted_dof(&sat, &full).unwrap(), 7);
        assert_eq!(raw_dof(&sat, &[2, 2, 2]), 7);
        let ab_c = model("(AB)(C)");
        let ab_bc = model("(AB)(BC)");
        assert_eq!(
            adjusted_dof(&ab_bc, &full).unwrap() - adjusted_dof(&ab_c, &full).unwrap(),
            1
        );
        assert_eq!(raw_dof(&DecomposableModel::independence(3), &[2, 2, 2]), 3);

        // (B, C) = (0, 0) never occurs, so one cell of the BC margin is zero
        let sparse = ObservationSet::from_levels(
            schema,
            vec![vec![0, 0, 1], vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]],
        )
        .unwrap();
        assert!(adjusted_dof(&ab_bc, &sparse).unwrap() < raw_dof(&ab_bc, &[2, 2, 2]));
    }

    #[test]
    fn shape_checks() {
        let data = example();
        let m = DecomposableModel::new(ModelGraph::empty(2)).unwrap();
        assert!(matches!(fit(&m, &data), Err(Error::ShapeMismatch(_))));
    }
}
