//! Forward and backward sequential search over decomposable models.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::fit::{adjusted_dof, pairwise_dof, raw_dof, sparse_g_squared, DofMode};
use super::{is_chordal, DecomposableModel, ModelGraph};
use crate::error::{Error, Result};
use crate::events::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Aic,
    Bic,
    Chi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Upper tail probability of a χ² variable with `dof` degrees of freedom.
pub fn chi_square_upper_tail(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if dof <= 0.0 {
        return 0.0;
    }
    gamma_ur(dof / 2.0, x / 2.0)
}

/// Score of a move between nested models and whether it is acceptable.
///
/// `delta_g2` and `delta_dof` are the absolute differences between the
/// simpler and the more complex model. AIC and BIC return
/// `ΔG² − penalty·Δdof`; a forward move is acceptable when that is positive,
/// a backward move when it is negative. CHI2 returns the upper tail
/// probability of `ΔG²`; a forward move needs `p < α`, a backward move
/// `p > α`.
pub fn criterion_delta(
    kind: Criterion,
    direction: Direction,
    delta_g2: f64,
    delta_dof: i64,
    n: usize,
    alpha: f64,
) -> (f64, bool) {
    let score = match kind {
        Criterion::Aic => delta_g2 - 2.0 * delta_dof as f64,
        Criterion::Bic => delta_g2 - (n as f64).ln() * delta_dof as f64,
        Criterion::Chi2 => {
            if delta_dof <= 0 {
                if delta_g2 <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                chi_square_upper_tail(delta_g2, delta_dof as f64)
            }
        }
    };
    let acceptable = match (kind, direction) {
        (Criterion::Chi2, Direction::Forward) => score < alpha,
        (Criterion::Chi2, Direction::Backward) => score > alpha,
        (_, Direction::Forward) => score > 0.0,
        (_, Direction::Backward) => score < 0.0,
    };
    (score, acceptable)
}

/// Decomposable neighbours one edge away, in lexicographic edge order.
pub fn candidates(model: &DecomposableModel, direction: Direction) -> Vec<DecomposableModel> {
    let g = model.graph();
    let n = g.num_vars();
    let graphs: Vec<ModelGraph> = match direction {
        Direction::Forward => (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !g.has_edge(a, b))
            .map(|(a, b)| g.with_edge(a, b).expect("vertices are in range"))
            .collect(),
        Direction::Backward => g.edges().map(|(a, b)| g.without_edge(a, b)).collect(),
    };
    graphs
        .into_iter()
        .filter(is_chordal)
        .map(|g| DecomposableModel::new(g).expect("chordal graphs decompose"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectConfig {
    pub direction: Direction,
    pub criterion: Criterion,
    pub alpha: f64,
    pub dof: DofMode,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            direction: Direction::Forward,
            criterion: Criterion::Aic,
            alpha: 0.0001,
            dof: DofMode::Pairwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub model: DecomposableModel,
    pub g2: f64,
    pub delta_g2: f64,
    pub delta_dof: i64,
    pub score: f64,
    pub acceptable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub current: DecomposableModel,
    pub current_g2: f64,
    pub evaluations: Vec<CandidateEval>,
    /// Index into `evaluations` of the model that became current.
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub steps: Vec<SearchStep>,
    /// Every model that was current, in order.
    pub sequence: Vec<DecomposableModel>,
    pub selected: DecomposableModel,
}

struct Scorer<'a> {
    data: &'a ObservationSet,
    mode: DofMode,
    cache: HashMap<ModelGraph, (f64, i64)>,
}

impl Scorer<'_> {
    fn score(&mut self, model: &DecomposableModel) -> Result<(f64, i64)> {
        if let Some(&hit) = self.cache.get(model.graph()) {
            return Ok(hit);
        }
        let g2 = sparse_g_squared(model, self.data)?;
        let dof = match self.mode {
            DofMode::Pairwise => pairwise_dof(model, self.data.schema().cardinalities()),
            DofMode::Raw => raw_dof(model, self.data.schema().cardinalities()),
            DofMode::Adjusted => adjusted_dof(model, self.data)?,
        };
        self.cache.insert(model.graph().clone(), (g2, dof));
        Ok((g2, dof))
    }
}

/// Greedy search from the independence model (forward) or the saturated
/// model (backward), one edge per step, until no candidate is acceptable.
/// The class, if the schema has one, is treated like any other variable and
/// must be observed in every row.
pub fn sequential_select(data: &ObservationSet, config: &SelectConfig) -> Result<Selection> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.schema().class_index().is_some() {
        if let Some(row) = data.class_labels().iter().position(Option::is_none) {
            return Err(Error::MissingValue { row });
        }
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {}",
            config.alpha
        )));
    }
    let num_vars = data.schema().num_vars();
    let mut current = match config.direction {
        Direction::Forward => DecomposableModel::independence(num_vars),
        Direction::Backward => DecomposableModel::saturated(num_vars),
    };
    let mut scorer = Scorer {
        data,
        mode: config.dof,
        cache: HashMap::new(),
    };
    let mut steps = Vec::new();
    let mut sequence = vec![current.clone()];
    loop {
        let (current_g2, current_dof) = scorer.score(&current)?;
        let mut evaluations = Vec::new();
        for model in candidates(&current, config.direction) {
            let (g2, dof) = scorer.score(&model)?;
            let (delta_g2, delta_dof) = match config.direction {
                Direction::Forward => (current_g2 - g2, dof - current_dof),
                Direction::Backward => (g2 - current_g2, current_dof - dof),
            };
            let (score, acceptable) = criterion_delta(
                config.criterion,
                config.direction,
                delta_g2,
                delta_dof,
                data.len(),
                config.alpha,
            );
            evaluations.push(CandidateEval {
                model,
                g2,
                delta_g2,
                delta_dof,
                score,
                acceptable,
            });
        }
        let chosen = pick(&evaluations, config);
        steps.push(SearchStep {
            current: current.clone(),
            current_g2,
            evaluations,
            chosen,
        });
        match chosen {
            Some(i) => {
                current = steps.last().expect("just pushed").evaluations[i].model.clone();
                sequence.push(current.clone());
            }
            None => break,
        }
    }
    Ok(Selection {
        steps,
        sequence,
        selected: current,
    })
}

/// Best acceptable candidate; earlier candidates win ties.
fn pick(evaluations: &[CandidateEval], config: &SelectConfig) -> Option<usize> {
    // true when `a` is strictly better than `b`
    let better = |a: f64, b: f64| match (config.criterion, config.direction) {
        (Criterion::Chi2, Direction::Forward) => a < b,
        (Criterion::Chi2, Direction::Backward) => a > b,
        (_, Direction::Forward) => a > b,
        (_, Direction::Backward) => a < b,
    };
    let mut best: Option<usize> = None;
    for (i, e) in evaluations.iter().enumerate() {
        if !e.acceptable {
            continue;
        }
        if best.is_none_or(|b| better(e.score, evaluations[b].score)) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposable::{format_model, parse_model};
    use approx::assert_abs_diff_eq;

    fn abc() -> Vec<String> {
        ["A", "B", "C"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn criterion_values() {
        let (aic, ok) = criterion_delta(Criterion::Aic, Direction::Forward, 5.58, 1, 24, 0.05);
        assert_abs_diff_eq!(aic, 3.58, epsilon = 1e-12);
        assert!(ok);
        let (aic, ok) = criterion_delta(Criterion::Aic, Direction::Forward, 1.48, 1, 24, 0.05);
        assert_abs_diff_eq!(aic, -0.52, epsilon = 1e-12);
        assert!(!ok);
        let (aic, ok) = criterion_delta(Criterion::Aic, Direction::Backward, 1.48, 1, 24, 0.05);
        assert_abs_diff_eq!(aic, -0.52, epsilon = 1e-12);
        assert!(ok);
        let (bic, _) = criterion_delta(Criterion::Bic, Direction::Forward, 5.58, 1, 24, 0.05);
        assert_abs_diff_eq!(bic, 5.58 - 24f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bic, 2.40, epsilon = 0.01);
    }

    #[test]
    fn chi_square_tail_reference_points() {
        // 3.841459 is the 95th percentile of χ²(1); 5.991465 of χ²(2).
        assert_abs_diff_eq!(chi_square_upper_tail(3.841458820694124, 1.0), 0.05, epsilon = 1e-10);
        assert_abs_diff_eq!(chi_square_upper_tail(5.991464547107979, 2.0), 0.05, epsilon = 1e-10);
        // χ²(2) tail is exp(−x/2).
        assert_abs_diff_eq!(chi_square_upper_tail(3.0, 2.0), (-1.5f64).exp(), epsilon = 1e-12);
        assert_eq!(chi_square_upper_tail(0.0, 3.0), 1.0);
        let (p, ok) = criterion_delta(Criterion::Chi2, Direction::Forward, 20.0, 1, 24, 1e-4);
        assert!(p < 1e-4 && ok);
        let (p, ok) = criterion_delta(Criterion::Chi2, Direction::Backward, 0.1, 1, 24, 1e-4);
        assert!(p > 0.5 && ok);
    }

    #[test]
    fn candidate_lists() {
        let names = abc();
        let fmt = |ms: Vec<DecomposableModel>| -> Vec<String> {
            ms.iter().map(|m| format_model(m, &names)).collect()
        };
        let ind = parse_model("(A)(B)(C)", &names).unwrap();
        assert_eq!(fmt(candidates(&ind, Direction::Forward)), ["(AB)(C)", "(AC)(B)", "(A)(BC)"]);
        let ab = parse_model("(AB)(C)", &names).unwrap();
        assert_eq!(fmt(candidates(&ab, Direction::Forward)), ["(AB)(AC)", "(AB)(BC)"]);
        let sat = parse_model("(ABC)", &names).unwrap();
        assert_eq!(fmt(candidates(&sat, Direction::Backward)), ["(AC)(BC)", "(AB)(BC)", "(AB)(AC)"]);
    }

    #[test]
    fn backward_from_a_four_cycle_with_chord_keeps_chordality() {
        let g = ModelGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let m = DecomposableModel::new(g).unwrap();
        // removing the chord leaves a chordless 4-cycle
        let c = candidates(&m, Direction::Backward);
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|m| m.graph().has_edge(0, 2)));
    }
}
