//! The Naive Mix: an average of the models visited by a sequential search.

use super::fit::{dense_joint, JointTable};
use super::{DecomposableModel, ModelGraph};
use crate::error::{Error, Result};
use crate::events::{Level, ObservationSet};

/// Drops every clique that does not contain `class_var`. The variables no
/// longer covered are returned with their cardinalities; they are completed
/// with a uniform distribution, which is constant with respect to the class.
pub fn strip_to_class(
    model: &DecomposableModel,
    class_var: usize,
    cards: &[usize],
) -> Result<(DecomposableModel, Vec<(usize, usize)>)> {
    let kept: Vec<Vec<usize>> = model
        .cliques()
        .iter()
        .filter(|c| c.contains(&class_var))
        .cloned()
        .collect();
    let graph = ModelGraph::from_cliques(model.num_vars(), &kept)?;
    let stripped = DecomposableModel::new(graph)?;
    let uniform = (0..model.num_vars())
        .filter(|v| !kept.iter().any(|c| c.contains(v)))
        .map(|v| (v, cards[v]))
        .collect();
    Ok((stripped, uniform))
}

/// Cellwise mean of the joint estimates of the class-stripped models.
pub fn naive_mix(sequence: &[DecomposableModel], data: &ObservationSet) -> Result<JointTable> {
    if sequence.is_empty() {
        return Err(Error::Empty);
    }
    let class_var = data.schema().class_index().ok_or(Error::NoClassVariable)?;
    let cards = data.schema().cardinalities();
    let mut sum: Option<Vec<f64>> = None;
    for model in sequence {
        let (stripped, uniform) = strip_to_class(model, class_var, cards)?;
        let joint = dense_joint(&stripped, data, &uniform)?;
        match sum.as_mut() {
            None => sum = Some(joint.probs().to_vec()),
            Some(acc) => acc.iter_mut().zip(joint.probs()).for_each(|(a, p)| *a += p),
        }
    }
    let r = sequence.len() as f64;
    let probs = sum
        .expect("sequence is non-empty")
        .into_iter()
        .map(|p| p / r)
        .collect();
    JointTable::new(cards.to_vec(), probs)
}

/// Most probable class for a feature vector under a joint table. `fv` holds
/// the non-class variables in schema order. Ties go to the lowest class.
pub fn classify_joint(joint: &JointTable, fv: &[Level], class_var: usize) -> Result<usize> {
    let cards = joint.cards();
    if class_var >= cards.len() {
        return Err(Error::UnknownVariable(class_var));
    }
    if fv.len() + 1 != cards.len() {
        return Err(Error::LengthMismatch {
            expected: cards.len() - 1,
            actual: fv.len(),
        });
    }
    let mut levels: Vec<Level> = Vec::with_capacity(cards.len());
    levels.extend_from_slice(&fv[..class_var]);
    levels.push(0);
    levels.extend_from_slice(&fv[class_var..]);
    for (v, (&l, &c)) in levels.iter().zip(cards).enumerate() {
        if l >= c {
            return Err(Error::LevelOutOfRange {
                row: 0,
                var: v,
                level: l,
                cardinality: c,
            });
        }
    }
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for s in 0..cards[class_var] {
        levels[class_var] = s;
        let p = joint.get(&levels);
        if p > best_p {
            best = s;
            best_p = p;
        }
    }
    if best_p <= 0.0 {
        return Err(Error::ZeroEvidence { rows: vec![] });
    }
    Ok(best)
}
