//! Discrete observations and marginal frequency tables.
//!
//! Every variable, the class included, is a column of the schema with a
//! fixed number of levels. Levels are dense 0-based indices; level names are
//! kept only so that data can be written back out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a level within a variable.
pub type Level = usize;

/// Column layout of an [`ObservationSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    class_index: Option<usize>,
    level_names: Vec<Vec<String>>,
}

impl FeatureSchema {
    /// Builds a schema with numeric level names.
    pub fn new(
        names: Vec<String>,
        cardinalities: Vec<usize>,
        class_index: Option<usize>,
    ) -> Result<Self> {
        let level_names = cardinalities
            .iter()
            .map(|&c| (0..c).map(|l| l.to_string()).collect())
            .collect();
        Self::with_level_names(names, level_names, class_index)
    }

    /// Builds a schema whose cardinalities are the lengths of `level_names`.
    pub fn with_level_names(
        names: Vec<String>,
        level_names: Vec<Vec<String>>,
        class_index: Option<usize>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidSchema("no variables".into()));
        }
        if names.len() != level_names.len() {
            return Err(Error::InvalidSchema(format!(
                "{} names but {} level dictionaries",
                names.len(),
                level_names.len()
            )));
        }
        // an entirely unobserved class may have no levels yet
        for (i, (name, levels)) in names.iter().zip(&level_names).enumerate() {
            if levels.is_empty() && Some(i) != class_index {
                return Err(Error::InvalidSchema(format!("variable {name} has no levels")));
            }
        }
        if let Some(c) = class_index {
            if c >= names.len() {
                return Err(Error::InvalidSchema(format!("class index {c} out of range")));
            }
        }
        let cardinalities = level_names.iter().map(Vec::len).collect();
        Ok(Self {
            names,
            cardinalities,
            class_index,
            level_names,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.cardinalities[var]
    }

    pub fn class_index(&self) -> Option<usize> {
        self.class_index
    }

    pub fn class_cardinality(&self) -> Option<usize> {
        self.class_index.map(|c| self.cardinalities[c])
    }

    pub fn level_names(&self, var: usize) -> &[String] {
        &self.level_names[var]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Indices of the non-class variables, in column order.
    pub fn feature_vars(&self) -> Vec<usize> {
        (0..self.num_vars())
            .filter(|&v| Some(v) != self.class_index)
            .collect()
    }

    /// Cardinalities of the non-class variables, in column order.
    pub fn feature_cardinalities(&self) -> Vec<usize> {
        self.feature_vars()
            .into_iter()
            .map(|v| self.cardinalities[v])
            .collect()
    }

    /// Returns this schema with the class variable given `k` levels,
    /// appending a column named `S` when there is no class variable.
    pub fn with_class_levels(&self, k: usize) -> Self {
        let mut out = self.clone();
        let levels: Vec<String> = (0..k).map(|l| l.to_string()).collect();
        match out.class_index {
            Some(c) => {
                out.cardinalities[c] = k;
                out.level_names[c] = levels;
            }
            None => {
                let mut name = String::from("S");
                while out.names.contains(&name) {
                    name.push('_');
                }
                out.names.push(name);
                out.cardinalities.push(k);
                out.level_names.push(levels);
                out.class_index = Some(out.names.len() - 1);
            }
        }
        out
    }
}

/// Rows of discrete values. Only the class column may be missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    schema: FeatureSchema,
    rows: Vec<Vec<Option<Level>>>,
}

impl ObservationSet {
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<Option<Level>>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.num_vars() {
                return Err(Error::InvalidRow {
                    row: r,
                    reason: format!("{} values for {} variables", row.len(), schema.num_vars()),
                });
            }
            for (var, value) in row.iter().enumerate() {
                match value {
                    Some(level) if *level >= schema.cardinality(var) => {
                        return Err(Error::LevelOutOfRange {
                            row: r,
                            var,
                            level: *level,
                            cardinality: schema.cardinality(var),
                        })
                    }
                    None if Some(var) != schema.class_index() => {
                        return Err(Error::InvalidRow {
                            row: r,
                            reason: format!("feature {} is missing", schema.name(var)),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { schema, rows })
    }

    /// Builds a set from fully observed rows.
    pub fn from_levels(schema: FeatureSchema, rows: Vec<Vec<Level>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect();
        Self::new(schema, rows)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    /// Sample size N.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Option<Level>>] {
        &self.rows
    }

    pub fn value(&self, row: usize, var: usize) -> Option<Level> {
        self.rows[row][var]
    }

    /// The class entry of every row; `None` marks a missing class.
    pub fn class_labels(&self) -> Vec<Option<Level>> {
        match self.schema.class_index() {
            Some(c) => self.rows.iter().map(|r| r[c]).collect(),
            None => vec![None; self.rows.len()],
        }
    }

    /// Class labels of a fully labeled set.
    pub fn labels(&self) -> Result<Vec<Level>> {
        let c = self.schema.class_index().ok_or(Error::NoClassVariable)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| row[c].ok_or(Error::MissingValue { row: r }))
            .collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.schema.class_index().is_some() && self.class_labels().iter().all(Option::is_some)
    }

    pub fn is_fully_unlabeled(&self) -> bool {
        self.class_labels().iter().all(Option::is_none)
    }

    /// Non-class values of one row, in column order.
    pub fn feature_vector(&self, row: usize) -> Vec<Level> {
        let class = self.schema.class_index();
        self.rows[row]
            .iter()
            .enumerate()
            .filter(|(v, _)| Some(*v) != class)
            .map(|(_, x)| x.expect("features are always observed"))
            .collect()
    }

    pub fn feature_vectors(&self) -> Vec<Vec<Level>> {
        (0..self.len()).map(|r| self.feature_vector(r)).collect()
    }

    /// Returns a copy with the class column filled in from `classes`,
    /// widening the class variable to `k` levels (or adding one).
    pub fn with_classes(&self, classes: &[Level], k: usize) -> Result<Self> {
        if classes.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: classes.len(),
            });
        }
        let schema = self.schema.with_class_levels(k);
        let c = schema.class_index().expect("class column present");
        let rows = self
            .rows
            .iter()
            .zip(classes)
            .map(|(row, &s)| {
                let mut row = row.clone();
                if row.len() < schema.num_vars() {
                    row.push(Some(s));
                } else {
                    row[c] = Some(s);
                }
                row
            })
            .collect();
        Self::new(schema, rows)
    }

    /// Keeps the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Self::new(self.schema.clone(), rows)
    }
}

/// Dense frequency table over an ordered subset of variables, row-major in
/// the joint levels (the last variable varies fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalCounts {
    vars: Vec<usize>,
    cards: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl MarginalCounts {
    /// Builds a table from explicit cells; `counts` must have `∏ cards` entries.
    pub fn from_cells(vars: Vec<usize>, cards: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if vars.len() != cards.len() {
            return Err(Error::LengthMismatch {
                expected: vars.len(),
                actual: cards.len(),
            });
        }
        let size: usize = cards.iter().product();
        if counts.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                actual: counts.len(),
            });
        }
        let total = counts.iter().sum();
        Ok(Self {
            vars,
            cards,
            counts,
            total,
        })
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn cells(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Flat index of a joint level assignment (one level per variable).
    pub fn index(&self, levels: &[Level]) -> usize {
        flat_index(&self.cards, levels)
    }

    pub fn get(&self, levels: &[Level]) -> u64 {
        self.counts[self.index(levels)]
    }

    /// Position of `var` within this table's variables.
    pub fn position(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    /// Marginalizes onto `vars`, which must all belong to this table.
    pub fn project(&self, vars: &[usize]) -> Result<Self> {
        let positions: Vec<usize> = vars
            .iter()
            .map(|&v| self.position(v))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::NotSubset {
                vars: vars.to_vec(),
                of: self.vars.clone(),
            })?;
        let cards: Vec<usize> = positions.iter().map(|&p| self.cards[p]).collect();
        let mut counts = vec![0u64; cards.iter().product()];
        let mut levels = vec![0; self.vars.len()];
        let mut sub = vec![0; vars.len()];
        for &count in &self.counts {
            for (s, &p) in sub.iter_mut().zip(&positions) {
                *s = levels[p];
            }
            counts[flat_index(&cards, &sub)] += count;
            advance(&mut levels, &self.cards);
        }
        Ok(Self {
            vars: vars.to_vec(),
            cards,
            counts,
            total: self.total,
        })
    }
}

/// Counts joint occurrences of `vars` over all rows.
pub fn marginal_counts(data: &ObservationSet, vars: &[usize]) -> Result<MarginalCounts> {
    let schema = data.schema();
    if let Some(&bad) = vars.iter().find(|&&v| v >= schema.num_vars()) {
        return Err(Error::UnknownVariable(bad));
    }
    let cards: Vec<usize> = vars.iter().map(|&v| schema.cardinality(v)).collect();
    let mut counts = vec![0u64; cards.iter().product()];
    let mut levels = vec![0; vars.len()];
    for (r, row) in data.rows().iter().enumerate() {
        for (l, &v) in levels.iter_mut().zip(vars) {
            *l = row[v].ok_or(Error::MissingValue { row: r })?;
        }
        counts[flat_index(&cards, &levels)] += 1;
    }
    Ok(MarginalCounts {
        vars: vars.to_vec(),
        cards,
        counts,
        total: data.len() as u64,
    })
}

/// Row-major flat index.
pub(crate) fn flat_index(cards: &[usize], levels: &[Level]) -> usize {
    debug_assert_eq!(cards.len(), levels.len());
    levels
        .iter()
        .zip(cards)
        .fold(0, |acc, (&l, &c)| acc * c + l)
}

/// Steps `levels` to the next joint assignment in row-major order.
/// Wraps to all zeros after the last one.
pub(crate) fn advance(levels: &mut [Level], cards: &[usize]) {
    for i in (0..levels.len()).rev() {
        levels[i] += 1;
        if levels[i] < cards[i] {
            return;
        }
        levels[i] = 0;
    }
}
