//! CSV datasets: a header row of variable names, then one row per
//! observation. `?` marks a missing class value.

use std::collections::HashMap;
use std::path::Path;

use senselearn::{FeatureSchema, Level, ObservationSet};
use thiserror::Error;

pub const MISSING: &str = "?";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Model(#[from] senselearn::Error),
}

/// Observations plus, optionally, gold labels held out of the features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: ObservationSet,
    pub gold: Option<Gold>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gold {
    pub name: String,
    pub labels: Vec<usize>,
    pub level_names: Vec<String>,
}

impl Gold {
    pub fn k(&self) -> usize {
        self.level_names.len()
    }
}

#[derive(Default)]
struct Dictionary {
    names: Vec<String>,
    index: HashMap<String, Level>,
}

impl Dictionary {
    fn level(&mut self, value: &str) -> Level {
        if let Some(&l) = self.index.get(value) {
            return l;
        }
        let l = self.names.len();
        self.names.push(value.to_string());
        self.index.insert(value.to_string(), l);
        l
    }
}

fn position(headers: &[String], name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
}

pub fn load_dataset(
    path: &Path,
    class_col: Option<&str>,
    gold_col: Option<&str>,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, class_col, gold_col)
}

pub fn read_dataset<R: std::io::Read>(
    input: R,
    class_col: Option<&str>,
    gold_col: Option<&str>,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err(DataError::Parse {
            line: 1,
            column: 1,
            message: "header has an empty column name".into(),
        });
    }
    if let Some(dup) = headers
        .iter()
        .enumerate()
        .find(|(i, h)| headers[..*i].contains(h))
    {
        return Err(DataError::Parse {
            line: 1,
            column: dup.0 + 1,
            message: format!("duplicate column {:?}", dup.1),
        });
    }
    let class = class_col.map(|c| position(&headers, c)).transpose()?;
    let gold = gold_col.map(|c| position(&headers, c)).transpose()?;
    if class.is_some() && class == gold {
        return Err(DataError::Parse {
            line: 1,
            column: class.unwrap_or(0) + 1,
            message: "the class and gold columns must differ".into(),
        });
    }

    let vars: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != gold).collect();
    let mut dictionaries: Vec<Dictionary> = (0..headers.len()).map(|_| Dictionary::default()).collect();
    let mut rows: Vec<Vec<Option<Level>>> = Vec::new();
    let mut gold_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(DataError::RaggedRow {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(vars.len());
        for (c, value) in record.iter().enumerate() {
            let missing = value == MISSING;
            if value.is_empty() || (missing && Some(c) != class) {
                return Err(DataError::Parse {
                    line,
                    column: c + 1,
                    message: format!("missing value in column {:?}", headers[c]),
                });
            }
            if Some(c) == gold {
                gold_labels.push(dictionaries[c].level(value));
            } else if missing {
                row.push(None);
            } else {
                row.push(Some(dictionaries[c].level(value)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::Model(senselearn::Error::EmptyData));
    }

    let class_index = class.map(|c| vars.iter().position(|&v| v == c).expect("class is a variable"));
    let schema = FeatureSchema::with_level_names(
        vars.iter().map(|&c| headers[c].clone()).collect(),
        vars.iter().map(|&c| dictionaries[c].names.clone()).collect(),
        class_index,
    )?;
    let data = ObservationSet::new(schema, rows)?;
    let gold = gold.map(|g| Gold {
        name: headers[g].clone(),
        labels: gold_labels,
        level_names: std::mem::take(&mut dictionaries[g].names),
    });
    Ok(Dataset { data, gold })
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

/// Writes the variables in schema order, then the gold column if any.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), DataError> {
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_dataset(file, dataset)
}

pub fn write_dataset<W: std::io::Write>(output: W, dataset: &Dataset) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(output);
    let schema = dataset.data.schema();
    let mut header: Vec<&str> = schema.names().iter().map(String::as_str).collect();
    if let Some(g) = &dataset.gold {
        header.push(&g.name);
    }
    writer.write_record(&header).map_err(csv_error)?;
    for (r, row) in dataset.data.rows().iter().enumerate() {
        let mut record: Vec<&str> = row
            .iter()
            .enumerate()
            .map(|(v, value)| match value {
                Some(l) => schema.level_names(v)[*l].as_str(),
                None => MISSING,
            })
            .collect();
        if let Some(g) = &dataset.gold {
            record.push(&g.level_names[g.labels[r]]);
        }
        writer.write_record(&record).map_err(csv_error)?;
    }
    writer.flush().map_err(|e| DataError::Io {
        path: String::new(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_follow_first_appearance() {
        let text = "F1,F2,S\nb,x,?\na,x,?\nb,y,?\n";
        let d = read_dataset(text.as_bytes(), Some("S"), None).unwrap();
        assert_eq!(d.data.schema().level_names(0), &["b", "a"]);
        assert_eq!(d.data.feature_vectors(), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert!(d.data.is_fully_unlabeled());
        assert_eq!(d.data.schema().class_cardinality(), Some(0));
    }

    #[test]
    fn gold_is_held_out() {
        let text = "A,B,G\n0,1,x\n1,1,y\n";
        let d = read_dataset(text.as_bytes(), None, Some("G")).unwrap();
        assert_eq!(d.data.schema().num_vars(), 2);
        let g = d.gold.unwrap();
        assert_eq!(g.labels, vec![0, 1]);
        assert_eq!(g.k(), 2);
    }

    #[test]
    fn errors_carry_positions() {
        let ragged = "A,B\n0,1\n0\n";
        assert!(matches!(
            read_dataset(ragged.as_bytes(), None, None),
            Err(DataError::RaggedRow { line: 3, expected: 2, found: 1 })
        ));
        let missing = "A,B\n0,?\n";
        assert!(matches!(
            read_dataset(missing.as_bytes(), None, None),
            Err(DataError::Parse { line: 2, column: 2, .. })
        ));
        assert!(matches!(
            read_dataset("A,B\n0,1\n".as_bytes(), Some("C"), None),
            Err(DataError::UnknownColumn(_))
        ));
    }
}
