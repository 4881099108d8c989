//! Model notation such as `(AB)(BC)` or `([F1][S])([F2][S])`.
//!
//! Each parenthesized group is a maximal clique. A variable name is either
//! a single character or a bracketed name. Variables that appear in no
//! group are independent singletons.

use super::{DecomposableModel, ModelGraph};
use crate::error::{Error, Result};

pub fn parse_model(text: &str, names: &[String]) -> Result<DecomposableModel> {
    let lookup = |name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Notation(format!("unknown variable {name:?}")))
    };
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut current: Option<Vec<usize>> = None;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '(' => {
                if current.is_some() {
                    return Err(Error::Notation("nested '('".into()));
                }
                current = Some(Vec::new());
            }
            ')' => {
                let clique = current
                    .take()
                    .ok_or_else(|| Error::Notation("unmatched ')'".into()))?;
                if clique.is_empty() {
                    return Err(Error::Notation("empty clique".into()));
                }
                cliques.push(clique);
            }
            _ => {
                let clique = current
                    .as_mut()
                    .ok_or_else(|| Error::Notation(format!("{c:?} outside parentheses")))?;
                let name: String = if c == '[' {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some(']') => break,
                            Some(x) => name.push(x),
                            None => return Err(Error::Notation("unterminated '['".into())),
                        }
                    }
                    name
                } else {
                    c.to_string()
                };
                let v = lookup(&name)?;
                if clique.contains(&v) {
                    return Err(Error::Notation(format!("{name} repeated in a clique")));
                }
                clique.push(v);
            }
        }
    }
    if current.is_some() {
        return Err(Error::Notation("unterminated '('".into()));
    }
    let graph = ModelGraph::from_cliques(names.len(), &cliques)?;
    let model = DecomposableModel::new(graph)?;

    let mut given: Vec<Vec<usize>> = cliques
        .into_iter()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    given.sort();
    given.dedup();
    let implied: Vec<Vec<usize>> = model
        .sorted_cliques()
        .into_iter()
        .filter(|c| c.len() > 1 || given.iter().any(|g| g == c))
        .collect();
    if given != implied {
        return Err(Error::Notation(format!(
            "{text:?} is not graphical: its graph has cliques {}",
            format_model(&model, names)
        )));
    }
    Ok(model)
}

/// Canonical notation: cliques sorted by their sorted variable indices.
/// Names are bracketed unless every name is a single character.
pub fn format_model(model: &DecomposableModel, names: &[String]) -> String {
    let bare = names.iter().all(|n| n.chars().count() == 1 && n != "[" && n != "]");
    let mut out = String::new();
    for clique in model.sorted_cliques() {
        out.push('(');
        for v in clique {
            let name = &names[v];
            if bare {
                out.push_str(name);
            } else {
                out.push('[');
                out.push_str(name);
                out.push(']');
            }
        }
        out.push(')');
    }
    out
}
