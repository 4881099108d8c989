//! Decomposable log-linear models.
//!
//! A model is an undirected chordal graph over the schema variables. Its
//! maximal cliques are the marginals whose counts are the sufficient
//! statistics; the joint estimate is the product of clique marginals over
//! the product of separator marginals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod fit;
mod naive_mix;
mod notation;
mod select;

pub use fit::{
    adjusted_dof, fit, g_squared, pairwise_dof, raw_dof, DofMode, FitResult, JointTable, MAX_EVENT_CELLS,
};
pub use naive_mix::{classify_joint, naive_mix, strip_to_class};
pub use notation::{format_model, parse_model};
pub use select::{
    candidates, chi_square_upper_tail, criterion_delta, sequential_select, CandidateEval,
    Criterion, Direction, SearchStep, SelectConfig, Selection,
};

/// Undirected graph over variables `0..num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelGraph {
    num_vars: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ModelGraph {
    pub fn new(num_vars: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(num_vars);
        for (a, b) in edges {
            g.insert(a, b)?;
        }
        Ok(g)
    }

    pub fn empty(num_vars: usize) -> Self {
        Self {
            num_vars,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(num_vars: usize) -> Self {
        let edges = (0..num_vars)
            .flat_map(|a| ((a + 1)..num_vars).map(move |b| (a, b)))
            .collect();
        Self { num_vars, edges }
    }

    /// The graph whose edges join every pair within each clique.
    pub fn from_cliques(num_vars: usize, cliques: &[Vec<usize>]) -> Result<Self> {
        let mut g = Self::empty(num_vars);
        for clique in cliques {
            for (i, &a) in clique.iter().enumerate() {
                if a >= num_vars {
                    return Err(Error::UnknownVariable(a));
                }
                for &b in &clique[i + 1..] {
                    g.insert(a, b)?;
                }
            }
        }
        Ok(g)
    }

    fn insert(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.num_vars || b >= self.num_vars {
            return Err(Error::UnknownVariable(a.max(b)));
        }
        if a == b {
            return Err(Error::InvalidParameter(format!("self-loop on variable {a}")));
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Edges as `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn with_edge(&self, a: usize, b: usize) -> Result<Self> {
        let mut g = self.clone();
        g.insert(a, b)?;
        Ok(g)
    }

    pub fn without_edge(&self, a: usize, b: usize) -> Self {
        let mut g = self.clone();
        g.edges.remove(&(a.min(b), a.max(b)));
        g
    }

    fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.num_vars]; self.num_vars];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    /// Maximum cardinality search order (ties to the lowest index) with each
    /// vertex's previously numbered neighbours.
    fn max_cardinality_search(&self) -> Vec<(usize, Vec<usize>)> {
        let adj = self.adjacency();
        let n = self.num_vars;
        let mut weight = vec![0usize; n];
        let mut numbered = vec![false; n];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !numbered[v])
                .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
                .expect("an unnumbered vertex remains");
            let earlier: Vec<usize> = out
                .iter()
                .map(|(u, _): &(usize, Vec<usize>)| *u)
                .filter(|&u| adj[v][u])
                .collect();
            numbered[v] = true;
            for u in 0..n {
                if adj[v][u] && !numbered[u] {
                    weight[u] += 1;
                }
            }
            out.push((v, earlier));
        }
        out
    }
}

/// True iff every cycle of length four or more has a chord.
pub fn is_chordal(g: &ModelGraph) -> bool {
    let adj = g.adjacency();
    g.max_cardinality_search().iter().all(|(_, earlier)| {
        earlier
            .iter()
            .enumerate()
            .all(|(i, &a)| earlier[i + 1..].iter().all(|&b| adj[a][b]))
    })
}

/// Variable subsets, each sorted.
pub type VarSets = Vec<Vec<usize>>;

/// Maximal cliques of a chordal graph, in an order with the running
/// intersection property, and the non-empty separators along that order.
pub fn maximal_cliques(g: &ModelGraph) -> Result<(VarSets, VarSets)> {
    if !is_chordal(g) {
        return Err(Error::NotChordal);
    }
    let candidates: Vec<Vec<usize>> = g
        .max_cardinality_search()
        .into_iter()
        .map(|(v, mut earlier)| {
            earlier.push(v);
            earlier.sort_unstable();
            earlier
        })
        .collect();
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let dominated = candidates
            .iter()
            .enumerate()
            .any(|(j, other)| j != i && other.len() > c.len() && is_subset(c, other));
        if !dominated && !cliques.contains(c) {
            cliques.push(c.clone());
        }
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut separators = Vec::new();
    for c in &cliques {
        let sep: Vec<usize> = c.iter().copied().filter(|v| seen.contains(v)).collect();
        if !sep.is_empty() {
            separators.push(sep);
        }
        seen.extend(c.iter().copied());
    }
    Ok((cliques, separators))
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// A chordal model graph with its clique decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecomposableModel {
    graph: ModelGraph,
    cliques: Vec<Vec<usize>>,
    separators: Vec<Vec<usize>>,
}

impl DecomposableModel {
    pub fn new(graph: ModelGraph) -> Result<Self> {
        let (cliques, separators) = maximal_cliques(&graph)?;
        Ok(Self {
            graph,
            cliques,
            separators,
        })
    }

    /// The model of independence: no edges.
    pub fn independence(num_vars: usize) -> Self {
        Self::new(ModelGraph::empty(num_vars)).expect("edgeless graphs are chordal")
    }

    /// The saturated model: every pair joined.
    pub fn saturated(num_vars: usize) -> Self {
        Self::new(ModelGraph::complete(num_vars)).expect("complete graphs are chordal")
    }

    /// Naive Bayes: every feature joined to the class and nothing else.
    pub fn naive_bayes(num_vars: usize, class_var: usize) -> Result<Self> {
        let edges = (0..num_vars).filter(|&v| v != class_var).map(|v| (v, class_var));
        Self::new(ModelGraph::new(num_vars, edges)?)
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    pub fn num_vars(&self) -> usize {
        self.graph.num_vars()
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn separators(&self) -> &[Vec<usize>] {
        &self.separators
    }

    /// Cliques sorted for display and comparison.
    pub fn sorted_cliques(&self) -> Vec<Vec<usize>> {
        let mut c = self.cliques.clone();
        c.sort();
        c
    }
}
