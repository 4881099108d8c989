//! Agglomerative clustering of observations through their dissimilarity
//! matrix.
//!
//! Each observation is represented by its row of the dissimilarity matrix.
//! Ward's method merges the pair of clusters with the smallest
//! between-cluster variance over those coordinates; McQuitty's method merges
//! the pair with the smallest current distance and averages distances on
//! merge. Ties among minimal pairs are broken with a seeded RNG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::ObservationSet;

/// Pairs whose criterion is within this of the minimum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Symmetric matrix of per-pair feature mismatch counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    n: usize,
    cells: Vec<u32>,
}

impl DissimilarityMatrix {
    /// Builds a matrix from explicit rows, checking symmetry and the zero diagonal.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let mut cells = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeMismatch(format!("row {i} has {} cells", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::ShapeMismatch(format!("nonzero diagonal at {i}")));
            }
            for (j, &x) in row.iter().enumerate() {
                if rows[j][i] != x {
                    return Err(Error::ShapeMismatch(format!("asymmetric at ({i}, {j})")));
                }
            }
            cells.extend_from_slice(row);
        }
        Ok(Self { n, cells })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.cells[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.cells[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Counts, for every pair of rows, the features whose values differ.
/// The class column is ignored.
pub fn dissimilarity_matrix(data: &ObservationSet) -> DissimilarityMatrix {
    let fvs = data.feature_vectors();
    let n = fvs.len();
    let mut cells = vec![0u32; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = fvs[i].iter().zip(&fvs[j]).filter(|(a, b)| a != b).count() as u32;
            cells[i * n + j] = d;
            cells[j * n + i] = d;
        }
    }
    DissimilarityMatrix { n, cells }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Ward,
    McQuitty,
}

/// Ward's between-cluster variance `‖x̄_K − x̄_L‖² / (1/N_K + 1/N_L)`.
pub fn ward_between_variance(
    centroid_a: &[f64],
    size_a: usize,
    centroid_b: &[f64],
    size_b: usize,
) -> f64 {
    let sq: f64 = centroid_a
        .iter()
        .zip(centroid_b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sq / (1.0 / size_a as f64 + 1.0 / size_b as f64)
}

/// McQuitty's distance from a merged cluster `KL` to a cluster `I`.
pub fn mcquitty_update(d_ki: f64, d_li: f64) -> f64 {
    (d_ki + d_li) / 2.0
}

/// One cluster of the agglomeration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    /// Mean dissimilarity row of the members (used by Ward).
    pub centroid: Vec<f64>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// One merge of the agglomeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smallest original row index in each merged cluster.
    pub left: usize,
    pub right: usize,
    /// Linkage criterion value at the merge.
    pub criterion: f64,
    /// How many pairs were tied at the minimum.
    pub tied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agglomeration {
    /// Cluster label per row; labels are numbered by first appearance.
    pub assignments: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub merges: Vec<Merge>,
}

/// Merges clusters until `k` remain.
///
/// Active clusters live in slots; a merge keeps the lower slot and removes
/// the higher one. Candidate pairs are scanned in slot order `(a, b)` with
/// `a < b`, and a tie among minimal pairs is resolved by one uniform draw.
pub fn agglomerate(
    matrix: &DissimilarityMatrix,
    linkage: Linkage,
    k: usize,
    seed: u64,
) -> Result<Agglomeration> {
    let n = matrix.size();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            members: vec![i],
            centroid: matrix.row(i).iter().map(|&x| f64::from(x)).collect(),
        })
        .collect();
    // distance[a][b] for slots a < b
    let mut distance: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| match linkage {
                    Linkage::McQuitty => f64::from(matrix.get(a, b)),
                    Linkage::Ward => {
                        if a < b {
                            ward_between_variance(&clusters[a].centroid, 1, &clusters[b].centroid, 1)
                        } else {
                            0.0
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut merges = Vec::with_capacity(n - k);

    while clusters.len() > k {
        let m = clusters.len();
        let mut best = f64::INFINITY;
        for a in 0..m {
            for b in (a + 1)..m {
                best = best.min(distance[a][b]);
            }
        }
        let mut ties = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                if distance[a][b] <= best + TIE_TOLERANCE {
                    ties.push((a, b));
                }
            }
        }
        let (a, b) = if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.random_range(0..ties.len())]
        };
        merges.push(Merge {
            left: clusters[a].members[0],
            right: clusters[b].members[0],
            criterion: distance[a][b],
            tied: ties.len(),
        });

        let removed = clusters.remove(b);
        let kept = &mut clusters[a];
        let (na, nb) = (kept.size() as f64, removed.size() as f64);
        for (x, y) in kept.centroid.iter_mut().zip(&removed.centroid) {
            *x = (*x * na + y * nb) / (na + nb);
        }
        kept.members.extend(removed.members);
        kept.members.sort_unstable();

        match linkage {
            Linkage::McQuitty => {
                for i in 0..m {
                    if i != a && i != b {
                        let merged = mcquitty_update(pair(&distance, a, i), pair(&distance, b, i));
                        set_pair(&mut distance, a, i, merged);
                    }
                }
            }
            Linkage::Ward => {
                for i in 0..m {
                    if i != a && i != b {
                        let slot_i = if i > b { i - 1 } else { i };
                        let v = ward_between_variance(
                            &clusters[a].centroid,
                            clusters[a].size(),
                            &clusters[slot_i].centroid,
                            clusters[slot_i].size(),
                        );
                        set_pair(&mut distance, a, i, v);
                    }
                }
            }
        }
        distance.remove(b);
        for row in &mut distance {
            row.remove(b);
        }
    }

    let mut assignments = vec![0; n];
    let mut order: Vec<usize> = (0..clusters.len()).collect();
    order.sort_by_key(|&c| clusters[c].members[0]);
    let clusters: Vec<Cluster> = order.into_iter().map(|c| clusters[c].clone()).collect();
    for (label, c) in clusters.iter().enumerate() {
        for &r in &c.members {
            assignments[r] = label;
        }
    }
    Ok(Agglomeration {
        assignments,
        clusters,
        merges,
    })
}

fn pair(d: &[Vec<f64>], a: usize, b: usize) -> f64 {
    if a < b {
        d[a][b]
    } else {
        d[b][a]
    }
}

fn set_pair(d: &mut [Vec<f64>], a: usize, b: usize, v: f64) {
    if a < b {
        d[a][b] = v;
    } else {
        d[b][a] = v;
    }
}
