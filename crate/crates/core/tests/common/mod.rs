#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use senselearn::{FeatureSchema, ObservationSet};

/// The ten-row unsupervised example: levels are the 1-based values minus one.
pub fn toy() -> ObservationSet {
    let schema = FeatureSchema::new(vec!["F1".into(), "F2".into()], vec![2, 2], None).unwrap();
    let rows = [(0, 1), (0, 1), (1, 1), (1, 1), (0, 1), (0, 0), (0, 0), (0, 0), (0, 1), (1, 1)]
        .iter()
        .map(|&(a, b)| vec![a, b])
        .collect();
    ObservationSet::from_levels(schema, rows).unwrap()
}

/// Initial classes of the worked EM and Gibbs examples, 0-based.
pub const TOY_INIT: [usize; 10] = [0, 2, 1, 1, 0, 2, 0, 1, 1, 0];

/// The 24-row three-variable model selection example.
pub fn selection_example() -> ObservationSet {
    let freq = [0, 1, 5, 12, 0, 3, 2, 1];
    let schema = FeatureSchema::new(vec!["A".into(), "B".into(), "C".into()], vec![2, 2, 2], None).unwrap();
    let mut rows = Vec::new();
    for (cell, &f) in freq.iter().enumerate() {
        for _ in 0..f {
            rows.push(vec![cell >> 2 & 1, cell >> 1 & 1, cell & 1]);
        }
    }
    ObservationSet::from_levels(schema, rows).unwrap()
}

pub fn random_data(rng: &mut ChaCha8Rng, cards: &[usize], n: usize) -> ObservationSet {
    let names = (0..cards.len()).map(|i| format!("V{i}")).collect();
    let schema = FeatureSchema::new(names, cards.to_vec(), None).unwrap();
    let rows = (0..n)
        .map(|_| cards.iter().map(|&c| rng.random_range(0..c)).collect())
        .collect();
    ObservationSet::from_levels(schema, rows).unwrap()
}

/// Two classes of 20 rows whose three features draw from disjoint halves
/// of four levels. Returns the data and the true class per row.
pub fn separable(seed: u64) -> (ObservationSet, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = FeatureSchema::new(vec!["X".into(), "Y".into(), "Z".into()], vec![4, 4, 4], None).unwrap();
    let gold: Vec<usize> = (0..40).map(|r| r % 2).collect();
    let rows = gold
        .iter()
        .map(|&s| (0..3).map(|_| 2 * s + rng.random_range(0..2)).collect())
        .collect();
    (ObservationSet::from_levels(schema, rows).unwrap(), gold)
}

/// Every permutation of `0..k`, by recursion.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Largest share of rows whose group maps to its gold label over all
/// one-to-one mappings.
pub fn brute_force_mapping(groups: &[usize], gold: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|p| groups.iter().zip(gold).filter(|&(&g, &s)| p[g] == s).count())
        .max()
        .unwrap() as f64
        / groups.len() as f64
}

/// McQuitty clustering that recomputes every cluster distance from the
/// merge history instead of keeping an updated table. Ties are resolved
/// with the same draw as the library.
pub fn brute_force_mcquitty(d: &[Vec<u32>], k: usize, seed: u64) -> (Vec<usize>, Vec<f64>) {
    #[derive(Clone)]
    enum Node {
        Leaf(usize),
        Join(usize, Box<Node>, Box<Node>),
    }
    fn formed(n: &Node) -> usize {
        match n {
            Node::Leaf(_) => 0,
            Node::Join(t, _, _) => *t,
        }
    }
    fn dist(p: &Node, q: &Node, d: &[Vec<u32>]) -> f64 {
        match (p, q) {
            (Node::Leaf(i), Node::Leaf(j)) => f64::from(d[*i][*j]),
            _ if formed(p) >= formed(q) => match p {
                Node::Join(_, a, b) => (dist(a, q, d) + dist(b, q, d)) / 2.0,
                Node::Leaf(_) => unreachable!(),
            },
            _ => dist(q, p, d),
        }
    }
    fn members(n: &Node, out: &mut Vec<usize>) {
        match n {
            Node::Leaf(i) => out.push(*i),
            Node::Join(_, a, b) => {
                members(a, out);
                members(b, out);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<Node> = (0..d.len()).map(Node::Leaf).collect();
    let mut criteria = Vec::new();
    let mut time = 1;
    while active.len() > k {
        let m = active.len();
        let mut table = vec![vec![0.0; m]; m];
        let mut best = f64::INFINITY;
        for a in 0..m {
            for b in (a + 1)..m {
                table[a][b] = dist(&active[a], &active[b], d);
                best = best.min(table[a][b]);
            }
        }
        let ties: Vec<(usize, usize)> = (0..m)
            .flat_map(|a| ((a + 1)..m).map(move |b| (a, b)))
            .filter(|&(a, b)| table[a][b] <= best + 1e-12)
            .collect();
        let (a, b) = if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.random_range(0..ties.len())]
        };
        criteria.push(table[a][b]);
        let right = active.remove(b);
        let left = active[a].clone();
        active[a] = Node::Join(time, Box::new(left), Box::new(right));
        time += 1;
    }

    let mut groups: Vec<Vec<usize>> = active
        .iter()
        .map(|n| {
            let mut m = Vec::new();
            members(n, &mut m);
            m.sort_unstable();
            m
        })
        .collect();
    groups.sort();
    let mut labels = vec![0; d.len()];
    for (l, g) in groups.iter().enumerate() {
        for &r in g {
            labels[r] = l;
        }
    }
    (labels, criteria)
}
