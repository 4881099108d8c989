mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use senselearn::cluster::dissimilarity_matrix;
use senselearn::decomposable::{
    adjusted_dof, fit, format_model, parse_model, raw_dof, sequential_select, DecomposableModel, SelectConfig,
};
use senselearn::em::{e_step, param_distance, Imputation};
use senselearn::eval::{best_mapping_accuracy, fold_partition, k_fold_cv, Majority};
use senselearn::{marginal_counts, FeatureSchema, ObservationSet, ParameterSet, SufficientStats};

fn dataset(cards: Vec<usize>, class: Option<usize>) -> impl Strategy<Value = ObservationSet> {
    let row = cards.iter().map(|&c| 0..c).collect::<Vec<_>>();
    prop::collection::vec(row, 1..40).prop_map(move |rows| {
        let names = (0..cards.len()).map(|i| format!("V{i}")).collect();
        let schema = FeatureSchema::new(names, cards.clone(), class).unwrap();
        ObservationSet::from_levels(schema, rows).unwrap()
    })
}

fn labeling(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..20).prop_flat_map(move |n| (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n)))
}

fn all_levels(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &c in cards {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..c).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

proptest! {
    #[test]
    fn projection_matches_direct_counts(data in dataset(vec![2, 3, 2], None)) {
        let full = marginal_counts(&data, &[0, 1, 2]).unwrap();
        for vars in [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]] {
            prop_assert_eq!(full.project(&vars).unwrap(), marginal_counts(&data, &vars).unwrap());
        }
        prop_assert_eq!(full.total(), data.len() as u64);
    }

    #[test]
    fn star_model_equals_naive_bayes(data in dataset(vec![2, 3, 2, 3], Some(3))) {
        let labels = data.labels().unwrap();
        let fvs = data.feature_vectors();
        let nb = SufficientStats::from_assignments(&fvs, &labels, 3, &[2, 3, 2]).unwrap().estimate(0.0).unwrap();
        let star = fit(&DecomposableModel::naive_bayes(4, 3).unwrap(), &data).unwrap();
        for cell in all_levels(&[2, 3, 2, 3]) {
            let p = nb.joint_prob(&cell[..3], cell[3]).unwrap();
            prop_assert!((star.joint.get(&cell) - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn saturated_fit_is_exact(data in dataset(vec![2, 2, 3], None)) {
        let f = fit(&DecomposableModel::saturated(3), &data).unwrap();
        prop_assert!(f.g_squared.abs() < 1e-9);
        let counts = marginal_counts(&data, &[0, 1, 2]).unwrap();
        for cell in all_levels(&[2, 2, 3]) {
            let want = counts.get(&cell) as f64 / data.len() as f64;
            prop_assert!((f.joint.get(&cell) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn g_squared_is_nonnegative(data in dataset(vec![2, 2, 2], None)) {
        for text in ["(A)(B)(C)", "(AB)(C)", "(AB)(BC)", "(AC)(B)"] {
            let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
            let g2 = fit(&parse_model(text, &names).unwrap(), &data).unwrap().g_squared;
            prop_assert!(g2 >= -1e-9);
        }
    }

    #[test]
    fn adjusted_dof_never_exceeds_raw(data in dataset(vec![2, 3, 2], None)) {
        for model in [DecomposableModel::independence(3), DecomposableModel::saturated(3)] {
            prop_assert!(adjusted_dof(&model, &data).unwrap() <= raw_dof(&model, &[2, 3, 2]));
        }
    }

    #[test]
    fn mapping_ignores_group_names((groups, gold) in labeling(4), perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let renamed: Vec<usize> = groups.iter().map(|&g| perm[g]).collect();
        let (a, _) = best_mapping_accuracy(&groups, &gold, 4).unwrap();
        let (b, _) = best_mapping_accuracy(&renamed, &gold, 4).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, common::brute_force_mapping(&groups, &gold, 4));
    }

    #[test]
    fn folds_partition_the_rows(n in 1usize..60, folds in 2usize..12, seed: u64) {
        prop_assume!(folds <= n);
        let parts = fold_partition(n, folds, seed).unwrap();
        prop_assert_eq!(parts.len(), folds);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
        prop_assert_eq!(parts, fold_partition(n, folds, seed).unwrap());
    }

    #[test]
    fn param_distance_is_symmetric(a in prop::collection::vec(0.01f64..1.0, 6), b in prop::collection::vec(0.01f64..1.0, 6)) {
        let make = |v: &[f64]| ParameterSet::from_unnormalized(v[..2].to_vec(), vec![vec![v[2..4].to_vec(), v[4..6].to_vec()]]).unwrap();
        let (p, q) = (make(&a), make(&b));
        prop_assert_eq!(param_distance(&p, &q).unwrap(), param_distance(&q, &p).unwrap());
        prop_assert_eq!(param_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn dissimilarity_is_a_metric(data in dataset(vec![2, 3, 2], None)) {
        let d = dissimilarity_matrix(&data);
        let n = d.size();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                for k in 0..n {
                    prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k));
                }
            }
        }
    }

    #[test]
    fn e_step_is_equivariant_under_relabeling(data in dataset(vec![2, 3, 2], None), init in prop::collection::vec(0usize..3, 40)) {
        let fvs = data.feature_vectors();
        let init = &init[..data.len()];
        let perm = [2, 0, 1];
        let relabeled: Vec<usize> = init.iter().map(|&s| perm[s]).collect();
        let params = |classes: &[usize]| SufficientStats::from_assignments(&fvs, classes, 3, &[2, 3, 2]).unwrap().estimate(0.0).unwrap();
        let (p, q) = (params(init), params(&relabeled));
        let tied = fvs.iter().any(|fv| {
            let post = p.posterior(fv).unwrap();
            let best = post.iter().cloned().fold(0.0, f64::max);
            post.iter().filter(|&&x| (x - best).abs() < 1e-12).count() > 1
        });
        prop_assume!(!tied);
        let a = e_step(&p, &data, Imputation::Hard).unwrap().assignments.unwrap();
        let b = e_step(&q, &data, Imputation::Hard).unwrap().assignments.unwrap();
        prop_assert_eq!(a.iter().map(|&s| perm[s]).collect::<Vec<_>>(), b);
    }

    #[test]
    fn format_parse_round_trip(edges in prop::collection::vec((0usize..4, 0usize..4), 0..6)) {
        let names: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let graph = senselearn::decomposable::ModelGraph::new(4, edges.into_iter().filter(|(a, b)| a != b));
        if let Ok(model) = graph.and_then(DecomposableModel::new) {
            let text = format_model(&model, &names);
            prop_assert_eq!(parse_model(&text, &names).unwrap(), model);
        }
    }
}

#[test]
fn adjusted_dof_on_full_and_sparse_support() {
    let data = common::selection_example();
    // Two of the eight cells are empty, so the full table has six nonzero cells.
    assert_eq!(adjusted_dof(&DecomposableModel::saturated(3), &data).unwrap(), 5);
    assert_eq!(raw_dof(&DecomposableModel::saturated(3), &[2, 2, 2]), 7);

    let schema = FeatureSchema::new(vec!["A".into(), "B".into(), "C".into()], vec![2, 2, 2], None).unwrap();
    let full = ObservationSet::from_levels(schema, (0..8).map(|c| vec![c >> 2 & 1, c >> 1 & 1, c & 1]).collect()).unwrap();
    assert_eq!(adjusted_dof(&DecomposableModel::saturated(3), &full).unwrap(), 7);
    assert_eq!(adjusted_dof(&DecomposableModel::independence(3), &full).unwrap(), 3);
}

#[test]
fn forward_search_keeps_independent_variables_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = common::random_data(&mut rng, &[2, 3, 2], 2000);
    let selection = sequential_select(&data, &SelectConfig::default()).unwrap();
    assert!(selection.selected.graph().num_edges() <= 1, "{:?}", selection.selected);
}

#[test]
fn majority_cross_validation_matches_the_class_share() {
    let schema = FeatureSchema::new(vec!["F".into(), "S".into()], vec![2, 2], Some(1)).unwrap();
    let rows = (0..30).map(|r| vec![r % 2, usize::from(r % 3 == 0)]).collect();
    let data = ObservationSet::from_levels(schema, rows).unwrap();
    let report = k_fold_cv(&data, 10, &Majority, 3).unwrap();
    // Every training portion has 18 of 27 rows in class 0.
    let correct: f64 = report.folds.iter().map(|f| f.accuracy * f.test_size as f64).sum();
    assert_abs_diff_eq!(correct / 30.0, 20.0 / 30.0, epsilon = 1e-12);
}
