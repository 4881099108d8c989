use std::path::Path;

use serde_json::{json, Value};

use senselearn::cluster::{agglomerate, dissimilarity_matrix, Linkage};
use senselearn::decomposable::{
    fit, format_model, naive_mix, sequential_select, strip_to_class, Criterion, Direction,
    DofMode, SelectConfig, Selection,
};
use senselearn::em::{run_em, run_em_from, EmConfig, Imputation};
use senselearn::eval::{
    best_mapping_accuracy, confusion, default_schedule, fold_partition, k_fold_cv,
    learning_curve, majority_baseline, repeated_trials, Agglomerative, Clusterer,
    ConfusionMatrix, Em, Gibbs, Majority, NaiveBayes, NaiveMix, Select, SupervisedLearner,
    Summary,
};
use senselearn::gibbs::{run_gibbs, run_gibbs_from, GibbsConfig};
use senselearn::{ObservationSet, ParameterSet};

use crate::data::{load_dataset, Dataset, Gold};
use crate::report::Report;
use crate::*;

/// Runs one subcommand and writes its report. Returns the rendered report.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let report = match &cli.command {
        Command::Em(a) => em(a)?,
        Command::Gibbs(a) => gibbs(a)?,
        Command::Cluster(a) => cluster(a)?,
        Command::Select(a) => select(a)?,
        Command::NaiveMix(a) => mix(a)?,
        Command::NaiveBayes(a) => naive_bayes(a)?,
        Command::Majority(a) => majority(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Cv(a) => cv(a)?,
        Command::LearningCurve(a) => curve(a)?,
    };
    let args = cli.command.data_args();
    let text = report.render(args.format)?;
    if let Some(path) = &args.output {
        std::fs::write(path, &text).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(text)
}

fn load(args: &DataArgs) -> Result<Dataset, CliError> {
    Ok(load_dataset(
        &args.data,
        args.class_col.as_deref(),
        args.gold_col.as_deref(),
    )?)
}

fn data_echo(args: &DataArgs) -> Value {
    json!({
        "data": args.data.display().to_string(),
        "class_col": args.class_col,
        "gold_col": args.gold_col,
    })
}

fn read_init(path: &Path, n: usize) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let labels = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<usize>().map_err(|_| {
                CliError::Data(DataError::Parse {
                    line: 0,
                    column: i + 1,
                    message: format!("bad initial class {t:?} in {}", path.display()),
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if labels.len() != n {
        return Err(senselearn::Error::LengthMismatch {
            expected: n,
            actual: labels.len(),
        }
        .into());
    }
    Ok(labels)
}

fn params_json(params: &ParameterSet, data: &ObservationSet) -> Value {
    let schema = data.schema();
    let features: Vec<Value> = schema
        .feature_vars()
        .iter()
        .zip(params.conditionals())
        .map(|(&v, table)| {
            json!({
                "feature": schema.name(v),
                "levels": schema.level_names(v),
                "given_class": table,
            })
        })
        .collect();
    json!({ "prior": params.prior(), "conditionals": features })
}

fn summary_json(s: &Summary) -> Value {
    json!({
        "mean": s.mean,
        "std_dev": s.std_dev,
        "count": s.count,
        "std_dev_defined": s.std_dev_defined,
    })
}

fn confusion_json(m: &ConfusionMatrix, gold: &Gold) -> Value {
    json!({
        "senses": gold.level_names,
        "cells": m.cells,
        "actual": m.row_totals(),
        "discovered": m.column_totals(),
    })
}

/// Mapped accuracy and confusion matrix of one grouping, when gold labels
/// are present.
fn score_groups(groups: &[usize], k: usize, gold: Option<&Gold>) -> Result<Value, CliError> {
    let Some(gold) = gold else {
        return Ok(Value::Null);
    };
    if gold.k() != k {
        return Err(CliError::Usage(format!(
            "k = {k} but the gold column has {} labels",
            gold.k()
        )));
    }
    let (accuracy, mapping) = best_mapping_accuracy(groups, &gold.labels, k)?;
    let matrix = confusion(groups, &gold.labels, &mapping, k)?;
    Ok(json!({
        "accuracy": accuracy,
        "mapping": mapping,
        "majority_baseline": majority_baseline(&gold.labels)?,
        "confusion": confusion_json(&matrix, gold),
    }))
}

fn assignment_rows(report: &mut Report, groups: &[usize], gold: Option<&Gold>) {
    for (r, &g) in groups.iter().enumerate() {
        let gold = gold.map_or(String::new(), |gd| gd.level_names[gd.labels[r]].clone());
        report.push_row(vec![(r + 1).to_string(), g.to_string(), gold]);
    }
}

fn em_config(k: usize, seed: u64, o: &EmOptions) -> EmConfig {
    EmConfig {
        epsilon: o.epsilon,
        max_iterations: o.max_iterations,
        imputation: if o.soft { Imputation::Soft } else { Imputation::Hard },
        ..EmConfig::new(k, seed)
    }
}

fn gibbs_config(k: usize, seed: u64, o: &GibbsOptions) -> GibbsConfig {
    GibbsConfig {
        burn_in: o.burn_in,
        monitor: o.monitor,
        increment: o.increment,
        max_total: o.max_total,
        ..GibbsConfig::new(k, seed)
    }
}

fn em(a: &EmArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    let config = em_config(a.k, a.seed, &a.em);
    let result = match &a.init_file {
        Some(path) => run_em_from(&ds.data, &config, &read_init(path, ds.data.len())?)?,
        None => run_em(&ds.data, &config)?,
    };
    let json = json!({
        "method": "EM",
        "config": {
            "input": data_echo(&a.data),
            "k": a.k,
            "seed": a.seed,
            "epsilon": a.em.epsilon,
            "max_iterations": a.em.max_iterations,
            "imputation": if a.em.soft { "SOFT" } else { "HARD" },
            "init_file": a.init_file.as_ref().map(|p| p.display().to_string()),
        },
        "iterations": result.iterations,
        "converged": result.converged,
        "trajectory": result.trajectory,
        "log_likelihoods": result.log_likelihoods,
        "empty_classes": result.empty_classes,
        "assignments": result.assignments,
        "parameters": params_json(&result.params, &ds.data),
        "evaluation": score_groups(&result.assignments, a.k, ds.gold.as_ref())?,
    });
    let mut report = Report::new(json, &["row", "group", "gold"]);
    assignment_rows(&mut report, &result.assignments, ds.gold.as_ref());
    Ok(report)
}

fn gibbs(a: &GibbsArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    let config = gibbs_config(a.k, a.seed, &a.gibbs);
    let result = match &a.init_file {
        Some(path) => run_gibbs_from(&ds.data, &config, &read_init(path, ds.data.len())?)?,
        None => run_gibbs(&ds.data, &config)?,
    };
    let json = json!({
        "method": "GIBBS",
        "config": {
            "input": data_echo(&a.data),
            "k": a.k,
            "seed": a.seed,
            "burn_in": a.gibbs.burn_in,
            "monitor": a.gibbs.monitor,
            "increment": a.gibbs.increment,
            "max_total": a.gibbs.max_total,
            "init_file": a.init_file.as_ref().map(|p| p.display().to_string()),
        },
        "converged": result.converged,
        "iterations": result.iterations,
        "chain_length": result.chains.len(),
        "assignments": result.assignments,
        "parameters": params_json(&result.params, &ds.data),
        "evaluation": score_groups(&result.assignments, a.k, ds.gold.as_ref())?,
    });
    let mut report = Report::new(json, &["row", "group", "gold"]);
    assignment_rows(&mut report, &result.assignments, ds.gold.as_ref());
    Ok(report)
}

fn linkage(l: LinkageArg) -> Linkage {
    match l {
        LinkageArg::Ward => Linkage::Ward,
        LinkageArg::Mcquitty => Linkage::McQuitty,
    }
}

fn cluster(a: &ClusterArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    let result = agglomerate(&dissimilarity_matrix(&ds.data), linkage(a.linkage), a.k, a.seed)?;
    let json = json!({
        "method": match a.linkage { LinkageArg::Ward => "WARD", LinkageArg::Mcquitty => "MCQUITTY" },
        "config": { "input": data_echo(&a.data), "k": a.k, "seed": a.seed },
        "assignments": result.assignments,
        "merges": result.merges,
        "evaluation": score_groups(&result.assignments, a.k, ds.gold.as_ref())?,
    });
    let mut report = Report::new(json, &["row", "group", "gold"]);
    assignment_rows(&mut report, &result.assignments, ds.gold.as_ref());
    Ok(report)
}

fn select_config(o: &SearchOptions) -> SelectConfig {
    SelectConfig {
        direction: match o.direction {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Backward => Direction::Backward,
        },
        criterion: match o.criterion {
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::Bic => Criterion::Bic,
            CriterionArg::Chi2 => Criterion::Chi2,
        },
        alpha: o.alpha,
        dof: match o.dof {
            DofArg::Pairwise => DofMode::Pairwise,
            DofArg::Raw => DofMode::Raw,
            DofArg::Adjusted => DofMode::Adjusted,
        },
    }
}

fn search_echo(data: &DataArgs, o: &SearchOptions) -> Value {
    json!({
        "input": data_echo(data),
        "direction": format!("{:?}", o.direction).to_uppercase(),
        "criterion": format!("{:?}", o.criterion).to_uppercase(),
        "alpha": o.alpha,
        "dof": format!("{:?}", o.dof).to_uppercase(),
    })
}

fn selection_json(sel: &Selection, names: &[String]) -> Value {
    let steps: Vec<Value> = sel
        .steps
        .iter()
        .map(|step| {
            json!({
                "current": format_model(&step.current, names),
                "current_g2": step.current_g2,
                "candidates": step.evaluations.iter().map(|e| json!({
                    "model": format_model(&e.model, names),
                    "g2": e.g2,
                    "delta_g2": e.delta_g2,
                    "delta_dof": e.delta_dof,
                    "score": e.score,
                    "acceptable": e.acceptable,
                })).collect::<Vec<_>>(),
                "chosen": step.chosen.map(|i| format_model(&step.evaluations[i].model, names)),
            })
        })
        .collect();
    json!({
        "steps": steps,
        "sequence": sel.sequence.iter().map(|m| format_model(m, names)).collect::<Vec<_>>(),
        "selected": format_model(&sel.selected, names),
    })
}

fn selection_rows(report: &mut Report, sel: &Selection, names: &[String]) {
    for (i, step) in sel.steps.iter().enumerate() {
        for (j, e) in step.evaluations.iter().enumerate() {
            report.push_row(vec![
                (i + 1).to_string(),
                format_model(&step.current, names),
                format_model(&e.model, names),
                e.g2.to_string(),
                e.delta_g2.to_string(),
                e.delta_dof.to_string(),
                e.score.to_string(),
                e.acceptable.to_string(),
                (step.chosen == Some(j)).to_string(),
            ]);
        }
    }
}

const SELECT_HEADER: [&str; 9] = [
    "step", "current", "candidate", "g2", "delta_g2", "delta_dof", "score", "acceptable", "chosen",
];

fn select(a: &SelectArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    let sel = sequential_select(&ds.data, &select_config(&a.search))?;
    let names = ds.data.schema().names();
    let selected = fit(&sel.selected, &ds.data)?;
    let mut json = json!({
        "method": "SELECT",
        "config": search_echo(&a.data, &a.search),
        "g2": selected.g_squared,
        "raw_dof": selected.raw_dof,
        "adjusted_dof": selected.adjusted_dof,
    });
    merge(&mut json, selection_json(&sel, names));
    let mut report = Report::new(json, &SELECT_HEADER);
    selection_rows(&mut report, &sel, names);
    Ok(report)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn require_labels(ds: &Dataset, command: &str) -> Result<(), CliError> {
    if ds.data.schema().class_index().is_none() {
        return Err(CliError::Usage(format!("{command} needs --class-col")));
    }
    ds.data.labels()?;
    Ok(())
}

fn training_accuracy(learner: &dyn SupervisedLearner, data: &ObservationSet) -> Result<f64, CliError> {
    let predicted = learner.fit_predict(data, data)?;
    let gold = data.labels()?;
    let hits = predicted.iter().zip(&gold).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / gold.len() as f64)
}

fn mix(a: &SelectArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    require_labels(&ds, "naive-mix")?;
    let config = select_config(&a.search);
    let sel = sequential_select(&ds.data, &config)?;
    let names = ds.data.schema().names();
    let class_var = ds.data.schema().class_index().expect("checked above");
    let cards = ds.data.schema().cardinalities();
    let mixed = sel
        .sequence
        .iter()
        .map(|m| Ok(format_model(&strip_to_class(m, class_var, cards)?.0, names)))
        .collect::<Result<Vec<_>, CliError>>()?;
    // fails early on event spaces too large to tabulate
    naive_mix(&sel.sequence, &ds.data)?;
    let mut json = json!({
        "method": "NAIVE_MIX",
        "config": search_echo(&a.data, &a.search),
        "mixed_models": mixed,
        "training_accuracy": training_accuracy(&NaiveMix { config }, &ds.data)?,
    });
    merge(&mut json, selection_json(&sel, names));
    let mut report = Report::new(json, &SELECT_HEADER);
    selection_rows(&mut report, &sel, names);
    Ok(report)
}

fn naive_bayes(a: &NaiveBayesArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    require_labels(&ds, "naive-bayes")?;
    let learner = NaiveBayes {
        smoothing: a.smoothing,
    };
    let params = learner.train(&ds.data)?;
    let predicted = learner.fit_predict(&ds.data, &ds.data)?;
    let gold = ds.data.labels()?;
    let hits = predicted.iter().zip(&gold).filter(|(p, g)| p == g).count();
    let class_var = ds.data.schema().class_index().expect("checked above");
    let class_names = ds.data.schema().level_names(class_var);
    let json = json!({
        "method": "NAIVE_BAYES",
        "config": { "input": data_echo(&a.data), "smoothing": a.smoothing },
        "classes": class_names,
        "parameters": params_json(&params, &ds.data),
        "training_accuracy": hits as f64 / gold.len() as f64,
    });
    let mut report = Report::new(json, &["row", "predicted", "actual"]);
    for (r, (p, g)) in predicted.iter().zip(&gold).enumerate() {
        report.push_row(vec![
            (r + 1).to_string(),
            class_names[*p].clone(),
            class_names[*g].clone(),
        ]);
    }
    Ok(report)
}

fn majority(a: &DataArgs) -> Result<Report, CliError> {
    let ds = load(a)?;
    let (labels, names) = match (&ds.gold, ds.data.schema().class_index()) {
        (Some(g), _) => (g.labels.clone(), g.level_names.clone()),
        (None, Some(c)) => (ds.data.labels()?, ds.data.schema().level_names(c).to_vec()),
        (None, None) => return Err(CliError::Usage("majority needs --class-col or --gold-col".into())),
    };
    let share = majority_baseline(&labels)?;
    let mut counts = vec![0usize; names.len()];
    for &l in &labels {
        counts[l] += 1;
    }
    let top = (0..counts.len())
        .max_by(|&x, &y| counts[x].cmp(&counts[y]).then(y.cmp(&x)))
        .expect("labels are non-empty");
    let json = json!({
        "method": "MAJORITY",
        "config": { "input": data_echo(a) },
        "majority_label": names[top],
        "counts": names.iter().zip(&counts).map(|(n, c)| json!({"label": n, "count": c})).collect::<Vec<_>>(),
        "accuracy": share,
    });
    let mut report = Report::new(json, &["majority_label", "accuracy"]);
    report.push_row(vec![names[top].clone(), share.to_string()]);
    Ok(report)
}

fn evaluate(a: &EvaluateArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    let gold = ds
        .gold
        .as_ref()
        .ok_or_else(|| CliError::Usage("evaluate needs --gold-col".into()))?;
    let k = a.k.unwrap_or(gold.k());
    let em = Em {
        epsilon: a.em.epsilon,
        max_iterations: a.em.max_iterations,
        imputation: if a.em.soft { Imputation::Soft } else { Imputation::Hard },
    };
    let gibbs = Gibbs {
        template: gibbs_config(k, a.seed, &a.gibbs),
    };
    let learner: &dyn Clusterer = match a.method {
        UnsupervisedMethod::Em => &em,
        UnsupervisedMethod::Gibbs => &gibbs,
        UnsupervisedMethod::Ward => &Agglomerative {
            linkage: Linkage::Ward,
        },
        UnsupervisedMethod::Mcquitty => &Agglomerative {
            linkage: Linkage::McQuitty,
        },
    };
    let result = repeated_trials(&ds.data, &gold.labels, k, learner, a.trials, a.seed)?;
    let best = result
        .trials
        .iter()
        .fold(None::<&senselearn::eval::TrialResult>, |b, t| match b {
            Some(b) if b.accuracy >= t.accuracy => Some(b),
            _ => Some(t),
        })
        .expect("at least one trial");
    let matrix = confusion(&best.assignments, &gold.labels, &best.mapping, k)?;
    let mut config = json!({
        "input": data_echo(&a.data),
        "k": k,
        "trials": a.trials,
        "seed": a.seed,
    });
    match a.method {
        UnsupervisedMethod::Em => merge(
            &mut config,
            json!({ "epsilon": a.em.epsilon, "max_iterations": a.em.max_iterations, "soft": a.em.soft }),
        ),
        UnsupervisedMethod::Gibbs => merge(
            &mut config,
            json!({
                "burn_in": a.gibbs.burn_in,
                "monitor": a.gibbs.monitor,
                "increment": a.gibbs.increment,
                "max_total": a.gibbs.max_total,
            }),
        ),
        _ => {}
    }
    let json = json!({
        "method": learner.name(),
        "config": config,
        "trials": result.trials.iter().map(|t| json!({
            "seed": t.seed,
            "accuracy": t.accuracy,
            "mapping": t.mapping,
        })).collect::<Vec<_>>(),
        "summary": summary_json(&result.summary),
        "majority_baseline": majority_baseline(&gold.labels)?,
        "best_trial": { "seed": best.seed, "accuracy": best.accuracy, "confusion": confusion_json(&matrix, gold) },
    });
    let mut report = Report::new(json, &["trial", "seed", "accuracy"]);
    for (i, t) in result.trials.iter().enumerate() {
        report.push_row(vec![(i + 1).to_string(), t.seed.to_string(), t.accuracy.to_string()]);
    }
    Ok(report)
}

fn supervised(a: &CvArgs) -> Box<dyn SupervisedLearner> {
    let config = select_config(&a.search);
    match a.method {
        SupervisedMethod::NaiveBayes => Box::new(NaiveBayes {
            smoothing: a.smoothing,
        }),
        SupervisedMethod::Majority => Box::new(Majority),
        SupervisedMethod::Select => Box::new(Select { config }),
        SupervisedMethod::NaiveMix => Box::new(NaiveMix { config }),
    }
}

fn cv_echo(a: &CvArgs) -> Value {
    let mut echo = json!({ "folds": a.folds, "seed": a.seed });
    match a.method {
        SupervisedMethod::NaiveBayes => merge(&mut echo, json!({ "smoothing": a.smoothing })),
        SupervisedMethod::Select | SupervisedMethod::NaiveMix => {
            merge(&mut echo, search_echo(&a.data, &a.search))
        }
        SupervisedMethod::Majority => {}
    }
    merge(&mut echo, json!({ "input": data_echo(&a.data) }));
    echo
}

fn cv(a: &CvArgs) -> Result<Report, CliError> {
    let ds = load(&a.data)?;
    require_labels(&ds, "cv")?;
    let learner = supervised(a);
    let result = k_fold_cv(&ds.data, a.folds, learner.as_ref(), a.seed)?;
    let json = json!({
        "method": learner.name(),
        "config": cv_echo(a),
        "folds": result.folds,
        "summary": summary_json(&result.summary),
    });
    let mut report = Report::new(json, &["fold", "train_size", "test_size", "accuracy"]);
    for f in &result.folds {
        report.push_row(vec![
            (f.fold + 1).to_string(),
            f.train_size.to_string(),
            f.test_size.to_string(),
            f.accuracy.to_string(),
        ]);
    }
    Ok(report)
}

fn curve(a: &LearningCurveArgs) -> Result<Report, CliError> {
    let ds = load(&a.cv.data)?;
    require_labels(&ds, "learning-curve")?;
    let learner = supervised(&a.cv);
    let sizes = match &a.sizes {
        Some(s) => s.clone(),
        None => {
            let parts = fold_partition(ds.data.len(), a.cv.folds, a.cv.seed)?;
            let available = ds.data.len() - parts.iter().map(Vec::len).max().unwrap_or(0);
            default_schedule(available)
        }
    };
    let points = learning_curve(&ds.data, &sizes, learner.as_ref(), a.cv.folds, a.cv.seed)?;
    let mut config = cv_echo(&a.cv);
    merge(&mut config, json!({ "sizes": sizes }));
    let json = json!({
        "method": learner.name(),
        "config": config,
        "points": points.iter().map(|p| json!({
            "size": p.size,
            "fold_accuracies": p.folds.iter().map(|f| f.accuracy).collect::<Vec<_>>(),
            "summary": summary_json(&p.summary),
        })).collect::<Vec<_>>(),
    });
    let mut report = Report::new(json, &["size", "fold", "accuracy"]);
    for p in &points {
        for f in &p.folds {
            report.push_row(vec![p.size.to_string(), (f.fold + 1).to_string(), f.accuracy.to_string()]);
        }
    }
    Ok(report)
}
