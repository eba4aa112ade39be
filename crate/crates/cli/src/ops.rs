//! Subcommand implementations.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use flowsentry_core::harness::{
    compare_runs, cross_validate, cv_eval_run, dataset_malware, default_config, default_grid,
    fit_model, grid_search, infer_dataset_name, read_runs_csv, render_report,
    write_deltas_csv, write_runs_csv, DeltaRow, EvalRun, ModelConfig, ModelKind, Phase,
    TrainedModel,
};
use flowsentry_core::metrics::{confusion_named, macro_metrics, MetricReport};
use flowsentry_core::preprocess::{
    prepare_capture, split_flows, vectorize, FeatureSchema, Scenario,
};
use flowsentry_core::{
    carve_subsets, drl, parse_conn_log_file, summarize_capture, write_conn_log, FlowRecord,
    SplitSpec,
};

use crate::run_config::{required_model, required_path, resolve, resolve_seed, RunConfig};
use crate::{Cli, Command, Failure};

/// Everything needed to re-derive the evaluation split and score it later.
#[derive(Serialize, Deserialize)]
pub struct ModelBundle {
    pub kind: ModelKind,
    pub scenario: Scenario,
    pub dataset: String,
    pub seed: u64,
    pub split: SplitSpec,
    pub config: ModelConfig,
    pub class_names: Vec<String>,
    pub schema: FeatureSchema,
    pub model: TrainedModel,
}

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Summarize { log, name } => summarize(log, name, &config),
        Command::Preprocess {
            log,
            out,
            scenario,
            eval_fraction,
        } => preprocess(log, out, scenario, eval_fraction, cli.seed, &config),
        Command::Carve { log, out } => carve(log, out, cli.seed, &config),
        Command::Train {
            model,
            data,
            out,
            scenario,
            name,
            eval_fraction,
        } => train(model, data, out, scenario, name, eval_fraction, cli.seed, &config),
        Command::Crossval {
            model,
            data,
            scenario,
            name,
            runs,
            eval_fraction,
        } => crossval(model, data, scenario, name, runs, eval_fraction, cli.seed, &config),
        Command::Gridsearch {
            model,
            data,
            scenario,
            out,
            eval_fraction,
        } => gridsearch(model, data, scenario, out, eval_fraction, cli.seed, &config),
        Command::DrlTrain {
            data,
            out,
            scenario,
            name,
            eval_fraction,
        } => train(
            Some("drl".to_string()),
            data,
            out,
            scenario,
            name,
            eval_fraction,
            cli.seed,
            &config,
        ),
        Command::Evaluate {
            model_file,
            data,
            runs,
        } => evaluate(model_file, data, runs, &config),
        Command::Report { runs, out } => report(runs, out, &config),
        Command::Compare { runs, out } => compare(runs, out, &config),
    }
}

fn load_capture(path: &Path) -> Result<Vec<FlowRecord>, Failure> {
    Ok(parse_conn_log_file(path)?)
}

fn dataset_name(explicit: Option<String>, config: &RunConfig, path: &Path) -> String {
    explicit
        .or_else(|| config.name.clone())
        .or_else(|| infer_dataset_name(&path.to_string_lossy()))
        .unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| "capture".to_string(), |s| s.to_string_lossy().into_owned())
        })
}

fn parse_model(model: Option<String>, config: &RunConfig) -> Result<ModelKind, Failure> {
    required_model(model, config)?
        .parse::<ModelKind>()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn check_supports(kind: ModelKind, scenario: Scenario) -> Result<(), Failure> {
    if !kind.supports(scenario) {
        return Err(Failure::usage(format!(
            "{} only supports the binary scenario",
            kind.name()
        )));
    }
    Ok(())
}

fn model_config_for(kind: ModelKind, config: &RunConfig) -> Result<ModelConfig, Failure> {
    match &config.model_config {
        Some(mc) => Ok(mc.clone()),
        None => Ok(default_config(kind)),
    }
}

fn summarize(log: Option<PathBuf>, name: Option<String>, config: &RunConfig) -> Result<(), Failure> {
    let path = required_path(log, config.capture.as_ref(), "capture path")?;
    let records = load_capture(&path)?;
    let summary = summarize_capture(&records)?;
    let dataset = dataset_name(name, config, &path);
    match dataset_malware(&dataset) {
        Some(malware) => println!("dataset: {dataset} ({malware})"),
        None => println!("dataset: {dataset}"),
    }
    println!("total samples: {}", summary.total_samples);
    let mut classes: Vec<(&String, &usize)> = summary.per_class.iter().collect();
    classes.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let width = classes.iter().map(|(c, _)| c.len()).max().unwrap_or(0);
    for (class, count) in classes {
        println!("  {class:<width$}  {count}");
    }
    Ok(())
}

fn preprocess(
    log: Option<PathBuf>,
    out: Option<PathBuf>,
    scenario: Option<String>,
    eval_fraction: Option<f64>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let path = required_path(log, config.capture.as_ref(), "capture path")?;
    let out = required_path(out, config.out.as_ref(), "--out directory")?;
    let resolved = resolve(seed, scenario.as_deref(), eval_fraction, config)?;
    let records = load_capture(&path)?;
    let (train, eval) = prepare_capture(&records, resolved.scenario, &resolved.split)?;
    fs::create_dir_all(&out)?;
    train.write_csv(fs::File::create(out.join("train.csv"))?)?;
    eval.write_csv(fs::File::create(out.join("eval.csv"))?)?;
    fs::write(
        out.join("schema.json"),
        serde_json::to_string_pretty(&train.schema)?,
    )?;
    println!(
        "encoded {} train rows and {} eval rows ({} features) into {}",
        train.n_rows(),
        eval.n_rows(),
        train.nf(),
        out.display()
    );
    Ok(())
}

fn carve(
    log: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let path = required_path(log, config.capture.as_ref(), "capture path")?;
    let out = required_path(out, config.out.as_ref(), "--out directory")?;
    let seed = resolve_seed(seed, config);
    let records = load_capture(&path)?;
    let subsets = carve_subsets(&records, seed)?;
    fs::create_dir_all(&out)?;
    for (name, flows) in subsets {
        let file = out.join(format!("{name}.conn.log.labeled"));
        fs::write(&file, write_conn_log(&flows))?;
        println!("wrote {} ({} flows)", file.display(), flows.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    model: Option<String>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    scenario: Option<String>,
    name: Option<String>,
    eval_fraction: Option<f64>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let kind = parse_model(model, config)?;
    let path = required_path(data, config.capture.as_ref(), "--data capture")?;
    let out = required_path(out, config.out.as_ref(), "--out directory")?;
    let resolved = resolve(seed, scenario.as_deref(), eval_fraction, config)?;
    check_supports(kind, resolved.scenario)?;
    let model_config = model_config_for(kind, config)?;
    let dataset = dataset_name(name, config, &path);

    let records = load_capture(&path)?;
    let (train_set, _) = prepare_capture(&records, resolved.scenario, &resolved.split)?;
    let started = Instant::now();
    let trained = match (kind, &model_config) {
        // keep the episode log when training the agent
        (ModelKind::Drl, ModelConfig::Drl(agent_config)) => {
            let outcome =
                drl::train_agent(&train_set, resolved.scenario, agent_config, resolved.seed)?;
            fs::create_dir_all(&out)?;
            let episodes = out.join("episodes.csv");
            drl::write_episode_log(&outcome.episodes, fs::File::create(&episodes)?)?;
            println!(
                "episode log: {} ({} episodes, converged: {})",
                episodes.display(),
                outcome.episodes.len(),
                outcome.converged
            );
            if !outcome.converged {
                eprintln!("warning: loss did not stabilize; saved the best-loss network");
            }
            TrainedModel::Drl(outcome.network)
        }
        _ => fit_model(kind, &model_config, &train_set, resolved.scenario, resolved.seed)?,
    };
    let elapsed = started.elapsed().as_secs_f64();

    let train_pred = trained.predict(&train_set.features)?;
    let truth = train_set.targets(resolved.scenario);
    let correct = train_pred.iter().zip(&truth).filter(|(p, t)| p == t).count();

    fs::create_dir_all(&out)?;
    let bundle = ModelBundle {
        kind,
        scenario: resolved.scenario,
        dataset,
        seed: resolved.seed,
        split: resolved.split,
        config: model_config,
        class_names: train_set.class_names.clone(),
        schema: train_set.schema.clone(),
        model: trained,
    };
    let model_path = out.join("model.json");
    fs::write(&model_path, serde_json::to_string(&bundle)?)?;
    println!(
        "trained {} on {} rows in {elapsed:.2}s (train accuracy {:.4})",
        kind.name(),
        train_set.n_rows(),
        correct as f64 / truth.len() as f64
    );
    println!("model: {}", model_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn crossval(
    model: Option<String>,
    data: Option<PathBuf>,
    scenario: Option<String>,
    name: Option<String>,
    runs: Option<PathBuf>,
    eval_fraction: Option<f64>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let kind = parse_model(model, config)?;
    if !kind.has_cross_validation() {
        return Err(Failure::usage(format!(
            "{} does not take part in cross-validation",
            kind.name()
        )));
    }
    let path = required_path(data, config.capture.as_ref(), "--data capture")?;
    let resolved = resolve(seed, scenario.as_deref(), eval_fraction, config)?;
    check_supports(kind, resolved.scenario)?;
    let model_config = model_config_for(kind, config)?;
    let dataset = dataset_name(name, config, &path);
    let records = load_capture(&path)?;
    let (train_set, _) = prepare_capture(&records, resolved.scenario, &resolved.split)?;

    let started = Instant::now();
    let outcome = cross_validate(kind, &model_config, &train_set, resolved.scenario, 5, resolved.seed)?;
    let elapsed = started.elapsed().as_secs_f64();
    for (i, (sel, comp)) in outcome
        .fold_scores
        .iter()
        .zip(&outcome.fold_comparable)
        .enumerate()
    {
        println!("fold {i}: macro-F1 {:.4}  score {comp:.2}", sel);
    }
    println!(
        "mean macro-F1 {:.4}  mean score {:.2}  ({elapsed:.2}s)",
        outcome.mean_score, outcome.mean_comparable
    );
    if let Some(runs_path) = runs.or_else(|| config.runs.clone()) {
        let run = cv_eval_run(kind, &model_config, &outcome, &dataset, resolved.scenario, elapsed);
        append_run(&runs_path, run)?;
        println!("appended cv run to {}", runs_path.display());
    }
    Ok(())
}

fn gridsearch(
    model: Option<String>,
    data: Option<PathBuf>,
    scenario: Option<String>,
    out: Option<PathBuf>,
    eval_fraction: Option<f64>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let kind = parse_model(model, config)?;
    if !kind.has_cross_validation() {
        return Err(Failure::usage(format!(
            "{} is tuned manually; grid search does not apply",
            kind.name()
        )));
    }
    let path = required_path(data, config.capture.as_ref(), "--data capture")?;
    let resolved = resolve(seed, scenario.as_deref(), eval_fraction, config)?;
    check_supports(kind, resolved.scenario)?;
    let records = load_capture(&path)?;
    let (train_set, _) = prepare_capture(&records, resolved.scenario, &resolved.split)?;
    let grid = match &config.grid {
        Some(grid) => grid.clone(),
        None => default_grid(kind, &train_set),
    };
    println!("searching {} candidate configuration(s)", grid.len());
    let outcome = grid_search(kind, &grid, &train_set, resolved.scenario, 5, resolved.seed)?;
    for (candidate, score) in &outcome.tried {
        match score {
            Some(s) => println!("{:.4}  {}", s, candidate.to_json()),
            None => println!("failed  {}", candidate.to_json()),
        }
    }
    println!("best (macro-F1 {:.4}): {}", outcome.best_score, outcome.best.to_json());
    if let Some(out) = out.or_else(|| config.out.clone()) {
        fs::create_dir_all(&out)?;
        let best_path = out.join("best_config.json");
        let mut file = fs::File::create(&best_path)?;
        writeln!(file, "{}", serde_json::to_string_pretty(&outcome.best)?)?;
        println!("best config: {}", best_path.display());
    }
    Ok(())
}

fn evaluate(
    model_file: Option<PathBuf>,
    data: Option<PathBuf>,
    runs: Option<PathBuf>,
    config: &RunConfig,
) -> Result<(), Failure> {
    let model_path =
        model_file.ok_or_else(|| Failure::usage("missing model file (positional argument)"))?;
    let path = required_path(data, config.capture.as_ref(), "--data capture")?;
    let bundle: ModelBundle = serde_json::from_str(&fs::read_to_string(&model_path)?)?;
    let records = load_capture(&path)?;
    let (_, eval_flows) = split_flows(&records, bundle.scenario, &bundle.split)?;
    let eval_set = vectorize(&eval_flows, &bundle.schema, &bundle.class_names)?;

    let started = Instant::now();
    let pred = bundle.model.predict(&eval_set.features)?;
    let elapsed = started.elapsed().as_secs_f64();
    let truth = eval_set.targets(bundle.scenario);
    let class_names = eval_set.scenario_class_names(bundle.scenario);
    let cm = confusion_named(&truth, &pred, &class_names)?;
    let report = macro_metrics(&cm)?;
    let score = match bundle.scenario {
        Scenario::Binary => report.f1[1] * 100.0,
        Scenario::Multiclass => flowsentry_core::macro_f1_present(&cm)? * 100.0,
    };

    println!(
        "{} on {} ({}, eval split of {} rows)",
        bundle.kind.name(),
        bundle.dataset,
        bundle.scenario,
        eval_set.n_rows()
    );
    print_report(&report);
    println!("score: {score:.2}");

    if let Some(runs_path) = runs.or_else(|| config.runs.clone()) {
        let run = EvalRun {
            model: bundle.kind.name().to_string(),
            dataset: bundle.dataset.clone(),
            scenario: bundle.scenario,
            phase: Phase::Eval,
            score,
            accuracy: report.accuracy,
            macro_precision: report.macro_precision,
            macro_recall: report.macro_recall,
            macro_fpr: report.macro_fpr,
            macro_f1: report.macro_f1,
            wall_time_s: elapsed,
            config: bundle.config.to_json(),
        };
        append_run(&runs_path, run)?;
        println!("appended eval run to {}", runs_path.display());
    }
    Ok(())
}

fn print_report(report: &MetricReport) {
    let width = report
        .class_names
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(5);
    println!("accuracy: {:.4}", report.accuracy);
    println!("  {:<width$}  precision  recall   fpr      f1", "class");
    for (i, class) in report.class_names.iter().enumerate() {
        println!(
            "  {class:<width$}  {:<9.4}  {:<7.4}  {:<7.4}  {:.4}",
            report.precision[i], report.recall[i], report.fpr[i], report.f1[i]
        );
    }
    println!(
        "  {:<width$}  {:<9.4}  {:<7.4}  {:<7.4}  {:.4}",
        "macro", report.macro_precision, report.macro_recall, report.macro_fpr, report.macro_f1
    );
}

fn append_run(path: &Path, run: EvalRun) -> Result<(), Failure> {
    let mut all = if path.exists() {
        read_runs_csv(fs::File::open(path)?)?
    } else {
        Vec::new()
    };
    all.push(run);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_runs_csv(&all, fs::File::create(path)?)?;
    Ok(())
}

fn load_runs(runs: Option<PathBuf>, config: &RunConfig) -> Result<Vec<EvalRun>, Failure> {
    let path = required_path(runs, config.runs.as_ref(), "--runs file")?;
    Ok(read_runs_csv(fs::File::open(&path)?)?)
}

fn report(runs: Option<PathBuf>, out: Option<PathBuf>, config: &RunConfig) -> Result<(), Failure> {
    let out_dir = required_path(out, config.out.as_ref(), "--out directory")?;
    let runs = load_runs(runs, config)?;
    if runs.is_empty() {
        return Err(Failure::data("runs file contains no rows"));
    }
    let deltas = compare_runs(&runs);
    for path in render_report(&runs, &deltas, &out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn compare(runs: Option<PathBuf>, out: Option<PathBuf>, config: &RunConfig) -> Result<(), Failure> {
    let runs = load_runs(runs, config)?;
    let deltas = compare_runs(&runs);
    let produced: Vec<&DeltaRow> = deltas.iter().filter(|d| d.produced.is_some()).collect();
    println!("{:<10} {:<5} {:<9} {:<10} {:>8} {:>9} {:>7}", "scenario", "phase", "model", "dataset", "produced", "reference", "delta");
    for d in &produced {
        println!(
            "{:<10} {:<5} {:<9} {:<10} {:>8.2} {:>9.2} {:>+7.2}",
            d.scenario.to_string(),
            d.phase.to_string(),
            d.model,
            d.dataset,
            d.produced.unwrap(),
            d.reference,
            d.delta.unwrap()
        );
    }
    let flagged: Vec<&DeltaRow> = deltas.iter().filter(|d| d.produced.is_none()).collect();
    if !flagged.is_empty() {
        println!("\nflagged: {} reference cell(s) with no produced run", flagged.len());
        for d in &flagged {
            println!(
                "  {}/{} {} {} (reference {:.2})",
                d.scenario, d.phase, d.model, d.dataset, d.reference
            );
        }
    }
    if let Some(out) = out.or_else(|| config.out.clone()) {
        fs::create_dir_all(&out)?;
        let path = out.join("deltas.csv");
        write_deltas_csv(&deltas, fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
