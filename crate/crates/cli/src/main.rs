mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use monotree::boosting::{
    deserialize_model, serialize_model, train_with_eval, DataSplit, Metric,
};
use monotree::dataset::{bin_features, load_csv, load_schema_override, CsvOptions, FeatureSchema, ADULT_LABEL};
use monotree::experiments::{
    self, figure_report, penalty_table, run_figure_example, run_gamma_sweep, run_mc_benchmark,
    run_time_benchmark, sweep_csv, timing_csv, BenchmarkSpec, SweepSpec, TimingSpec,
};
use monotree::{BinnedDataset, ConstraintMode, Error, Execution, Result};

use config::{Flags, Settings};

#[derive(Parser, Debug)]
#[command(name = "monotree", version, about = "Monotone-constrained gradient boosting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One-hot encode the raw Adult files into a prepared CSV and schema
    PrepAdult,
    /// Train one model
    Train,
    /// Score a model on a dataset
    Evaluate,
    /// Monte-Carlo comparison of methods
    McBenchmark,
    /// Relative train loss of penalised vs unpenalised monotone splits
    GammaSweep,
    /// Time one boosting iteration per method and sample size
    TimeBenchmark,
    /// Print the monotone split penalty for several gammas and depths
    PenaltyTable,
    /// Write the first trees of a model as DOT files
    ExportTrees,
    /// Four-cluster example comparing the methods on one fixed tree
    FigureExample,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, &cli.flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Parameter(_)) {
                eprintln!();
                let _ = Cli::command().print_help();
            }
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, flags: &Flags) -> Result<()> {
    let settings = Settings::resolve(flags)?;
    match command {
        Command::PrepAdult => prep_adult(&settings),
        Command::Train => train(&settings),
        Command::Evaluate => evaluate(&settings),
        Command::McBenchmark => mc_benchmark(&settings),
        Command::GammaSweep => gamma_sweep(&settings),
        Command::TimeBenchmark => time_benchmark(&settings),
        Command::PenaltyTable => {
            let gammas = settings
                .gammas
                .clone()
                .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0]);
            let max_depth = settings.shape.max_depth.unwrap_or(10);
            let table = penalty_table(&gammas, max_depth)?;
            print!("{table}");
            if let Some(out) = &settings.out {
                write(out, "penalty_table.csv", &table)?;
            }
            Ok(())
        }
        Command::ExportTrees => export_trees(&settings),
        Command::FigureExample => {
            let outcomes = run_figure_example()?;
            let report = figure_report(&outcomes);
            print!("{report}");
            if let Some(out) = &settings.out {
                write(out, "figure_example.csv", &report)?;
                for o in &outcomes {
                    let names = ["x".to_string(), "y".to_string()];
                    let dot = o.tree.export_dot(Some(&names), None);
                    write(out, &format!("figure_{}.dot", o.mode), &dot)?;
                }
            }
            Ok(())
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn data_path(s: &Settings) -> PathBuf {
    s.data.clone().unwrap_or_else(|| PathBuf::from("data"))
}

fn require_out(s: &Settings) -> Result<PathBuf> {
    s.out
        .clone()
        .ok_or_else(|| Error::Parameter("--out is required for this command".into()))
}

/// A directory is read as raw Adult files; a file as a prepared CSV with
/// its schema (given, `<file>.schema.json`, or inferred).
fn load_dataset(s: &Settings) -> Result<(BinnedDataset, FeatureSchema)> {
    let path = data_path(s);
    let max_bins = s.booster.max_bins;
    if path.is_dir() {
        let (table, schema) = experiments::prepare_adult(&[path.join("adult.data"), path.join("adult.test")])?;
        return Ok((bin_features(&table, &schema, max_bins)?, schema));
    }
    let table = load_csv(&path, &CsvOptions::default())?;
    let schema_path = s
        .schema
        .clone()
        .or_else(|| Some(path.with_extension("schema.json")).filter(|p| p.exists()));
    let schema = match schema_path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            match serde_json::from_str::<FeatureSchema>(&text) {
                Ok(schema) => schema,
                Err(_) => FeatureSchema::infer(&table, ADULT_LABEL, &load_schema_override(&p)?)?,
            }
        }
        None => FeatureSchema::infer(&table, ADULT_LABEL, &Default::default())?,
    };
    Ok((bin_features(&table, &schema, max_bins)?, schema))
}

fn prep_adult(s: &Settings) -> Result<()> {
    let dir = data_path(s);
    let out = require_out(s)?;
    let (table, schema) = experiments::prepare_adult(&[dir.join("adult.data"), dir.join("adult.test")])?;
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let csv = out.join("adult_prepared.csv");
    let file = fs::File::create(&csv).map_err(|e| io_err(&csv, e))?;
    table.write_csv(std::io::BufWriter::new(file))?;
    let schema_text = serde_json::to_string_pretty(&schema).map_err(|e| Error::Model(e.to_string()))?;
    write(&out, "adult_prepared.schema.json", &schema_text)?;
    println!(
        "{} rows, {} features -> {}",
        table.row_count(),
        schema.features.len(),
        csv.display()
    );
    Ok(())
}

fn train(s: &Settings) -> Result<()> {
    let (data, schema) = load_dataset(s)?;
    let metrics = Metric::defaults(s.booster.objective);
    let (model, table) = train_with_eval(&data, &s.booster, None, &metrics)?;
    let model = model.with_schema(schema);
    let model_path = match (&s.model, &s.out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => out.join("model.json"),
        (None, None) => return Err(Error::Parameter("train needs --model or --out".into())),
    };
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(&model_path, serialize_model(&model)?).map_err(|e| io_err(&model_path, e))?;
    if let Some(out) = &s.out {
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        write(out, "metrics.csv", &String::from_utf8_lossy(&buf))?;
    }
    let last = s.booster.iterations;
    for m in metrics {
        if let Some(v) = table.get(last, m, DataSplit::Train) {
            println!("train {m} @ {last}: {v:.6}");
        }
    }
    println!("model -> {}", model_path.display());
    Ok(())
}

fn read_model(s: &Settings) -> Result<monotree::BoosterModel> {
    let path = s
        .model
        .clone()
        .ok_or_else(|| Error::Parameter("--model is required for this command".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    deserialize_model(&text)
}

fn evaluate(s: &Settings) -> Result<()> {
    let model = read_model(s)?;
    let path = data_path(s);
    let table = if path.is_dir() {
        experiments::prepare_adult(&[path.join("adult.data"), path.join("adult.test")])?.0
    } else {
        load_csv(&path, &CsvOptions::default())?
    };
    let scores = model.predict(&table)?;
    let label = model
        .schema
        .as_ref()
        .map_or(ADULT_LABEL.to_string(), |sc| sc.label.clone());
    if let Some(labels) = table.column(&label) {
        let labels: Vec<f64> = labels.iter().filter_map(|c| c.as_number()).collect();
        if labels.len() == scores.len() {
            let margins: Vec<f64> = match model.objective {
                monotree::ObjectiveKind::BinaryLogloss => {
                    scores.iter().map(|p| (p / (1.0 - p)).ln()).collect()
                }
                monotree::ObjectiveKind::L2 => scores.clone(),
            };
            for m in Metric::defaults(model.objective) {
                println!("{m}: {:.6}", m.evaluate(model.objective, &margins, &labels)?);
            }
        }
    }
    if let Some(out) = &s.out {
        let mut text = String::from("row,score\n");
        for (i, v) in scores.iter().enumerate() {
            text.push_str(&format!("{i},{v}\n"));
        }
        write(out, "predictions.csv", &text)?;
    }
    Ok(())
}

fn mc_benchmark(s: &Settings) -> Result<()> {
    let out = require_out(s)?;
    let (data, _) = load_dataset(s)?;
    let spec = BenchmarkSpec {
        base: s.booster.clone(),
        methods: s.methods.clone().unwrap_or_else(|| ConstraintMode::ALL.to_vec()),
        gammas: s.gammas.clone().unwrap_or_else(|| vec![0.0]),
        trials: s.trials.unwrap_or(5),
        execution: if s.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..BenchmarkSpec::default()
    };
    let result = run_mc_benchmark(&data, &spec)?;
    let mut trials = Vec::new();
    result.write_trials_csv(&mut trials)?;
    write(&out, "mc_trials.csv", &String::from_utf8_lossy(&trials))?;
    let path = write(&out, "mc_averaged.csv", &result.averaged_csv())?;
    println!("{} runs -> {}", result.runs.len(), path.display());
    Ok(())
}

fn gamma_sweep(s: &Settings) -> Result<()> {
    let out = require_out(s)?;
    let (data, _) = load_dataset(s)?;
    let defaults = SweepSpec::default();
    let spec = SweepSpec {
        base: s.booster.clone(),
        method: s.methods.as_ref().and_then(|m| m.first().copied()).unwrap_or(ConstraintMode::Fast),
        gammas: s.gammas.clone().unwrap_or(defaults.gammas),
        checkpoints: s.checkpoints.clone().unwrap_or(defaults.checkpoints),
        trials: s.trials.unwrap_or(5),
        execution: if s.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..defaults
    };
    let cells = run_gamma_sweep(&data, &spec)?;
    let csv = sweep_csv(&cells);
    print!("{csv}");
    write(&out, "gamma_sweep.csv", &csv)?;
    Ok(())
}

fn time_benchmark(s: &Settings) -> Result<()> {
    let (data, _) = load_dataset(s)?;
    let defaults = TimingSpec::default();
    let base = monotree::boosting::BoosterConfig {
        max_depth: s.shape.max_depth.unwrap_or(defaults.base.max_depth),
        num_leaves: s.shape.num_leaves.unwrap_or(defaults.base.num_leaves),
        min_data_in_leaf: s.shape.min_data_in_leaf.unwrap_or(defaults.base.min_data_in_leaf),
        max_bins: s.booster.max_bins,
        seed: s.booster.seed,
        execution: s.booster.execution,
        ..defaults.base.clone()
    };
    let spec = TimingSpec {
        base,
        sizes: s.sizes.clone().unwrap_or(defaults.sizes),
        methods: s.methods.clone().unwrap_or(defaults.methods),
        reps: s.reps.unwrap_or(defaults.reps),
        seed: s.booster.seed,
    };
    let rows = run_time_benchmark(&data, &spec)?;
    let csv = timing_csv(&rows);
    print!("{csv}");
    if let Some(out) = &s.out {
        write(out, "timing.csv", &csv)?;
    }
    Ok(())
}

fn export_trees(s: &Settings) -> Result<()> {
    let model = read_model(s)?;
    let out = require_out(s)?;
    let k = s.first_k_trees.unwrap_or(1).min(model.trees.len());
    for (i, tree) in model.trees.iter().take(k).enumerate() {
        let dot = tree.export_dot(Some(&model.feature_names), Some(&model.mappers));
        write(&out, &format!("tree_{i}.dot"), &dot)?;
    }
    println!("{k} trees -> {}", out.display());
    Ok(())
}
