//! Monte-Carlo comparison of constraint modes and the penalty sweep.

use std::fmt::Write as _;
use std::io::Write;

use crate::boosting::{train_with_eval, BoosterConfig, DataSplit, Metric, MetricTable};
use crate::constraints::ConstraintMode;
use crate::dataset::{mc_split, BinnedDataset};
use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub method: ConstraintMode,
    pub gamma: f64,
}

impl RunKey {
    pub fn label(&self) -> String {
        format!("{}_g{}", self.method, self.gamma)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub base: BoosterConfig,
    pub methods: Vec<ConstraintMode>,
    pub gammas: Vec<f64>,
    pub trials: usize,
    pub train_ratio: f64,
    pub metrics: Vec<Metric>,
    /// How independent runs are scheduled; each run itself is sequential.
    pub execution: Execution,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            base: BoosterConfig::default(),
            methods: ConstraintMode::ALL.to_vec(),
            gammas: vec![0.0],
            trials: 5,
            train_ratio: super::TRAIN_RATIO,
            metrics: vec![Metric::Logloss, Metric::Accuracy, Metric::Auc],
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    /// Trial number, also the seed of its train/test split.
    pub trial: usize,
    pub key: RunKey,
    pub table: MetricTable,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub iterations: usize,
    pub trials: usize,
    pub keys: Vec<RunKey>,
    pub metrics: Vec<Metric>,
    pub runs: Vec<TrialRun>,
}

const SPLITS: [DataSplit; 2] = [DataSplit::Train, DataSplit::Test];

fn check_spec(trials: usize, gammas: &[f64]) -> Result<()> {
    if trials == 0 {
        return Err(Error::Parameter("trial count must be >= 1".into()));
    }
    if gammas.is_empty() {
        return Err(Error::Parameter("gamma list is empty".into()));
    }
    for &g in gammas {
        crate::constraints::penalty(g, 0)?;
    }
    Ok(())
}

/// Runs every `(trial, method, gamma)` combination. Trials use seeds
/// `1..=trials`; `basic` is always included as the reference.
pub fn run_mc_benchmark(data: &BinnedDataset, spec: &BenchmarkSpec) -> Result<BenchmarkResult> {
    check_spec(spec.trials, &spec.gammas)?;
    if spec.methods.is_empty() {
        return Err(Error::Parameter("method list is empty".into()));
    }
    let mut methods = spec.methods.clone();
    if !methods.contains(&ConstraintMode::Basic) {
        methods.push(ConstraintMode::Basic);
    }
    let mut keys: Vec<RunKey> = Vec::new();
    for &method in &methods {
        for &gamma in &spec.gammas {
            let k = RunKey { method, gamma };
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    run_keys(data, spec, keys)
}

fn run_keys(data: &BinnedDataset, spec: &BenchmarkSpec, keys: Vec<RunKey>) -> Result<BenchmarkResult> {
    let jobs: Vec<(usize, RunKey)> = (1..=spec.trials)
        .flat_map(|t| keys.iter().map(move |&k| (t, k)))
        .collect();
    let inner = match spec.execution {
        Execution::Parallel => Execution::Sequential,
        Execution::Sequential => spec.base.execution,
    };
    let results = map_indices(spec.execution, jobs.len(), |j| -> Result<TrialRun> {
        let (trial, key) = jobs[j];
        let plan = mc_split(data.row_count(), spec.train_ratio, trial as u64)?;
        let train = data.select_rows(&plan.train);
        let test = data.select_rows(&plan.test);
        let config = BoosterConfig {
            monotone_method: key.method,
            monotone_penalty: key.gamma,
            execution: inner,
            ..spec.base.clone()
        };
        let (_, table) = train_with_eval(&train, &config, Some(&test), &spec.metrics)?;
        Ok(TrialRun { trial, key, table })
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkResult {
        iterations: spec.base.iterations,
        trials: spec.trials,
        keys,
        metrics: spec.metrics.clone(),
        runs,
    })
}

impl BenchmarkResult {
    /// Mean over trials of one metric at one iteration.
    pub fn mean(&self, key: RunKey, metric: Metric, split: DataSplit, iteration: usize) -> Option<f64> {
        let values: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.key == key)
            .filter_map(|r| r.table.get(iteration, metric, split))
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    /// Mean curve for iterations `1..=iterations`.
    pub fn mean_curve(&self, key: RunKey, metric: Metric, split: DataSplit) -> Vec<f64> {
        (1..=self.iterations)
            .map(|it| self.mean(key, metric, split, it).unwrap_or(f64::NAN))
            .collect()
    }

    fn reference(&self, key: RunKey) -> RunKey {
        RunKey {
            method: ConstraintMode::Basic,
            gamma: key.gamma,
        }
    }

    /// Long format: one line per trial, run, iteration, metric and split.
    pub fn write_trials_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<benchmark>", e);
        writeln!(out, "trial,method,gamma,iteration,metric,split,value").map_err(io)?;
        for r in &self.runs {
            for rec in &r.table.records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.trial,
                    r.key.method,
                    r.key.gamma,
                    rec.iteration,
                    rec.metric,
                    rec.split.as_str(),
                    rec.value
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }

    /// Wide format: one line per iteration, metric and split with the
    /// trial mean of every run, plus `<run>_minus_basic` and
    /// `<run>_rel_basic` (ratio minus one) for every non-basic run.
    pub fn averaged_csv(&self) -> String {
        let others: Vec<RunKey> = self
            .keys
            .iter()
            .copied()
            .filter(|k| k.method != ConstraintMode::Basic)
            .collect();
        let mut out = String::from("iteration,metric,split");
        for k in &self.keys {
            let _ = write!(out, ",{}", k.label());
        }
        for k in &others {
            let _ = write!(out, ",{0}_minus_basic,{0}_rel_basic", k.label());
        }
        out.push('\n');
        for it in 1..=self.iterations {
            for &metric in &self.metrics {
                for split in SPLITS {
                    let _ = write!(out, "{it},{metric},{}", split.as_str());
                    for &k in &self.keys {
                        let v = self.mean(k, metric, split, it).unwrap_or(f64::NAN);
                        let _ = write!(out, ",{v}");
                    }
                    for &k in &others {
                        let v = self.mean(k, metric, split, it).unwrap_or(f64::NAN);
                        let b = self
                            .mean(self.reference(k), metric, split, it)
                            .unwrap_or(f64::NAN);
                        let _ = write!(out, ",{},{}", v - b, v / b - 1.0);
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: BoosterConfig,
    pub method: ConstraintMode,
    pub gammas: Vec<f64>,
    pub checkpoints: Vec<usize>,
    pub trials: usize,
    pub train_ratio: f64,
    pub execution: Execution,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: BoosterConfig::default(),
            method: ConstraintMode::Fast,
            gammas: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            checkpoints: vec![10, 25, 50, 100],
            trials: 5,
            train_ratio: super::TRAIN_RATIO,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub gamma: f64,
    pub iteration: usize,
    pub mean_logloss: f64,
    /// `mean_logloss / mean_logloss(gamma = 0) - 1`; negative is better.
    pub relative_change: f64,
}

/// Mean train logloss per `(gamma, checkpoint)` relative to gamma 0.
pub fn run_gamma_sweep(data: &BinnedDataset, spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    check_spec(spec.trials, &spec.gammas)?;
    if spec.checkpoints.is_empty() || spec.checkpoints.contains(&0) {
        return Err(Error::Parameter("checkpoints must be a non-empty list of iterations >= 1".into()));
    }
    let mut gammas = vec![0.0];
    for &g in &spec.gammas {
        if !gammas.contains(&g) {
            gammas.push(g);
        }
    }
    let iterations = *spec.checkpoints.iter().max().expect("non-empty");
    let bench = BenchmarkSpec {
        base: BoosterConfig {
            iterations,
            ..spec.base.clone()
        },
        methods: vec![spec.method],
        gammas,
        trials: spec.trials,
        train_ratio: spec.train_ratio,
        metrics: vec![Metric::Logloss],
        execution: spec.execution,
    };
    let keys = bench
        .gammas
        .iter()
        .map(|&gamma| RunKey { method: spec.method, gamma })
        .collect();
    let result = run_keys(data, &bench, keys)?;
    let mut cells = Vec::new();
    for &gamma in &spec.gammas {
        for &it in &spec.checkpoints {
            let at = |g: f64| {
                result
                    .mean(RunKey { method: spec.method, gamma: g }, Metric::Logloss, DataSplit::Train, it)
                    .unwrap_or(f64::NAN)
            };
            let (v, v0) = (at(gamma), at(0.0));
            cells.push(SweepCell {
                gamma,
                iteration: it,
                mean_logloss: v,
                relative_change: v / v0 - 1.0,
            });
        }
    }
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("gamma,iteration,mean_train_logloss,relative_change\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{},{}", c.gamma, c.iteration, c.mean_logloss, c.relative_change);
    }
    out
}
