//! Boosting loop, staged metrics, prediction and model documents.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintMode, PenaltyParams};
use crate::dataset::{BinMapper, BinnedDataset, Cell, FeatureSchema, RawTable};
use crate::error::{Error, Result};
use crate::objective::{self, grad_hess, sigmoid, GradHess, ObjectiveKind};
use crate::parallel::Execution;
use crate::tree::{grow_tree, Tree, TreeConfig};

/// Format tag written into every model document.
pub const MODEL_FORMAT: &str = "monotree-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoosterConfig {
    pub objective: ObjectiveKind,
    pub iterations: usize,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub max_depth: usize,
    pub min_data_in_leaf: usize,
    pub lambda: f64,
    pub min_hessian: f64,
    pub max_bins: usize,
    pub monotone_method: ConstraintMode,
    pub monotone_penalty: f64,
    pub penalty_epsilon: f64,
    /// Replaces the dataset's monotone directions when set.
    pub monotone_constraints: Option<Vec<i8>>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for BoosterConfig {
    fn default() -> Self {
        BoosterConfig {
            objective: ObjectiveKind::BinaryLogloss,
            iterations: 100,
            learning_rate: 0.1,
            num_leaves: 32,
            max_depth: 5,
            min_data_in_leaf: 100,
            lambda: 0.0,
            min_hessian: 1e-3,
            max_bins: 255,
            monotone_method: ConstraintMode::Basic,
            monotone_penalty: 0.0,
            penalty_epsilon: 1e-10,
            monotone_constraints: None,
            seed: 42,
            execution: Execution::Parallel,
        }
    }
}

impl BoosterConfig {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            num_leaves: self.num_leaves,
            max_depth: self.max_depth,
            min_data_in_leaf: self.min_data_in_leaf,
            lambda: self.lambda,
            min_hessian: self.min_hessian,
            mode: self.monotone_method,
            penalty: PenaltyParams {
                gamma: self.monotone_penalty,
                epsilon: self.penalty_epsilon,
            },
            execution: self.execution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.max_bins < 2 || self.max_bins > u16::MAX as usize {
            return Err(Error::Parameter(format!("max_bins {} out of range", self.max_bins)));
        }
        if let Some(d) = &self.monotone_constraints {
            if d.iter().any(|v| !matches!(v, -1..=1)) {
                return Err(Error::Parameter("monotone_constraints must be -1, 0 or 1".into()));
            }
        }
        self.tree_config().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Logloss,
    Accuracy,
    Auc,
    Mse,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Logloss => "logloss",
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Mse => "mse",
        }
    }

    /// Metrics reported by default for an objective.
    pub fn defaults(kind: ObjectiveKind) -> Vec<Metric> {
        match kind {
            ObjectiveKind::BinaryLogloss => vec![Metric::Logloss, Metric::Accuracy, Metric::Auc],
            ObjectiveKind::L2 => vec![Metric::Mse],
        }
    }

    /// Evaluates on raw margins.
    pub fn evaluate(self, kind: ObjectiveKind, margins: &[f64], labels: &[f64]) -> Result<f64> {
        let probs = || -> Vec<f64> {
            match kind {
                ObjectiveKind::BinaryLogloss => margins.iter().map(|&m| sigmoid(m)).collect(),
                ObjectiveKind::L2 => margins.to_vec(),
            }
        };
        match self {
            Metric::Logloss => objective::logloss(&probs(), labels),
            Metric::Accuracy => objective::accuracy(&probs(), labels, 0.5),
            Metric::Auc => objective::auc(margins, labels),
            Metric::Mse => objective::mean_squared_error(margins, labels),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "logloss" => Ok(Metric::Logloss),
            "accuracy" => Ok(Metric::Accuracy),
            "auc" => Ok(Metric::Auc),
            "mse" => Ok(Metric::Mse),
            other => Err(Error::Parameter(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSplit {
    Train,
    Test,
}

impl DataSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSplit::Train => "train",
            DataSplit::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    pub metric: Metric,
    pub split: DataSplit,
    pub value: f64,
}

/// Metric values after each boosting iteration (1-based).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    pub records: Vec<MetricRecord>,
}

impl MetricTable {
    pub fn get(&self, iteration: usize, metric: Metric, split: DataSplit) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.iteration == iteration && r.metric == metric && r.split == split)
            .map(|r| r.value)
    }

    /// Values of one metric by iteration.
    pub fn series(&self, metric: Metric, split: DataSplit) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.metric == metric && r.split == split)
            .map(|r| (r.iteration, r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<metrics>", e);
        writeln!(out, "iteration,metric,split,value").map_err(io)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration,
                r.metric,
                r.split.as_str(),
                r.value
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoosterModel {
    pub format: String,
    pub objective: ObjectiveKind,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub config: BoosterConfig,
    pub feature_names: Vec<String>,
    pub directions: Vec<i8>,
    pub mappers: Vec<BinMapper>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<FeatureSchema>,
    pub trees: Vec<Tree>,
}

/// Starting margin: log-odds of the positive rate, or the mean target.
pub fn base_margin(kind: ObjectiveKind, labels: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    match kind {
        ObjectiveKind::L2 => Ok(mean),
        ObjectiveKind::BinaryLogloss => {
            if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::Parameter("binary labels must be 0 or 1".into()));
            }
            if mean <= 0.0 || mean >= 1.0 {
                return Err(Error::DegenerateBaseMargin(format!(
                    "all {} labels belong to one class",
                    labels.len()
                )));
            }
            Ok((mean / (1.0 - mean)).ln())
        }
    }
}

fn staged(
    table: &mut MetricTable,
    iteration: usize,
    kind: ObjectiveKind,
    metrics: &[Metric],
    split: DataSplit,
    margins: &[f64],
    labels: &[f64],
) -> Result<()> {
    for &metric in metrics {
        table.records.push(MetricRecord {
            iteration,
            metric,
            split,
            value: metric.evaluate(kind, margins, labels)?,
        });
    }
    Ok(())
}

/// Trains with the default metrics of the objective on the training set.
pub fn train(data: &BinnedDataset, config: &BoosterConfig) -> Result<(BoosterModel, MetricTable)> {
    train_with_eval(data, config, None, &Metric::defaults(config.objective))
}

/// Trains and records `metrics` on the training set (and `eval`, when
/// given) after every iteration.
pub fn train_with_eval(
    data: &BinnedDataset,
    config: &BoosterConfig,
    eval: Option<&BinnedDataset>,
    metrics: &[Metric],
) -> Result<(BoosterModel, MetricTable)> {
    config.validate()?;
    if data.row_count() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut owned;
    let data = match &config.monotone_constraints {
        Some(d) => {
            owned = data.clone();
            owned.set_directions(d.clone())?;
            &owned
        }
        None => data,
    };
    if let Some(e) = eval {
        if e.feature_count() != data.feature_count() {
            return Err(Error::LengthMismatch {
                left: e.feature_count(),
                right: data.feature_count(),
            });
        }
    }
    let kind = config.objective;
    let base = base_margin(kind, data.labels())?;
    let lr = config.learning_rate;
    let tree_config = config.tree_config();
    let n = data.row_count();
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let mut margins = vec![base; n];
    let mut eval_margins = eval.map(|e| vec![base; e.row_count()]);
    let mut gh = vec![GradHess::default(); n];
    let mut trees = Vec::with_capacity(config.iterations);
    let mut table = MetricTable::default();

    for it in 1..=config.iterations {
        for ((g, &m), &y) in gh.iter_mut().zip(&margins).zip(data.labels()) {
            *g = grad_hess(kind, m, y);
        }
        let grown = grow_tree(data, all_rows.clone(), &gh, tree_config)?;
        for leaf in grown.tree.leaf_ids() {
            let v = grown.tree.node(leaf).value;
            for &r in &grown.leaf_rows[leaf] {
                margins[r as usize] += lr * v;
            }
        }
        if let (Some(e), Some(em)) = (eval, eval_margins.as_mut()) {
            for (r, m) in em.iter_mut().enumerate() {
                *m += lr * grown.tree.predict_row(e, r);
            }
        }
        staged(&mut table, it, kind, metrics, DataSplit::Train, &margins, data.labels())?;
        if let (Some(e), Some(em)) = (eval, eval_margins.as_ref()) {
            staged(&mut table, it, kind, metrics, DataSplit::Test, em, e.labels())?;
        }
        trees.push(grown.tree);
    }

    let model = BoosterModel {
        format: MODEL_FORMAT.to_string(),
        objective: kind,
        base_margin: base,
        learning_rate: lr,
        config: config.clone(),
        feature_names: data.names().to_vec(),
        directions: data.directions().to_vec(),
        mappers: data.mappers().to_vec(),
        schema: None,
        trees,
    };
    Ok((model, table))
}

impl BoosterModel {
    pub fn with_schema(mut self, schema: FeatureSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    fn margin_with(&self, mut bin_of: impl FnMut(usize) -> u16) -> f64 {
        let mut m = self.base_margin;
        for t in &self.trees {
            m += self.learning_rate * t.node(t.leaf_for(&mut bin_of)).value;
        }
        m
    }

    fn link(&self, margin: f64) -> f64 {
        match self.objective {
            ObjectiveKind::BinaryLogloss => sigmoid(margin),
            ObjectiveKind::L2 => margin,
        }
    }

    /// Raw margins of already binned rows, accumulated tree by tree in
    /// the same order as during training.
    pub fn predict_margins_binned(&self, data: &BinnedDataset) -> Result<Vec<f64>> {
        if data.feature_count() != self.mappers.len() {
            return Err(Error::LengthMismatch {
                left: data.feature_count(),
                right: self.mappers.len(),
            });
        }
        Ok((0..data.row_count())
            .map(|r| self.margin_with(|f| data.bin(f, r)))
            .collect())
    }

    pub fn predict_binned(&self, data: &BinnedDataset) -> Result<Vec<f64>> {
        Ok(self
            .predict_margins_binned(data)?
            .into_iter()
            .map(|m| self.link(m))
            .collect())
    }

    /// Scores raw rows: margins for l2, probabilities for binary.
    pub fn predict(&self, rows: &RawTable) -> Result<Vec<f64>> {
        let bins = self.bin_raw(rows)?;
        Ok((0..rows.row_count())
            .map(|r| self.link(self.margin_with(|f| bins[f][r])))
            .collect())
    }

    /// Bins raw rows with the stored boundaries. A one-hot feature missing
    /// from `rows` is rebuilt from its source column.
    fn bin_raw(&self, rows: &RawTable) -> Result<Vec<Vec<u16>>> {
        let specs = self.schema.as_ref().map(|s| &s.features);
        let mut known: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        if let Some(s) = &self.schema {
            known.push(&s.label);
            known.extend(s.features.iter().filter_map(|f| f.one_hot.as_ref()).map(|o| o.column.as_str()));
        }
        if let Some(unknown) = rows.column_names().iter().find(|c| !known.contains(&c.as_str())) {
            return Err(Error::Schema(format!("column `{unknown}` is not known to the model")));
        }
        let column = |name: &str| {
            rows.column(name)
                .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
        };
        let mut out = Vec::with_capacity(self.mappers.len());
        for (f, mapper) in self.mappers.iter().enumerate() {
            let name = &self.feature_names[f];
            let source = specs
                .and_then(|s| s.get(f))
                .and_then(|s| s.one_hot.as_ref())
                .filter(|_| rows.column(name).is_none());
            let values: Vec<f64> = match source {
                Some(src) => column(&src.column)?
                    .iter()
                    .map(|c| if c.category_key() == src.value { 1.0 } else { 0.0 })
                    .collect(),
                None => {
                    column(name)?
                        .iter()
                        .enumerate()
                        .map(|(r, c)| match c {
                            Cell::Number(v) => Ok(*v),
                            other => Err(Error::Parse {
                                row: r + 1,
                                message: format!("column `{name}` holds non-numeric `{other}`"),
                            }),
                        })
                        .collect::<Result<_>>()?
                }
            };
            out.push(values.into_iter().map(|v| mapper.bin(v)).collect());
        }
        Ok(out)
    }
}

pub fn serialize_model(model: &BoosterModel) -> Result<String> {
    serde_json::to_string_pretty(model).map_err(|e| Error::Model(e.to_string()))
}

pub fn deserialize_model(text: &str) -> Result<BoosterModel> {
    let model: BoosterModel =
        serde_json::from_str(text).map_err(|e| Error::Model(format!("malformed model: {e}")))?;
    if model.format != MODEL_FORMAT {
        return Err(Error::Model(format!(
            "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
            model.format
        )));
    }
    let features = model.mappers.len();
    if model.feature_names.len() != features || model.directions.len() != features {
        return Err(Error::Model("feature arrays differ in length".into()));
    }
    for (i, t) in model.trees.iter().enumerate() {
        if t.feature_count() != features {
            return Err(Error::Model(format!("tree {i} has a different feature count")));
        }
    }
    Ok(model)
}
