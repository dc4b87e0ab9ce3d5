//! Run settings: JSON file merged with command-line flags (flags win).

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use monotree::boosting::BoosterConfig;
use monotree::experiments::SampleSize;
use monotree::{ConstraintMode, Error, ObjectiveKind, Result};

/// A list given either as a JSON array or as a comma-separated string.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ListValue {
    Number(f64),
    Numbers(Vec<f64>),
    Text(String),
    Texts(Vec<String>),
}

impl ListValue {
    fn items(&self) -> Vec<String> {
        match self {
            ListValue::Number(v) => vec![v.to_string()],
            ListValue::Numbers(v) => v.iter().map(f64::to_string).collect(),
            ListValue::Text(s) => split_list(s),
            ListValue::Texts(v) => v.iter().flat_map(|s| split_list(s)).collect(),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// Keys accepted in the `--config` file; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub objective: Option<ObjectiveKind>,
    pub method: Option<ListValue>,
    pub gamma: Option<ListValue>,
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub num_leaves: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_data_in_leaf: Option<usize>,
    pub lambda: Option<f64>,
    pub max_bins: Option<usize>,
    pub seed: Option<u64>,
    pub sizes: Option<ListValue>,
    pub reps: Option<usize>,
    pub first_k_trees: Option<usize>,
    pub checkpoints: Option<ListValue>,
    pub sequential: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parameter(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with any of the keys below (flags override it)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Adult directory, or a prepared CSV
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Schema JSON for a prepared CSV
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Model file to write (train) or read (evaluate, export-trees)
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Objective: binary_logloss or l2
    #[arg(long, global = true)]
    pub objective: Option<String>,
    /// Monotone method(s): none, basic, fast, slow (comma list)
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Monotone penalty gamma (comma list)
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub num_leaves: Option<usize>,
    #[arg(long, global = true)]
    pub max_depth: Option<usize>,
    #[arg(long, global = true)]
    pub min_data_in_leaf: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub max_bins: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Timing sample sizes, e.g. 2000,10000,full
    #[arg(long, global = true)]
    pub sizes: Option<String>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub first_k_trees: Option<usize>,
    /// Iterations reported by gamma-sweep (comma list)
    #[arg(long, global = true)]
    pub checkpoints: Option<String>,
    /// Disable data-parallel execution
    #[arg(long, global = true)]
    pub sequential: bool,
}

/// Tree-shape keys that were given explicitly, for commands whose own
/// defaults differ from the booster defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShapeOverrides {
    pub num_leaves: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_data_in_leaf: Option<usize>,
}

/// Fully merged settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub shape: ShapeOverrides,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub booster: BoosterConfig,
    pub methods: Option<Vec<ConstraintMode>>,
    pub gammas: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub sizes: Option<Vec<SampleSize>>,
    pub reps: Option<usize>,
    pub first_k_trees: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub sequential: bool,
}

fn parse_items<T>(items: Vec<String>, what: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if items.is_empty() {
        return Err(Error::Parameter(format!("{what} list is empty")));
    }
    items.iter().map(|s| f(s)).collect()
}

fn number<T: std::str::FromStr>(what: &'static str) -> impl Fn(&str) -> Result<T> {
    move |s: &str| {
        s.parse::<T>()
            .map_err(|_| Error::Parameter(format!("invalid {what} `{s}`")))
    }
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Settings> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let pick_list = |flag: &Option<String>, file: &Option<ListValue>| -> Option<Vec<String>> {
            match flag {
                Some(s) => Some(split_list(s)),
                None => file.as_ref().map(ListValue::items),
            }
        };

        let mut booster = BoosterConfig::default();
        let objective = match &flags.objective {
            Some(s) => Some(
                serde_json::from_value::<ObjectiveKind>(serde_json::Value::String(s.clone()))
                    .map_err(|_| Error::Parameter(format!("unknown objective `{s}`")))?,
            ),
            None => file.objective,
        };
        if let Some(o) = objective {
            booster.objective = o;
        }
        macro_rules! merge {
            ($field:ident => $target:expr) => {
                if let Some(v) = flags.$field.or(file.$field) {
                    $target = v;
                }
            };
        }
        merge!(iterations => booster.iterations);
        merge!(learning_rate => booster.learning_rate);
        merge!(num_leaves => booster.num_leaves);
        merge!(max_depth => booster.max_depth);
        merge!(min_data_in_leaf => booster.min_data_in_leaf);
        merge!(lambda => booster.lambda);
        merge!(max_bins => booster.max_bins);
        merge!(seed => booster.seed);
        merge!(epsilon => booster.penalty_epsilon);

        let methods = pick_list(&flags.method, &file.method)
            .map(|v| parse_items(v, "method", |s| s.parse::<ConstraintMode>()))
            .transpose()?;
        let gammas = pick_list(&flags.gamma, &file.gamma)
            .map(|v| parse_items(v, "gamma", number::<f64>("gamma")))
            .transpose()?;
        let sizes = pick_list(&flags.sizes, &file.sizes)
            .map(|v| parse_items(v, "size", SampleSize::parse))
            .transpose()?;
        let checkpoints = pick_list(&flags.checkpoints, &file.checkpoints)
            .map(|v| parse_items(v, "checkpoint", number::<usize>("checkpoint")))
            .transpose()?;
        if let Some(m) = methods.as_ref().and_then(|m| m.first()) {
            booster.monotone_method = *m;
        }
        if let Some(g) = gammas.as_ref().and_then(|g| g.first()) {
            booster.monotone_penalty = *g;
        }
        let sequential = flags.sequential || file.sequential.unwrap_or(false);
        if sequential {
            booster.execution = monotree::Execution::Sequential;
        }
        booster.validate()?;

        Ok(Settings {
            shape: ShapeOverrides {
                num_leaves: flags.num_leaves.or(file.num_leaves),
                max_depth: flags.max_depth.or(file.max_depth),
                min_data_in_leaf: flags.min_data_in_leaf.or(file.min_data_in_leaf),
            },
            data: flags.data.clone().or(file.data),
            schema: flags.schema.clone().or(file.schema),
            model: flags.model.clone().or(file.model),
            out: flags.out.clone().or(file.out),
            booster,
            methods,
            gammas,
            trials: flags.trials.or(file.trials),
            sizes,
            reps: flags.reps.or(file.reps),
            first_k_trees: flags.first_k_trees.or(file.first_k_trees),
            checkpoints,
            sequential,
        })
    }
}
