//! Tabular ingestion and the preprocessing pipeline that turns raw CSV rows
//! into a binned training substrate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category assigned to cells equal to the configured missing token.
pub const MISSING_CATEGORY: &str = "missing";

/// Column order of the raw Adult census files.
pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education_num",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
    "native_country",
    "income",
];

const ADULT_CONTINUOUS: [&str; 6] = [
    "age",
    "fnlwgt",
    "education_num",
    "capital_gain",
    "capital_loss",
    "hours_per_week",
];

const ADULT_INCREASING: [&str; 3] = ["age", "education_num", "hours_per_week"];

pub const ADULT_LABEL: &str = "income";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(f64),
}

impl Cell {
    fn parse(raw: &str, missing_token: &str) -> Cell {
        let s = raw.trim();
        if s == missing_token {
            return Cell::Text(MISSING_CATEGORY.to_string());
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Text(s.to_string()),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    /// Key used when the cell is treated as a category.
    pub fn category_key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Number(v) => write!(f, "{v}"),
        }
    }
}

/// Column-oriented table of parsed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    names: Vec<String>,
    columns: Vec<Vec<Cell>>,
    rows: usize,
}

impl RawTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<Cell>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{name}`")));
            }
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(Error::Schema(format!(
                "column `{}` has {} cells, expected {rows}",
                names[i],
                columns[i].len()
            )));
        }
        Ok(RawTable {
            names,
            columns,
            rows,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[Cell]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    fn require(&self, name: &str) -> Result<&[Cell]> {
        self.column(name)
            .ok_or_else(|| Error::Schema(format!("missing expected column `{name}`")))
    }

    /// Appends the rows of `other`, which must have the same columns in the same order.
    pub fn append(&mut self, other: RawTable) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Schema("cannot append tables with different columns".into()));
        }
        for (dst, src) in self.columns.iter_mut().zip(other.columns) {
            dst.extend(src);
        }
        self.rows += other.rows;
        Ok(())
    }

    pub fn select_rows(&self, rows: &[u32]) -> RawTable {
        RawTable {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r as usize].clone()).collect())
                .collect(),
            rows: rows.len(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Parse {
            row: 0,
            message: e.to_string(),
        };
        w.write_record(&self.names).map_err(wrap)?;
        for r in 0..self.rows {
            w.write_record(self.columns.iter().map(|c| c[r].to_string()))
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub missing_token: String,
    /// Lines starting with this byte are skipped.
    pub comment: Option<u8>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            missing_token: "?".to_string(),
            comment: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

/// Parses delimiter-separated text. Rows with a wrong cell count are
/// rejected with the offending line number; blank lines are skipped.
pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .comment(opts.comment)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<Cell>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        match &names {
            None => {
                if opts.has_header {
                    names = Some(rec.iter().map(|s| s.trim().to_string()).collect());
                    columns = vec![Vec::new(); rec.len()];
                    continue;
                }
                names = Some((0..rec.len()).map(|i| format!("c{i}")).collect());
                columns = vec![Vec::new(); rec.len()];
            }
            Some(n) if n.len() != rec.len() => {
                return Err(Error::Parse {
                    row: line,
                    message: format!("expected {} cells, found {}", n.len(), rec.len()),
                });
            }
            Some(_) => {}
        }
        for (col, raw) in columns.iter_mut().zip(rec.iter()) {
            col.push(Cell::parse(raw, &opts.missing_token));
        }
    }
    RawTable::new(names.unwrap_or_default(), columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// Provenance of a one-hot column: `column == value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotSource {
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub monotone: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot: Option<OneHotSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub label: String,
}

impl FeatureSchema {
    pub fn directions(&self) -> Vec<i8> {
        self.features.iter().map(|f| f.monotone).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn validate(&self, table: &RawTable) -> Result<()> {
        for f in &self.features {
            if !matches!(f.monotone, -1..=1) {
                return Err(Error::Schema(format!(
                    "feature `{}` has monotone direction {}",
                    f.name, f.monotone
                )));
            }
            if f.monotone != 0 && f.kind != FeatureKind::Continuous {
                return Err(Error::Schema(format!(
                    "categorical feature `{}` cannot carry a monotone direction",
                    f.name
                )));
            }
            table.require(&f.name)?;
        }
        table.require(&self.label)?;
        Ok(())
    }

    /// Infers kinds from cell types (all-numeric columns are continuous),
    /// then applies `overrides`.
    pub fn infer(table: &RawTable, label: &str, overrides: &SchemaOverride) -> Result<Self> {
        table.require(label)?;
        for name in overrides.keys() {
            if name != label && table.index_of(name).is_none() {
                return Err(Error::Schema(format!("override names unknown column `{name}`")));
            }
        }
        let features = table
            .names
            .iter()
            .zip(&table.columns)
            .filter(|(n, _)| n.as_str() != label)
            .map(|(name, cells)| {
                let numeric = cells.iter().all(|c| matches!(c, Cell::Number(_)));
                let mut spec = FeatureSpec {
                    name: name.clone(),
                    kind: if numeric {
                        FeatureKind::Continuous
                    } else {
                        FeatureKind::Categorical
                    },
                    monotone: 0,
                    one_hot: None,
                };
                if let Some(o) = overrides.get(name) {
                    if let Some(k) = o.kind {
                        spec.kind = k;
                    }
                    if let Some(d) = o.monotone_direction {
                        spec.monotone = d;
                    }
                }
                spec
            })
            .collect();
        let schema = FeatureSchema {
            features,
            label: label.to_string(),
        };
        schema.validate(table)?;
        Ok(schema)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideEntry {
    #[serde(default)]
    pub kind: Option<FeatureKind>,
    #[serde(default)]
    pub monotone_direction: Option<i8>,
}

/// Schema override file: feature name → `{kind, monotone_direction}`.
pub type SchemaOverride = BTreeMap<String, OverrideEntry>;

pub fn load_schema_override(path: impl AsRef<Path>) -> Result<SchemaOverride> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Reads and concatenates raw Adult files (no header, `?` for missing,
/// `|` comment lines as in the published test split).
pub fn load_adult<P: AsRef<Path>>(paths: &[P]) -> Result<RawTable> {
    let opts = CsvOptions {
        has_header: false,
        comment: Some(b'|'),
        ..CsvOptions::default()
    };
    let mut merged: Option<RawTable> = None;
    for p in paths {
        let mut t = load_csv(p, &opts)?;
        if t.column_count() != ADULT_COLUMNS.len() {
            return Err(Error::Schema(format!(
                "{}: expected {} columns, found {}",
                p.as_ref().display(),
                ADULT_COLUMNS.len(),
                t.column_count()
            )));
        }
        t.names = ADULT_COLUMNS.iter().map(|s| s.to_string()).collect();
        match merged.as_mut() {
            None => merged = Some(t),
            Some(m) => m.append(t)?,
        }
    }
    merged.ok_or(Error::EmptyDataset)
}

/// Drops `education`, maps `income` to 0/1 and marks the three increasing
/// features.
pub fn preprocess_adult(raw: &RawTable) -> Result<(RawTable, FeatureSchema)> {
    for name in ADULT_COLUMNS {
        raw.require(name)?;
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut features = Vec::new();
    for name in ADULT_COLUMNS {
        if name == "education" {
            continue;
        }
        let cells = raw.require(name)?;
        if name == ADULT_LABEL {
            let labels = cells
                .iter()
                .map(|c| {
                    let s = c.to_string();
                    let positive = s.trim().trim_end_matches('.') == ">50K";
                    Cell::Number(if positive { 1.0 } else { 0.0 })
                })
                .collect();
            names.push(name.to_string());
            columns.push(labels);
            continue;
        }
        let continuous = ADULT_CONTINUOUS.contains(&name);
        names.push(name.to_string());
        columns.push(cells.to_vec());
        features.push(FeatureSpec {
            name: name.to_string(),
            kind: if continuous {
                FeatureKind::Continuous
            } else {
                FeatureKind::Categorical
            },
            monotone: i8::from(ADULT_INCREASING.contains(&name)),
            one_hot: None,
        });
    }
    let table = RawTable::new(names, columns)?;
    let schema = FeatureSchema {
        features,
        label: ADULT_LABEL.to_string(),
    };
    schema.validate(&table)?;
    Ok((table, schema))
}

/// Expands each categorical feature into one binary column per distinct
/// value (sorted), named `<feature>=<value>`.
pub fn one_hot_encode(raw: &RawTable, schema: &FeatureSchema) -> Result<(RawTable, FeatureSchema)> {
    schema.validate(raw)?;
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut features = Vec::new();
    for spec in &schema.features {
        let cells = raw.require(&spec.name)?;
        match spec.kind {
            FeatureKind::Continuous => {
                names.push(spec.name.clone());
                columns.push(cells.to_vec());
                features.push(spec.clone());
            }
            FeatureKind::Categorical => {
                let keys: Vec<String> = cells.iter().map(Cell::category_key).collect();
                let values: BTreeSet<&str> = keys.iter().map(String::as_str).collect();
                for value in values {
                    let name = format!("{}={}", spec.name, value);
                    columns.push(
                        keys.iter()
                            .map(|k| Cell::Number(if k == value { 1.0 } else { 0.0 }))
                            .collect(),
                    );
                    features.push(FeatureSpec {
                        name: name.clone(),
                        kind: FeatureKind::Continuous,
                        monotone: 0,
                        one_hot: Some(OneHotSource {
                            column: spec.name.clone(),
                            value: value.to_string(),
                        }),
                    });
                    names.push(name);
                }
            }
        }
    }
    names.push(schema.label.clone());
    columns.push(raw.require(&schema.label)?.to_vec());
    let table = RawTable::new(names, columns)?;
    let schema = FeatureSchema {
        features,
        label: schema.label.clone(),
    };
    Ok((table, schema))
}

/// Maps raw values of one feature to bin ordinals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    /// Inclusive upper boundary of each bin, strictly increasing.
    pub upper_bounds: Vec<f64>,
}

impl BinMapper {
    /// Equal-frequency boundaries over the distinct values of `values`.
    pub fn fit(values: &[f64], max_bins: usize) -> Result<Self> {
        if max_bins < 2 || max_bins > u16::MAX as usize {
            return Err(Error::Parameter(format!("max_bins = {max_bins} out of range")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in sorted {
            match distinct.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        if distinct.len() <= max_bins {
            return Ok(BinMapper {
                upper_bounds: distinct.into_iter().map(|(v, _)| v).collect(),
            });
        }
        let n = values.len() as f64;
        let per_bin = n / max_bins as f64;
        let mut uppers = Vec::with_capacity(max_bins);
        let mut cumulative = 0usize;
        let mut next = 1usize;
        for &(v, count) in &distinct {
            cumulative += count;
            if next < max_bins && cumulative as f64 >= next as f64 * per_bin {
                uppers.push(v);
                while next < max_bins && cumulative as f64 >= next as f64 * per_bin {
                    next += 1;
                }
            }
        }
        let max_value = distinct.last().map(|d| d.0).unwrap_or_default();
        if uppers.last() != Some(&max_value) {
            uppers.push(max_value);
        }
        Ok(BinMapper {
            upper_bounds: uppers,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.upper_bounds.len()
    }

    pub fn is_splittable(&self) -> bool {
        self.upper_bounds.len() > 1
    }

    pub fn bin(&self, value: f64) -> u16 {
        let i = self.upper_bounds.partition_point(|&u| u < value);
        i.min(self.upper_bounds.len().saturating_sub(1)) as u16
    }

    /// Largest bin whose upper boundary is `<= value`, i.e. the bin threshold
    /// realising the split `x <= value`.
    pub fn threshold_bin(&self, value: f64) -> Option<u16> {
        let i = self.upper_bounds.partition_point(|&u| u <= value);
        i.checked_sub(1).map(|b| b as u16)
    }
}

/// Column-binned feature matrix with labels and monotone directions.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    names: Vec<String>,
    bins: Vec<Vec<u16>>,
    mappers: Vec<BinMapper>,
    labels: Vec<f64>,
    directions: Vec<i8>,
    rows: usize,
}

impl BinnedDataset {
    pub fn from_parts(
        names: Vec<String>,
        bins: Vec<Vec<u16>>,
        mappers: Vec<BinMapper>,
        labels: Vec<f64>,
        directions: Vec<i8>,
    ) -> Result<Self> {
        let n_features = names.len();
        if bins.len() != n_features || mappers.len() != n_features || directions.len() != n_features
        {
            return Err(Error::Schema("feature-wise array lengths differ".into()));
        }
        let rows = labels.len();
        for (f, col) in bins.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::LengthMismatch {
                    left: col.len(),
                    right: rows,
                });
            }
            let count = mappers[f].bin_count();
            if let Some(b) = col.iter().find(|&&b| b as usize >= count) {
                return Err(Error::Schema(format!(
                    "feature `{}`: bin {b} outside declared count {count}",
                    names[f]
                )));
            }
            if mappers[f].upper_bounds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schema(format!(
                    "feature `{}`: bin boundaries not strictly increasing",
                    names[f]
                )));
            }
        }
        if let Some(d) = directions.iter().find(|d| !matches!(d, -1..=1)) {
            return Err(Error::Schema(format!("monotone direction {d} not in {{-1,0,1}}")));
        }
        Ok(BinnedDataset {
            names,
            bins,
            mappers,
            labels,
            directions,
            rows,
        })
    }

    /// Bins raw numeric columns directly.
    pub fn from_columns(
        names: Vec<String>,
        columns: &[Vec<f64>],
        labels: Vec<f64>,
        directions: Vec<i8>,
        max_bins: usize,
    ) -> Result<Self> {
        let mappers = columns
            .iter()
            .map(|c| BinMapper::fit(c, max_bins))
            .collect::<Result<Vec<_>>>()?;
        let bins = columns
            .iter()
            .zip(&mappers)
            .map(|(c, m)| c.iter().map(|&v| m.bin(v)).collect())
            .collect();
        Self::from_parts(names, bins, mappers, labels, directions)
    }

    pub fn feature_count(&self) -> usize {
        self.names.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn directions(&self) -> &[i8] {
        &self.directions
    }

    pub fn set_directions(&mut self, directions: Vec<i8>) -> Result<()> {
        if directions.len() != self.feature_count() {
            return Err(Error::LengthMismatch {
                left: directions.len(),
                right: self.feature_count(),
            });
        }
        if let Some(d) = directions.iter().find(|d| !matches!(d, -1..=1)) {
            return Err(Error::Schema(format!("monotone direction {d} not in {{-1,0,1}}")));
        }
        self.directions = directions;
        Ok(())
    }

    pub fn mappers(&self) -> &[BinMapper] {
        &self.mappers
    }

    pub fn bin_counts(&self) -> Vec<u16> {
        self.mappers.iter().map(|m| m.bin_count() as u16).collect()
    }

    pub fn column(&self, feature: usize) -> &[u16] {
        &self.bins[feature]
    }

    #[inline]
    pub fn bin(&self, feature: usize, row: usize) -> u16 {
        self.bins[feature][row]
    }

    pub fn row_bins(&self, row: usize) -> Vec<u16> {
        self.bins.iter().map(|c| c[row]).collect()
    }

    pub fn select_rows(&self, rows: &[u32]) -> BinnedDataset {
        BinnedDataset {
            names: self.names.clone(),
            bins: self
                .bins
                .iter()
                .map(|c| rows.iter().map(|&r| c[r as usize]).collect())
                .collect(),
            mappers: self.mappers.clone(),
            labels: rows.iter().map(|&r| self.labels[r as usize]).collect(),
            directions: self.directions.clone(),
            rows: rows.len(),
        }
    }
}

/// Bins every schema feature (all must be numeric) with equal-frequency
/// boundaries. Constant features get a single, unsplittable bin.
pub fn bin_features(raw: &RawTable, schema: &FeatureSchema, max_bins: usize) -> Result<BinnedDataset> {
    schema.validate(raw)?;
    let numeric = |name: &str| -> Result<Vec<f64>> {
        raw.require(name)?
            .iter()
            .enumerate()
            .map(|(r, c)| {
                c.as_number().ok_or_else(|| Error::Parse {
                    row: r + 1,
                    message: format!("column `{name}` holds non-numeric value `{c}`"),
                })
            })
            .collect()
    };
    let mut columns = Vec::with_capacity(schema.features.len());
    for spec in &schema.features {
        if spec.kind != FeatureKind::Continuous {
            return Err(Error::Schema(format!(
                "feature `{}` is categorical; one-hot encode before binning",
                spec.name
            )));
        }
        columns.push(numeric(&spec.name)?);
    }
    let labels = numeric(&schema.label)?;
    BinnedDataset::from_columns(schema.names(), &columns, labels, schema.directions(), max_bins)
}

/// Row indices of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
    pub seed: u64,
}

pub fn train_size(rows: usize, train_ratio: f64) -> usize {
    (train_ratio * rows as f64).floor() as usize
}

/// Seeded permutation split: the first `floor(train_ratio * rows)` permuted
/// indices train, the rest test.
pub fn mc_split(rows: usize, train_ratio: f64, trial_seed: u64) -> Result<SplitPlan> {
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Parameter(format!(
            "train ratio {train_ratio} must lie strictly between 0 and 1"
        )));
    }
    let mut perm: Vec<u32> = (0..rows as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    perm.shuffle(&mut rng);
    let test = perm.split_off(train_size(rows, train_ratio));
    Ok(SplitPlan {
        train: perm,
        test,
        seed: trial_seed,
    })
}
