//! Wall-clock cost of one boosting iteration per constraint mode.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boosting::{train_with_eval, BoosterConfig};
use crate::constraints::ConstraintMode;
use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    Rows(usize),
    Full,
}

impl SampleSize {
    pub fn label(&self) -> String {
        match self {
            SampleSize::Rows(n) => n.to_string(),
            SampleSize::Full => "full".into(),
        }
    }

    pub fn parse(s: &str) -> Result<SampleSize> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(SampleSize::Full);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(SampleSize::Rows)
            .ok_or_else(|| Error::Parameter(format!("size `{s}` is neither a positive count nor `full`")))
    }
}

#[derive(Debug, Clone)]
pub struct TimingSpec {
    pub base: BoosterConfig,
    pub sizes: Vec<SampleSize>,
    pub methods: Vec<ConstraintMode>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for TimingSpec {
    fn default() -> Self {
        TimingSpec {
            base: BoosterConfig {
                iterations: 1,
                max_depth: 10,
                num_leaves: 40,
                min_data_in_leaf: 20,
                ..BoosterConfig::default()
            },
            sizes: vec![SampleSize::Rows(2000), SampleSize::Rows(10000), SampleSize::Full],
            methods: ConstraintMode::ALL.to_vec(),
            reps: 100,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub size: String,
    pub rows: usize,
    pub method: ConstraintMode,
    pub reps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

/// Times `reps` single-iteration trainings for every size and mode.
/// Repetitions interleave the modes so drift affects all of them alike.
pub fn run_time_benchmark(data: &BinnedDataset, spec: &TimingSpec) -> Result<Vec<TimingRow>> {
    if spec.reps == 0 {
        return Err(Error::Parameter("repetition count must be >= 1".into()));
    }
    if spec.methods.is_empty() || spec.sizes.is_empty() {
        return Err(Error::Parameter("timing needs at least one size and one method".into()));
    }
    let config = BoosterConfig {
        iterations: 1,
        ..spec.base.clone()
    };
    config.validate()?;
    let mut rows = Vec::new();
    for size in &spec.sizes {
        let subset = match *size {
            SampleSize::Full => data.clone(),
            SampleSize::Rows(n) => {
                let mut idx: Vec<u32> = (0..data.row_count() as u32).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
                idx.truncate(n.min(data.row_count()));
                data.select_rows(&idx)
            }
        };
        let mut samples = vec![Vec::with_capacity(spec.reps); spec.methods.len()];
        for _ in 0..spec.reps {
            for (m, &method) in spec.methods.iter().enumerate() {
                let cfg = BoosterConfig {
                    monotone_method: method,
                    ..config.clone()
                };
                let start = Instant::now();
                let out = train_with_eval(&subset, &cfg, None, &[])?;
                samples[m].push(start.elapsed().as_secs_f64() * 1e3);
                drop(out);
            }
        }
        for (m, &method) in spec.methods.iter().enumerate() {
            let s = &samples[m];
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let var = if s.len() > 1 {
                s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64
            } else {
                0.0
            };
            rows.push(TimingRow {
                size: size.label(),
                rows: subset.row_count(),
                method,
                reps: spec.reps,
                mean_ms: mean,
                std_ms: var.sqrt(),
            });
        }
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("size,rows,method,reps,mean_ms,std_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4}",
            r.size, r.rows, r.method, r.reps, r.mean_ms, r.std_ms
        );
    }
    out
}
