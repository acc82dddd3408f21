//! Synthetic task generation and tabular ingestion with deterministic splits.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::backbone::InputCase;
use crate::rng::{domain, substream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid range: lo {0} must be below hi {1}")]
    InvalidRange(f64, f64),
    #[error("row {row}, column '{column}': cell does not parse as a number")]
    ParseError { row: usize, column: String },
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("split produced an empty partition")]
    EmptySplit,
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error("dataset has no cases")]
    EmptyDataset,
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A named collection of cases. `noise_sigma` records the synthetic noise
/// level for oracle checks (0 for tabular data); `standardize` records
/// whether the pipeline should standardize features from train-split
/// statistics after splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub cases: Vec<InputCase>,
    pub name: String,
    pub noise_sigma: f64,
    pub standardize: bool,
}

/// Fractions for the train/calibration/test partition plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub cal_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, f) in [
            ("train_frac", self.train_frac),
            ("cal_frac", self.cal_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(DataError::InvalidSplitSpec(format!(
                    "{name} = {f} not in (0, 1)"
                )));
            }
        }
        let sum = self.train_frac + self.cal_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DataError::InvalidSplitSpec(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

/// `y = amplitude * sin(frequency * x) + N(0, noise_sigma^2)` with `x`
/// uniform on `[lo, hi)`. Deterministic under `seed`.
pub fn make_sinusoid(
    n: usize,
    x_range: (f64, f64),
    amplitude: f64,
    frequency: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    let (lo, hi) = x_range;
    if !(lo < hi) || n == 0 {
        return Err(DataError::InvalidRange(lo, hi));
    }
    let noise = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("positive sigma"))
    } else {
        None
    };
    let cases = (0..n as u64)
        .map(|i| {
            let mut rng = substream(seed, domain::DATA, &[i]);
            let x = lo + (hi - lo) * rng.random::<f64>();
            let mut y = amplitude * (frequency * x).sin();
            if let Some(dist) = &noise {
                y += dist.sample(&mut rng);
            }
            InputCase::new(vec![x], Some(y))
        })
        .collect();
    Ok(Dataset {
        cases,
        name: "sinusoid".into(),
        noise_sigma,
        standardize: false,
    })
}

/// Parse a CSV file (header row, comma-separated, UTF-8, '.' decimal
/// separator, no quoting) into a dataset. Rows are 1-indexed from the first
/// data row; a non-numeric cell in a used column fails the load with its row
/// and column.
pub fn load_csv(
    path: &Path,
    target_column: &str,
    feature_columns: &[String],
    standardize: bool,
) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(DataError::EmptyDataset)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col_index = |name: &str| -> Result<usize, DataError> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let target_idx = col_index(target_column)?;
    let feature_idx: Vec<usize> = feature_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_, _>>()?;

    let mut cases = Vec::new();
    for (row_nr, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = row_nr + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |idx: usize| -> Result<f64, DataError> {
            cells
                .get(idx)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| DataError::ParseError {
                    row,
                    column: columns.get(idx).unwrap_or(&"?").to_string(),
                })
        };
        let features: Vec<f64> = feature_idx
            .iter()
            .map(|&i| parse(i))
            .collect::<Result<_, _>>()?;
        let target = parse(target_idx)?;
        cases.push(InputCase::new(features, Some(target)));
    }
    if cases.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Ok(Dataset {
        cases,
        name,
        noise_sigma: 0.0,
        standardize,
    })
}

/// Seeded shuffle, then contiguous partition. Sizes: floor for train and
/// calibration, remainder to test. The partitions are disjoint and
/// exhaustive.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), DataError> {
    spec.validate()?;
    let n = dataset.cases.len();
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let n_train = (n as f64 * spec.train_frac).floor() as usize;
    let n_cal = (n as f64 * spec.cal_frac).floor() as usize;
    let n_test = n - n_train - n_cal;
    if n_train == 0 || n_cal == 0 || n_test == 0 {
        return Err(DataError::EmptySplit);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(spec.seed, domain::SPLIT, &[n as u64]);
    order.shuffle(&mut rng);
    let part = |range: std::ops::Range<usize>, suffix: &str| Dataset {
        cases: order[range].iter().map(|&i| dataset.cases[i].clone()).collect(),
        name: format!("{}/{suffix}", dataset.name),
        noise_sigma: dataset.noise_sigma,
        standardize: dataset.standardize,
    };
    Ok((
        part(0..n_train, "train"),
        part(n_train..n_train + n_cal, "cal"),
        part(n_train + n_cal..n, "test"),
    ))
}

/// Standardize features of all three splits using mean/std computed from the
/// training split only. Constant columns are left unscaled.
pub fn standardize_by_train(
    train: &mut Dataset,
    cal: &mut Dataset,
    test: &mut Dataset,
) -> Result<(), DataError> {
    let n = train.cases.len();
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }
    let dim = train.cases[0].features.len();
    let mut mean = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for case in &train.cases {
        for ((m, s), &v) in mean.iter_mut().zip(&mut second).zip(&case.features) {
            *m += v;
            *s += v * v;
        }
    }
    let mut std = vec![0.0; dim];
    for j in 0..dim {
        mean[j] /= n as f64;
        std[j] = (second[j] / n as f64 - mean[j] * mean[j]).max(0.0).sqrt();
        if std[j] < 1e-12 {
            std[j] = 1.0;
        }
    }
    for ds in [train, cal, test] {
        for case in &mut ds.cases {
            for (j, f) in case.features.iter_mut().enumerate() {
                *f = (*f - mean[j]) / std[j];
            }
        }
    }
    Ok(())
}
