//! Time-series ingestion, min-max normalization, train/test splitting
//! and a bundled synthetic benchmark generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub column_names: Vec<String>,
    /// Rectangular rows, no gaps.
    pub rows: Vec<Vec<f64>>,
    pub input_cols: Vec<usize>,
    pub target_col: usize,
    /// Rows dropped during ingestion because of missing cells.
    pub dropped_rows: usize,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.input_cols.len()
    }

    pub fn input_value(&self, t: usize, channel: usize) -> f64 {
        self.rows[t][self.input_cols[channel]]
    }

    pub fn target_value(&self, t: usize) -> f64 {
        self.rows[t][self.target_col]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_len: usize,
    pub test_len: usize,
    pub horizon: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_len: 1875, test_len: 625, horizon: 1 }
    }
}

impl SplitSpec {
    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.train_len + self.test_len > series_len {
            return Err(Error::Config(format!(
                "split {} + {} exceeds series length {}",
                self.train_len, self.test_len, series_len
            )));
        }
        Ok(())
    }
}

/// Per-column min/max kept so predictions can be de-normalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRecord {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormRecord {
    pub fn denormalize(&self, col: usize, v: f64) -> f64 {
        self.mins[col] + v * (self.maxs[col] - self.mins[col])
    }
}

pub fn load_csv(path: &Path, input_cols: &[String], target_col: &str) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("missing header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column '{name}' not found in {headers:?}")))
    };
    let input_idx: Vec<usize> = input_cols.iter().map(|c| col_index(c)).collect::<Result<_>>()?;
    let target_idx = col_index(target_col)?;

    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("malformed CSV record: {e}")))?;
        let mut row = Vec::with_capacity(record.len());
        let mut gap = false;
        for cell in record.iter() {
            let cell = cell.trim();
            if cell.is_empty() {
                gap = true;
                break;
            }
            match cell.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    return Err(Error::Data(format!("non-numeric cell '{cell}'")));
                }
            }
        }
        if gap {
            dropped += 1;
        } else {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} contains no data rows", path.display())));
    }
    Ok(TimeSeries {
        column_names: headers,
        rows,
        input_cols: input_idx,
        target_col: target_idx,
        dropped_rows: dropped,
    })
}

/// Min-max scale every used column into [0,1]. A constant target column
/// is an error; a constant input column is dropped with a note.
pub fn normalize(series: &TimeSeries) -> Result<(TimeSeries, NormRecord, Vec<String>)> {
    let cols = series.column_names.len();
    let mut mins = vec![f64::INFINITY; cols];
    let mut maxs = vec![f64::NEG_INFINITY; cols];
    for row in &series.rows {
        for (c, &v) in row.iter().enumerate() {
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    if maxs[series.target_col] <= mins[series.target_col] {
        return Err(Error::Data(format!(
            "target column '{}' is constant",
            series.column_names[series.target_col]
        )));
    }
    let mut warnings = Vec::new();
    let mut kept_inputs = Vec::new();
    for &c in &series.input_cols {
        if maxs[c] <= mins[c] {
            warnings.push(format!(
                "dropping constant input column '{}'",
                series.column_names[c]
            ));
        } else {
            kept_inputs.push(c);
        }
    }
    if kept_inputs.is_empty() {
        return Err(Error::Data("all input columns are constant".into()));
    }
    let rows = series
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(c, &v)| {
                    if maxs[c] > mins[c] {
                        (v - mins[c]) / (maxs[c] - mins[c])
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    Ok((
        TimeSeries {
            column_names: series.column_names.clone(),
            rows,
            input_cols: kept_inputs,
            target_col: series.target_col,
            dropped_rows: series.dropped_rows,
        },
        NormRecord { mins, maxs },
        warnings,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthKind {
    SineMix,
    Ramp,
}

/// Deterministic multivariate benchmark series: two phase-shifted
/// sinusoid channels, one lagged copy of the target, and the target
/// itself.
pub fn synth_series(kind: SynthKind, length: usize, noise_sd: f64, seed: u64) -> Result<TimeSeries> {
    if length < 50 {
        return Err(Error::Config(format!("synthetic length {length} < 50")));
    }
    const LAG: usize = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target: Vec<f64> = (0..length)
        .map(|t| {
            let base = match kind {
                SynthKind::SineMix => {
                    let x = t as f64;
                    0.6 * (x * 0.12).sin() + 0.4 * (x * 0.041).sin()
                }
                SynthKind::Ramp => {
                    let period = 40.0;
                    ((t as f64 % period) / period) * 2.0 - 1.0
                }
            };
            if noise_sd > 0.0 {
                // Box-Muller
                let u1: f64 = rng.gen::<f64>().max(1e-12);
                let u2: f64 = rng.gen();
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                base + noise_sd * z
            } else {
                base
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..length)
        .map(|t| {
            let x = t as f64;
            let s1 = (x * 0.12 + 0.7).sin();
            let s2 = (x * 0.041 + 1.9).sin();
            let lagged = if t >= LAG { target[t - LAG] } else { target[0] };
            vec![s1, s2, lagged, target[t]]
        })
        .collect();
    Ok(TimeSeries {
        column_names: vec![
            "sin_a".into(),
            "sin_b".into(),
            "target_lag2".into(),
            "target".into(),
        ],
        rows,
        input_cols: vec![0, 1, 2],
        target_col: 3,
        dropped_rows: 0,
    })
}

/// A normalized series cut into train and validation ranges with a
/// horizon-shifted target. `target(t)` is the series target at
/// `t + horizon`; ranges never cross the split boundary.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// inputs[channel][t]
    pub inputs: Vec<Vec<f64>>,
    /// targets[t] = raw target at t + horizon
    pub targets: Vec<f64>,
    pub train_range: std::ops::Range<usize>,
    pub valid_range: std::ops::Range<usize>,
}

impl Dataset {
    pub fn prepare(series: &TimeSeries, split: &SplitSpec) -> Result<Dataset> {
        split.validate(series.len())?;
        let usable = series.len() - split.horizon;
        let channels = series.input_count();
        let inputs: Vec<Vec<f64>> = (0..channels)
            .map(|c| (0..usable).map(|t| series.input_value(t, c)).collect())
            .collect();
        let targets: Vec<f64> = (0..usable)
            .map(|t| series.target_value(t + split.horizon))
            .collect();
        let train_end = split.train_len.min(usable);
        let valid_end = (split.train_len + split.test_len).min(usable);
        Ok(Dataset {
            inputs,
            targets,
            train_range: 0..train_end,
            valid_range: train_end..valid_end,
        })
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_small_fixture() {
        let f = write_csv("a,b,c\n1,2,3\n4,5,6\n7,8,9\n");
        let ts = load_csv(f.path(), &["a".into(), "b".into()], "c").unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.input_count(), 2);
        assert_eq!(ts.target_value(1), 6.0);
        assert_eq!(ts.dropped_rows, 0);
    }

    #[test]
    fn blank_cell_drops_row() {
        let f = write_csv("a,b\n1,2\n,3\n4,5\n");
        let ts = load_csv(f.path(), &["a".into()], "b").unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.dropped_rows, 1);
    }

    #[test]
    fn distinct_ingestion_errors() {
        let f = write_csv("a,b\n1,2\n");
        let err = load_csv(f.path(), &["nope".into()], "b").unwrap_err();
        assert!(err.to_string().contains("nope"));

        let f = write_csv("a,b\n1,x\n");
        assert!(load_csv(f.path(), &["a".into()], "b").is_err());

        let f = write_csv("a,b\n");
        assert!(load_csv(f.path(), &["a".into()], "b").is_err());
    }

    #[test]
    fn normalize_scales_and_round_trips() {
        let f = write_csv("a,t\n2,10\n4,20\n6,30\n");
        let ts = load_csv(f.path(), &["a".into()], "t").unwrap();
        let (norm, record, warnings) = normalize(&ts).unwrap();
        assert!(warnings.is_empty());
        let col: Vec<f64> = norm.rows.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        for (row, orig) in norm.rows.iter().zip(ts.rows.iter()) {
            for c in 0..2 {
                assert!((record.denormalize(c, row[c]) - orig[c]).abs() < 1e-12);
            }
        }
        // idempotent on already-normalized data
        let (again, _, _) = normalize(&norm).unwrap();
        for (a, b) in again.rows.iter().zip(norm.rows.iter()) {
            for c in 0..2 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_constant_columns() {
        let f = write_csv("a,b,t\n5,1,10\n5,2,20\n");
        let ts = load_csv(f.path(), &["a".into(), "b".into()], "t").unwrap();
        let (norm, _, warnings) = normalize(&ts).unwrap();
        assert_eq!(norm.input_count(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains('a'));

        let f = write_csv("a,t\n1,5\n2,5\n");
        let ts = load_csv(f.path(), &["a".into()], "t").unwrap();
        assert!(normalize(&ts).is_err());
    }

    #[test]
    fn synth_series_properties() {
        // noiseless sine mix replays exactly
        let a = synth_series(SynthKind::SineMix, 200, 0.0, 1).unwrap();
        let b = synth_series(SynthKind::SineMix, 200, 0.0, 1).unwrap();
        assert_eq!(a.rows, b.rows);
        // same seed with noise replays too
        let a = synth_series(SynthKind::SineMix, 200, 0.05, 9).unwrap();
        let b = synth_series(SynthKind::SineMix, 200, 0.05, 9).unwrap();
        assert_eq!(a.rows, b.rows);
        // lagged channel equals the target shifted by 2
        for t in 2..200 {
            assert_eq!(a.input_value(t, 2), a.target_value(t - 2));
        }
        // ramp is exactly periodic without noise
        let r = synth_series(SynthKind::Ramp, 200, 0.0, 0).unwrap();
        for t in 0..160 {
            assert!((r.target_value(t) - r.target_value(t + 40)).abs() < 1e-12);
        }
        assert!(synth_series(SynthKind::Ramp, 10, 0.0, 0).is_err());
    }

    #[test]
    fn split_never_leaks() {
        let series = synth_series(SynthKind::SineMix, 300, 0.0, 3).unwrap();
        let (norm, _, _) = normalize(&series).unwrap();
        let split = SplitSpec { train_len: 200, test_len: 80, horizon: 1 };
        let ds = Dataset::prepare(&norm, &split).unwrap();
        assert!(ds.train_range.end <= ds.valid_range.start);
        assert!(ds.valid_range.end <= ds.len());
        // horizon-shifted target: targets[t] is the series value at t+1
        for t in 0..ds.len() {
            assert_eq!(ds.targets[t], norm.target_value(t + 1));
        }
        let bad = SplitSpec { train_len: 300, test_len: 80, horizon: 1 };
        assert!(Dataset::prepare(&norm, &bad).is_err());
    }
}
