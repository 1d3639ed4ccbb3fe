//! Query trend model: per-window probability rows over the keyword
//! universe, loaded from CSV or synthesized, and seeded sampling of query
//! streams from them.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{cumulate, sample_cumulative, zipf_weights};
use crate::{Error, Result};

/// Rows are observation windows, columns keywords; every row sums to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendMatrix {
    probs: Vec<Vec<f64>>,
}

impl TrendMatrix {
    /// Normalize and validate raw weight rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument(
                "trend matrix needs at least one window and one keyword".into(),
            ));
        }
        let width = rows[0].len();
        let mut probs = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidArgument(format!(
                    "trend row {i} has {} entries, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|&w| !w.is_finite() || w < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "trend row {i} contains a negative or non-finite weight"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::InvalidArgument(format!("trend row {i} sums to zero")));
            }
            probs.push(row.into_iter().map(|w| w / sum).collect());
        }
        Ok(TrendMatrix { probs })
    }

    pub fn uniform(windows: usize, n_kw: usize) -> Self {
        TrendMatrix::from_rows(vec![vec![1.0; n_kw]; windows]).expect("uniform rows are valid")
    }

    pub fn windows(&self) -> usize {
        self.probs.len()
    }

    pub fn keywords(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, window: usize) -> &[f64] {
        &self.probs[window]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TrendMode {
    /// The same Zipf row repeated across windows.
    Zipf { s: f64 },
    /// Zipf base row whose log-weights take a Gaussian random walk across
    /// windows, so the hot set drifts.
    Drifting { s: f64, jitter: f64 },
}

/// Synthesize a trend matrix. Deterministic per seed; the Zipf ranks are a
/// seeded permutation of the keyword indices so the hot keyword is not
/// always index 0.
pub fn synth_trends(windows: usize, n_kw: usize, mode: TrendMode, seed: u64) -> Result<TrendMatrix> {
    if windows == 0 || n_kw == 0 {
        return Err(Error::InvalidArgument(
            "trend synthesis needs positive window and keyword counts".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ranks: Vec<usize> = (0..n_kw).collect();
    for i in (1..n_kw).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        ranks.swap(i, j);
    }
    let base_by_rank = |s: f64| {
        let w = zipf_weights(n_kw, s);
        let mut row = vec![0.0; n_kw];
        for (kw, &rank) in ranks.iter().enumerate() {
            row[kw] = w[rank];
        }
        row
    };
    let rows = match mode {
        TrendMode::Zipf { s } => vec![base_by_rank(s); windows],
        TrendMode::Drifting { s, jitter } => {
            let normal = Normal::new(0.0, jitter.max(0.0)).map_err(|e| {
                Error::InvalidArgument(format!("bad drift jitter: {e}"))
            })?;
            let mut logw: Vec<f64> = base_by_rank(s).iter().map(|w| w.ln()).collect();
            let mut rows = Vec::with_capacity(windows);
            for _ in 0..windows {
                rows.push(logw.iter().map(|lw| lw.exp()).collect());
                for lw in logw.iter_mut() {
                    *lw += normal.sample(&mut rng);
                }
            }
            rows
        }
    };
    TrendMatrix::from_rows(rows)
}

/// Load a trend CSV: header row of keyword names, then one weight row per
/// window. Returns the column names alongside the normalized matrix.
pub fn load_trend_csv(path: &Path) -> Result<(Vec<String>, TrendMatrix)> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::TrendParse {
            path: display.clone(),
            detail: e.to_string(),
        })?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::TrendParse {
            path: display.clone(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::TrendParse {
            path: display,
            detail: "empty header row".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::TrendParse {
            path: display.clone(),
            detail: format!("row {}: {e}", i + 1),
        })?;
        if record.len() != names.len() {
            return Err(Error::TrendParse {
                path: display,
                detail: format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    record.len(),
                    names.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for field in record.iter() {
            let w: f64 = field.parse().map_err(|_| Error::TrendParse {
                path: display.clone(),
                detail: format!("row {}: non-numeric weight {field:?}", i + 1),
            })?;
            row.push(w);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::TrendParse {
            path: display,
            detail: "no weight rows".into(),
        });
    }
    let matrix = TrendMatrix::from_rows(rows).map_err(|e| Error::TrendParse {
        path: display,
        detail: e.to_string(),
    })?;
    Ok((names, matrix))
}

/// A sampled client query stream: (window, keyword) pairs in issue order,
/// with a constant per-window query count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStream {
    pub per_window: u32,
    pub queries: Vec<(u32, u32)>,
}

impl QueryStream {
    pub fn keywords(&self) -> impl Iterator<Item = u32> + '_ {
        self.queries.iter().map(|&(_, kw)| kw)
    }
}

/// Draw `per_window` iid queries from each trend row in `windows`.
pub fn sample_queries(
    trend: &TrendMatrix,
    per_window: u32,
    windows: Range<u32>,
    seed: u64,
) -> Result<QueryStream> {
    if per_window == 0 {
        return Err(Error::InvalidArgument("per_window must be positive".into()));
    }
    if windows.end as usize > trend.windows() || windows.start >= windows.end {
        return Err(Error::InvalidArgument(format!(
            "window range {windows:?} outside the {}-window trend",
            trend.windows()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity((windows.len() * per_window as usize).max(1));
    for w in windows {
        let cum = cumulate(trend.row(w as usize));
        for _ in 0..per_window {
            queries.push((w, sample_cumulative(&mut rng, &cum) as u32));
        }
    }
    Ok(QueryStream {
        per_window,
        queries,
    })
}

/// Fraction of each window's queries whose keyword is first seen in that
/// window. Returned in ascending window order for the windows present.
pub fn new_query_rate(stream: &QueryStream) -> Vec<f64> {
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut windows: Vec<u32> = stream.queries.iter().map(|&(w, _)| w).collect();
    windows.dedup();
    let mut rates = Vec::with_capacity(windows.len());
    let mut iter = stream.queries.iter().peekable();
    for w in windows {
        let mut fresh = 0u32;
        while let Some(&&(qw, kw)) = iter.peek() {
            if qw != w {
                break;
            }
            if seen.insert(kw) {
                fresh += 1;
            }
            iter.next();
        }
        rates.push(fresh as f64 / stream.per_window as f64);
    }
    rates
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rows_normalize_and_reject_bad_input() {
        let m = TrendMatrix::from_rows(vec![vec![3.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(m.row(0), &[0.75, 0.25]);
        assert_eq!(m.row(1), &[0.5, 0.5]);
        assert!(TrendMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(TrendMatrix::from_rows(vec![vec![0.0, 0.0]]).is_err());
        assert!(TrendMatrix::from_rows(vec![vec![-1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trend.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "alpha,beta\n3,1\n1,1").unwrap();
        drop(f);
        let (names, m) = load_trend_csv(&path).unwrap();
        assert_eq!(names, vec!["alpha", "beta"]);
        assert_eq!(m.row(0), &[0.75, 0.25]);

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
        assert!(matches!(
            load_trend_csv(&ragged),
            Err(Error::TrendParse { .. })
        ));

        let nonnum = dir.path().join("nonnum.csv");
        std::fs::write(&nonnum, "a,b\n1,x\n").unwrap();
        assert!(load_trend_csv(&nonnum).is_err());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "a,b\n").unwrap();
        assert!(load_trend_csv(&empty).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_window_tagged() {
        let trend = synth_trends(4, 8, TrendMode::Zipf { s: 1.0 }, 9).unwrap();
        let a = sample_queries(&trend, 100, 1..3, 5).unwrap();
        let b = sample_queries(&trend, 100, 1..3, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.queries.len(), 200);
        assert!(a.queries[..100].iter().all(|&(w, _)| w == 1));
        assert!(a.queries[100..].iter().all(|&(w, _)| w == 2));
        assert!(a.keywords().all(|kw| kw < 8));
        assert_ne!(a, sample_queries(&trend, 100, 1..3, 6).unwrap());
        assert!(sample_queries(&trend, 100, 3..5, 0).is_err());
        assert!(sample_queries(&trend, 0, 0..1, 0).is_err());
    }

    #[test]
    fn zipf_mode_repeats_rows_and_skews_mass() {
        let trend = synth_trends(3, 16, TrendMode::Zipf { s: 1.5 }, 2).unwrap();
        assert_eq!(trend.row(0), trend.row(1));
        assert_eq!(trend.row(0), trend.row(2));
        let mut sorted: Vec<f64> = trend.row(0).to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(sorted[0] > 10.0 * sorted[15]);
    }

    #[test]
    fn drifting_mode_changes_rows() {
        let trend = synth_trends(3, 16, TrendMode::Drifting { s: 1.0, jitter: 0.8 }, 2).unwrap();
        assert_ne!(trend.row(0), trend.row(1));
        assert_ne!(trend.row(1), trend.row(2));
    }

    #[test]
    fn new_query_rate_counts_first_appearances() {
        let stream = QueryStream {
            per_window: 4,
            queries: vec![
                (0, 1),
                (0, 2),
                (0, 1),
                (0, 3),
                (1, 1),
                (1, 4),
                (1, 4),
                (1, 2),
            ],
        };
        assert_eq!(new_query_rate(&stream), vec![0.75, 0.25]);
    }

    // Derived check, frozen from a 30-run Monte-Carlo: on Zipf streams the
    // mean new-query rate decreases across windows.
    #[test]
    fn new_query_rate_decreases_on_zipf_streams() {
        let windows = 5usize;
        let mut mean = vec![0.0f64; windows];
        for seed in 0..30u64 {
            let trend = synth_trends(windows, 64, TrendMode::Zipf { s: 1.0 }, seed).unwrap();
            let stream = sample_queries(&trend, 200, 0..windows as u32, 1000 + seed).unwrap();
            for (i, r) in new_query_rate(&stream).iter().enumerate() {
                mean[i] += r / 30.0;
            }
        }
        for w in 1..windows {
            assert!(
                mean[w] < mean[w - 1],
                "mean new-query rate not decreasing: {mean:?}"
            );
        }
    }
}
