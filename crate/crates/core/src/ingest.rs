//! Data ingestion: CSV quote loading, log-returns, normalization,
//! multi-instrument alignment, sub-period windowing and lag shifting.
//!
//! All operations are pure; every type is immutable after construction and
//! safe to share across threads.

use std::collections::HashSet;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};

/// Raw quote series as parsed from a file: strictly increasing timestamps
/// and positive prices.
#[derive(Debug, Clone)]
pub struct RawQuoteSeries {
    pub instrument_id: String,
    /// Epoch seconds, strictly increasing.
    pub timestamps: Vec<i64>,
    /// Quote prices, all > 0, same length as `timestamps`.
    pub prices: Vec<f64>,
    /// Nominal seconds between quotes (300 for 5-min bars).
    pub bar_interval: i64,
}

impl RawQuoteSeries {
    pub fn new(
        instrument_id: impl Into<String>,
        timestamps: Vec<i64>,
        prices: Vec<f64>,
        bar_interval: i64,
    ) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::LengthMismatch {
                left: timestamps.len(),
                right: prices.len(),
            });
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneTimestamps {
                    index: i + 1,
                    timestamp: w[1],
                });
            }
        }
        if let Some((i, &p)) = prices
            .iter()
            .enumerate()
            .find(|(_, &p)| p.is_nan() || p <= 0.0)
        {
            return Err(Error::invalid(format!(
                "non-positive price {p} at index {i}"
            )));
        }
        Ok(Self {
            instrument_id: instrument_id.into(),
            timestamps,
            prices,
            bar_interval,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// A uniformly indexed sequence of (optionally normalized) log-returns.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnSeries {
    pub instrument_id: String,
    pub values: Vec<f64>,
    /// True once the series has been centered and scaled to unit standard
    /// deviation.
    pub normalized: bool,
    /// Sub-period label such as "2014H2", when the series is a window.
    pub window_label: Option<String>,
}

impl ReturnSeries {
    pub fn new(instrument_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            instrument_id: instrument_id.into(),
            values,
            normalized: false,
            window_label: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample standard deviation (divisor n-1).
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (self.values.len() as f64 - 1.0)).sqrt()
    }
}

/// Instruments aligned onto a common clock. A timestamp is retained only if
/// every instrument has a quote there; columns all have identical length and
/// index-for-index timestamps.
#[derive(Debug, Clone)]
pub struct AlignedPanel {
    /// Timestamp of each return (the later endpoint of the price interval).
    pub timestamps: Vec<i64>,
    pub columns: Vec<ReturnSeries>,
}

impl AlignedPanel {
    pub fn column(&self, instrument_id: &str) -> Option<&ReturnSeries> {
        self.columns.iter().find(|c| c.instrument_id == instrument_id)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time_col: String,
    pub price_col: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_col: "timestamp".into(),
            price_col: "price".into(),
        }
    }
}

/// Result of a CSV load: the parsed series plus the number of rows rejected
/// for a non-positive or non-numeric price.
#[derive(Debug)]
pub struct CsvLoadResult {
    pub series: RawQuoteSeries,
    pub rejected_rows: usize,
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(t) = raw.parse::<i64>() {
        return Some(t);
    }
    // "YYYY-MM-DD HH:MM:SS", UTC assumed.
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

/// Load a quote series from a comma-delimited, UTF-8 CSV file with a header
/// row. Rows with a non-positive or non-numeric price are rejected and
/// counted; a non-monotone timestamp among the retained rows is an error
/// naming the first offending data row.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    instrument_id: impl Into<String>,
    bar_interval: i64,
) -> Result<CsvLoadResult> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let find_col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::invalid(format!("column '{name}' not found in {}", path.display())))
    };
    let t_idx = find_col(&schema.time_col)?;
    let p_idx = find_col(&schema.price_col)?;

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    let mut rejected = 0usize;

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let t = record
            .get(t_idx)
            .and_then(parse_timestamp)
            .ok_or_else(|| Error::invalid(format!("unparseable timestamp at data row {row}")))?;
        let p = record
            .get(p_idx)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|p| *p > 0.0 && p.is_finite());
        match p {
            Some(p) => {
                if let Some(&last) = timestamps.last() {
                    if t <= last {
                        return Err(Error::NonMonotoneTimestamps {
                            index: row,
                            timestamp: t,
                        });
                    }
                }
                timestamps.push(t);
                prices.push(p);
            }
            None => rejected += 1,
        }
    }

    if prices.is_empty() {
        return Err(Error::NoValidRows {
            path: path.display().to_string(),
        });
    }

    let series = RawQuoteSeries::new(instrument_id, timestamps, prices, bar_interval)?;
    Ok(CsvLoadResult {
        series,
        rejected_rows: rejected,
    })
}

/// Logarithmic returns r(t) = ln p(t+1) - ln p(t). Output length is input
/// length minus one.
pub fn log_returns(series: &RawQuoteSeries) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let values = series
        .prices
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    Ok(ReturnSeries::new(series.instrument_id.clone(), values))
}

/// Center to mean zero and scale to unit sample standard deviation
/// (divisor n-1).
pub fn normalize(series: &ReturnSeries) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    let mean = series.mean();
    let sd = series.std_dev();
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let values = series.values.iter().map(|v| (v - mean) / sd).collect();
    Ok(ReturnSeries {
        instrument_id: series.instrument_id.clone(),
        values,
        normalized: true,
        window_label: series.window_label.clone(),
    })
}

/// Options controlling panel alignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlignOptions {
    /// Drop returns that span a removed gap (timestamp delta larger than the
    /// nominal bar interval). Default keeps them: the grid is intersected on
    /// prices first and differencing runs across gaps.
    pub drop_gap_returns: bool,
}

/// Align instruments onto the intersection of their timestamp grids and
/// compute log-returns on the retained grid. Each return carries the later
/// endpoint of its price interval as its timestamp.
pub fn align(series: &[RawQuoteSeries], opts: AlignOptions) -> Result<AlignedPanel> {
    if series.len() < 2 {
        return Err(Error::invalid("alignment needs at least 2 series"));
    }

    let mut common: HashSet<i64> = series[0].timestamps.iter().copied().collect();
    for s in &series[1..] {
        let other: HashSet<i64> = s.timestamps.iter().copied().collect();
        common.retain(|t| other.contains(t));
    }
    if common.len() < 2 {
        return Err(Error::EmptyIntersection);
    }

    let mut retained: Vec<i64> = common.into_iter().collect();
    retained.sort_unstable();

    // Indices of the retained grid where the return does not span a gap.
    let bar = series[0].bar_interval.max(1);
    let keep_return = |i: usize| -> bool {
        !opts.drop_gap_returns || retained[i + 1] - retained[i] <= bar
    };

    let mut columns = Vec::with_capacity(series.len());
    for s in series {
        let keep: HashSet<i64> = retained.iter().copied().collect();
        let prices: Vec<f64> = s
            .timestamps
            .iter()
            .zip(&s.prices)
            .filter(|(t, _)| keep.contains(t))
            .map(|(_, p)| *p)
            .collect();
        debug_assert_eq!(prices.len(), retained.len());
        let values: Vec<f64> = prices
            .windows(2)
            .enumerate()
            .filter(|(i, _)| keep_return(*i))
            .map(|(_, w)| w[1].ln() - w[0].ln())
            .collect();
        columns.push(ReturnSeries::new(s.instrument_id.clone(), values));
    }

    let timestamps: Vec<i64> = (0..retained.len() - 1)
        .filter(|&i| keep_return(i))
        .map(|i| retained[i + 1])
        .collect();

    if timestamps.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(AlignedPanel { timestamps, columns })
}

/// Windowing scheme for sub-period analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowScheme {
    /// Disjoint calendar half-years, labelled like "2014H2".
    HalfYear,
    /// A fixed number of equal windows; earlier windows take the remainder.
    FixedCount(usize),
}

/// One window of a split series, with a short-window flag set when the
/// window is below the configured minimum usable length.
#[derive(Debug, Clone)]
pub struct Window {
    pub series: ReturnSeries,
    pub flagged_short: bool,
}

/// Split a series into disjoint, exhaustive windows. `timestamps` must
/// parallel `series.values` and is required for the calendar scheme.
/// Windows shorter than `min_len` are flagged, never dropped.
pub fn split_windows(
    series: &ReturnSeries,
    timestamps: Option<&[i64]>,
    scheme: WindowScheme,
    min_len: usize,
) -> Result<Vec<Window>> {
    let n = series.len();
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }

    let make = |label: String, values: Vec<f64>| -> Window {
        let flagged_short = values.len() < min_len;
        Window {
            series: ReturnSeries {
                instrument_id: series.instrument_id.clone(),
                values,
                normalized: series.normalized,
                window_label: Some(label),
            },
            flagged_short,
        }
    };

    match scheme {
        WindowScheme::FixedCount(k) => {
            if k == 0 || k > n {
                return Err(Error::invalid(format!(
                    "cannot split {n} points into {k} windows"
                )));
            }
            let base = n / k;
            let extra = n % k;
            let mut out = Vec::with_capacity(k);
            let mut start = 0usize;
            for w in 0..k {
                let len = base + usize::from(w < extra);
                out.push(make(
                    format!("W{}", w + 1),
                    series.values[start..start + len].to_vec(),
                ));
                start += len;
            }
            Ok(out)
        }
        WindowScheme::HalfYear => {
            let ts = timestamps.ok_or_else(|| {
                Error::invalid("calendar windowing needs timestamps")
            })?;
            if ts.len() != n {
                return Err(Error::LengthMismatch {
                    left: ts.len(),
                    right: n,
                });
            }
            let mut out: Vec<Window> = Vec::new();
            let mut cur_label = String::new();
            let mut cur: Vec<f64> = Vec::new();
            for (i, &t) in ts.iter().enumerate() {
                let label = half_year_label(t);
                if label != cur_label && !cur.is_empty() {
                    out.push(make(cur_label.clone(), std::mem::take(&mut cur)));
                }
                cur_label = label;
                cur.push(series.values[i]);
            }
            if !cur.is_empty() {
                out.push(make(cur_label, cur));
            }
            Ok(out)
        }
    }
}

/// Calendar half-year label for an epoch-seconds timestamp (UTC).
pub fn half_year_label(epoch_seconds: i64) -> String {
    let dt = chrono::DateTime::from_timestamp(epoch_seconds, 0)
        .unwrap_or_else(|| chrono::DateTime::from_timestamp(0, 0).unwrap());
    let half = if dt.month() <= 6 { 1 } else { 2 };
    format!("{}H{}", dt.year(), half)
}

/// Shift a pair relative to each other. A positive lag retards `y` by `lag`
/// steps relative to `x` (x leads): the outputs pair x[t] with y[t+lag] and
/// are truncated to the overlapping length n - |lag|.
pub fn shift_pair(
    x: &ReturnSeries,
    y: &ReturnSeries,
    lag: i64,
) -> Result<(ReturnSeries, ReturnSeries)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    let k = lag.unsigned_abs() as usize;
    if k >= n {
        return Err(Error::LagTooLarge { lag, len: n });
    }
    let (xs, ys) = if lag >= 0 {
        (&x.values[..n - k], &y.values[k..])
    } else {
        (&x.values[k..], &y.values[..n - k])
    };
    let mk = |src: &ReturnSeries, v: &[f64]| ReturnSeries {
        instrument_id: src.instrument_id.clone(),
        values: v.to_vec(),
        normalized: src.normalized,
        window_label: src.window_label.clone(),
    };
    Ok((mk(x, xs), mk(y, ys)))
}
