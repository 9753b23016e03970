//! Empirical complementary cumulative distributions of normalized returns
//! (positive and negative tails fitted separately) and power-law tail
//! exponent estimation, with the inverse cubic law as the reference regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::mfdfa::ols;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailSide {
    Positive,
    Negative,
}

impl TailSide {
    pub fn name(&self) -> &'static str {
        match self {
            TailSide::Positive => "positive",
            TailSide::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailMethod {
    /// Least squares of ln P(>=r) on ln r over the top quantile.
    Ols,
    /// Hill estimator over the same points; stderr gamma/sqrt(k).
    Hill,
}

/// Sampled survival function P(>=r) of one side's magnitudes.
#[derive(Debug, Clone, Serialize)]
pub struct CcdfCurve {
    pub side: TailSide,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

/// Power-law tail fit P(>=r) ~ r^(-gamma) of one side.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub side: TailSide,
    pub method: TailMethod,
    pub gamma: f64,
    pub gamma_stderr: f64,
    pub fit_quantile: f64,
    pub n_tail: usize,
    /// Goodness of the log-log fit; NaN for the Hill method, which has no
    /// regression residual.
    pub r_squared: f64,
}

fn side_magnitudes(series: &ReturnSeries, side: TailSide) -> Result<Vec<f64>> {
    if !series.normalized {
        return Err(Error::invalid(
            "tail analysis requires a normalized series",
        ));
    }
    let mags: Vec<f64> = match side {
        TailSide::Positive => series.values.iter().copied().filter(|v| *v > 0.0).collect(),
        TailSide::Negative => series
            .values
            .iter()
            .filter(|v| **v < 0.0)
            .map(|v| -v)
            .collect(),
    };
    if mags.is_empty() {
        return Err(Error::EmptyTail { side: side.name() });
    }
    Ok(mags)
}

/// Rank-based survival function of the selected side's magnitudes. Tied
/// values collapse to one point, so P is strictly decreasing in r.
pub fn ccdf(series: &ReturnSeries, side: TailSide) -> Result<CcdfCurve> {
    let mut mags = side_magnitudes(series, side)?;
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = mags.len();
    let mut r = Vec::new();
    let mut p = Vec::new();
    let mut i = 0usize;
    while i < n {
        r.push(mags[i]);
        p.push((n - i) as f64 / n as f64);
        let v = mags[i];
        while i < n && mags[i] == v {
            i += 1;
        }
    }
    Ok(CcdfCurve { side, r, p })
}

/// Minimum number of tail points for a reported fit.
pub const MIN_TAIL_POINTS: usize = 50;

/// Estimate the tail exponent gamma over the top `fit_quantile` of the
/// side's magnitudes.
pub fn tail_exponent(
    series: &ReturnSeries,
    side: TailSide,
    fit_quantile: f64,
    method: TailMethod,
) -> Result<TailFit> {
    if !(fit_quantile > 0.0 && fit_quantile < 0.5) {
        return Err(Error::invalid(format!(
            "fit quantile {fit_quantile} must lie in (0, 0.5)"
        )));
    }
    let mut mags = side_magnitudes(series, side)?;
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n_side = mags.len();
    let k = ((fit_quantile * n_side as f64).floor() as usize).min(n_side.saturating_sub(1));
    if k < MIN_TAIL_POINTS {
        return Err(Error::TooFewTailPoints {
            needed: MIN_TAIL_POINTS,
            got: k,
        });
    }
    if mags[0] <= mags[k - 1] {
        return Err(Error::invalid("zero spread in the fitted tail"));
    }

    match method {
        TailMethod::Ols => {
            let ln_r: Vec<f64> = mags[..k].iter().map(|v| v.ln()).collect();
            let ln_p: Vec<f64> = (1..=k)
                .map(|i| (i as f64 / n_side as f64).ln())
                .collect();
            let (slope, _, r2, stderr) = ols(&ln_r, &ln_p);
            let gamma = -slope;
            if gamma.is_nan() || gamma <= 0.0 {
                return Err(Error::invalid(format!(
                    "tail does not decay as a power law (gamma = {gamma})"
                )));
            }
            Ok(TailFit {
                side,
                method,
                gamma,
                gamma_stderr: stderr,
                fit_quantile,
                n_tail: k,
                r_squared: r2,
            })
        }
        TailMethod::Hill => {
            let threshold = mags[k];
            if threshold <= 0.0 {
                return Err(Error::invalid("zero spread in the fitted tail"));
            }
            let sum_log: f64 = mags[..k].iter().map(|v| (v / threshold).ln()).sum();
            if sum_log <= 0.0 {
                return Err(Error::invalid("zero spread in the fitted tail"));
            }
            let gamma = k as f64 / sum_log;
            Ok(TailFit {
                side,
                method,
                gamma,
                gamma_stderr: gamma / (k as f64).sqrt(),
                fit_quantile,
                n_tail: k,
                r_squared: f64::NAN,
            })
        }
    }
}
