//! Multifractal cross-correlation analysis of a pair: sign-preserving
//! q-order cross-covariance fluctuation functions, cross-scaling exponents
//! lambda(q), the average Hurst exponent h_xy(q) and the gap
//! d_xy(q) = lambda(q) - h_xy(q), plus the Cauchy-Schwarz bound check.
//!
//! Cross-covariances carry a sign per box. The q-th order moment keeps that
//! sign, and the fluctuation value is the signed 1/q-th root. Scaling of the
//! cross moments is typically seen only above some minimum q; below it the
//! moments fluctuate irregularly around zero and the fit is withheld.

use rayon::prelude::*;
use serde::Serialize;

use crate::detrend::{self, ScaleGrid};
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::mfdfa::{ols, zero_threshold, FluctuationSurface, QFit, QGrid, ScalingFit};

/// Relative factor for the near-zero moment mask.
const NEAR_ZERO_REL: f64 = 1e-12;

/// Numerical slack for the Cauchy-Schwarz bound.
const CS_SLACK: f64 = 1e-9;

/// Signed cross-covariance fluctuation surface.
///
/// `signed_values[qi][si]` is F_XY(q,s) = sign(F^q) |F^q|^(1/q);
/// `raw_moments[qi][si]` is the signed q-th order moment F_XY^q(s) itself.
/// Cells whose moment magnitude falls below a scale-aware epsilon are
/// marked in `near_zero`; they are computed but treated as scaling
/// breakdown by the fits.
#[derive(Debug, Clone, Serialize)]
pub struct CrossSurface {
    pub qgrid: QGrid,
    pub scales: ScaleGrid,
    pub signed_values: Vec<Vec<f64>>,
    pub raw_moments: Vec<Vec<f64>>,
    pub near_zero: Vec<Vec<bool>>,
    /// Boxes excluded per cell under the zero-covariance rule (q <= 0 only).
    pub excluded: Vec<Vec<usize>>,
    pub total_boxes: Vec<usize>,
}

impl CrossSurface {
    /// A cell is usable for lambda fitting when its signed value is positive,
    /// finite and not masked as near-zero.
    pub fn usable_for_fit(&self, qi: usize, si: usize) -> bool {
        let v = self.signed_values[qi][si];
        v.is_finite() && v > 0.0 && !self.near_zero[qi][si]
    }
}

fn sign_of(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct CrossCell {
    moment: f64,
    signed_root: f64,
    excluded: usize,
}

/// Aggregate per-box signed covariances into one (q, s) cell.
fn cross_cell(fxy: &[f64], q: f64, zero_thresh: f64) -> CrossCell {
    let n = fxy.len();
    if q > 0.0 {
        let sum: f64 = fxy
            .iter()
            .map(|&v| sign_of(v) * v.abs().powf(q / 2.0))
            .sum();
        let moment = sum / n as f64;
        CrossCell {
            moment,
            signed_root: sign_of(moment) * moment.abs().powf(1.0 / q),
            excluded: 0,
        }
    } else {
        let retained: Vec<f64> = fxy
            .iter()
            .copied()
            .filter(|v| v.abs() > zero_thresh)
            .collect();
        let excluded = n - retained.len();
        if retained.is_empty() {
            return CrossCell {
                moment: f64::NAN,
                signed_root: f64::NAN,
                excluded,
            };
        }
        let nr = retained.len() as f64;
        if q == 0.0 {
            // Limit of the signed sum is the mean sign; the signed root has
            // a log-limit only when every retained covariance is positive.
            let moment = retained.iter().map(|&v| sign_of(v)).sum::<f64>() / nr;
            let signed_root = if retained.iter().all(|&v| v > 0.0) {
                let log_mean: f64 = retained.iter().map(|v| v.ln()).sum::<f64>() / nr;
                (0.5 * log_mean).exp()
            } else {
                f64::NAN
            };
            CrossCell {
                moment,
                signed_root,
                excluded,
            }
        } else {
            let sum: f64 = retained
                .iter()
                .map(|&v| sign_of(v) * v.abs().powf(q / 2.0))
                .sum();
            let moment = sum / nr;
            CrossCell {
                moment,
                signed_root: sign_of(moment) * moment.abs().powf(1.0 / q),
                excluded,
            }
        }
    }
}

/// Signed q-order cross-covariance fluctuation surface of an aligned pair.
pub fn cross_fluctuation(
    x: &ReturnSeries,
    y: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
) -> Result<CrossSurface> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 4 * scales.s_min() {
        return Err(Error::TooShort {
            needed: 4 * scales.s_min(),
            got: n,
        });
    }
    scales.validate_for(n, m)?;

    let px = detrend::profile(&x.values);
    let py = detrend::profile(&y.values);

    // Scale-aware near-zero epsilon: 1e-12 * (sigma_x sigma_y)^(q/2).
    let sig2 = x.std_dev() * y.std_dev();

    let per_scale: Vec<(Vec<CrossCell>, usize)> = scales
        .scales()
        .par_iter()
        .map(|&s| {
            let moments = detrend::scale_cross_moments(&px, &py, s, m).expect("validated scale");
            let fxy: Vec<f64> = moments.iter().map(|m| m.2).collect();
            let abs: Vec<f64> = fxy.iter().map(|v| v.abs()).collect();
            let thresh = zero_threshold(&abs);
            let cells = qgrid
                .qs()
                .iter()
                .map(|&q| cross_cell(&fxy, q, thresh))
                .collect();
            (cells, fxy.len())
        })
        .collect();

    let nq = qgrid.len();
    let ns = scales.len();
    let mut signed_values = vec![vec![0.0; ns]; nq];
    let mut raw_moments = vec![vec![0.0; ns]; nq];
    let mut near_zero = vec![vec![false; ns]; nq];
    let mut excluded = vec![vec![0usize; ns]; nq];
    let mut total_boxes = vec![0usize; ns];
    for (si, (cells, nb)) in per_scale.into_iter().enumerate() {
        total_boxes[si] = nb;
        for (qi, cell) in cells.into_iter().enumerate() {
            let q = qgrid.qs()[qi];
            signed_values[qi][si] = cell.signed_root;
            raw_moments[qi][si] = cell.moment;
            excluded[qi][si] = cell.excluded;
            let eps = NEAR_ZERO_REL * sig2.powf(q / 2.0);
            near_zero[qi][si] = !cell.moment.is_finite() || cell.moment.abs() < eps;
        }
    }

    Ok(CrossSurface {
        qgrid: qgrid.clone(),
        scales: scales.clone(),
        signed_values,
        raw_moments,
        near_zero,
        excluded,
        total_boxes,
    })
}

/// Acceptance thresholds for per-q lambda fits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaThresholds {
    /// Minimum r-squared of the log-log fit.
    pub r_squared: f64,
    /// Minimum fraction of positive, valid cells in the q row.
    pub positive_fraction: f64,
}

impl Default for LambdaThresholds {
    fn default() -> Self {
        Self {
            r_squared: 0.95,
            positive_fraction: 0.90,
        }
    }
}

/// Cross-scaling report: lambda(q) where scaling is acceptable, the limiting
/// q_min, the average Hurst exponent h_xy(q) and the gap d_xy(q).
#[derive(Debug, Clone, Serialize)]
pub struct CrossScalingReport {
    pub qs: Vec<f64>,
    /// lambda fit per q, present only for q >= q_min.
    pub lambda: Vec<Option<QFit>>,
    /// Smallest grid q from which scaling is acceptable for all larger q.
    pub q_min: Option<f64>,
    /// (h_x(q) + h_y(q)) / 2 where both are present.
    pub h_xy: Vec<Option<f64>>,
    /// lambda(q) - h_xy(q) where both are present.
    pub d_xy: Vec<Option<f64>>,
    /// Fraction of positive, valid cells per q row (diagnostic).
    pub positive_fraction: Vec<f64>,
    pub thresholds: LambdaThresholds,
}

/// Fit lambda(q) on ln F_XY vs ln s over positive, valid cells only, and
/// locate q_min: the smallest grid q such that every q' >= q_min has at
/// least the threshold fraction of positive cells and fit r-squared.
/// lambda is reported only from q_min upward; with no qualifying q the
/// report carries an absent q_min and empty lambda entries.
pub fn fit_lambda(
    surface: &CrossSurface,
    h_x: &ScalingFit,
    h_y: &ScalingFit,
    thresholds: LambdaThresholds,
) -> Result<CrossScalingReport> {
    let qs = surface.qgrid.qs();
    if h_x.qs != qs || h_y.qs != qs {
        return Err(Error::invalid(
            "single-series fits must share the cross surface's q grid",
        ));
    }

    let ns = surface.scales.len();
    let mut fits: Vec<Option<QFit>> = Vec::with_capacity(qs.len());
    let mut positive_fraction = Vec::with_capacity(qs.len());
    let mut row_ok = Vec::with_capacity(qs.len());

    for qi in 0..qs.len() {
        let mut ln_s = Vec::with_capacity(ns);
        let mut ln_f = Vec::with_capacity(ns);
        for si in 0..ns {
            if surface.usable_for_fit(qi, si) {
                ln_s.push((surface.scales.scales()[si] as f64).ln());
                ln_f.push(surface.signed_values[qi][si].ln());
            }
        }
        let frac = ln_s.len() as f64 / ns as f64;
        positive_fraction.push(frac);
        let fit = if ln_s.len() >= 3 {
            let (slope, intercept, r2, _) = ols(&ln_s, &ln_f);
            Some(QFit {
                exponent: slope,
                intercept,
                r_squared: r2,
                n_points: ln_s.len(),
            })
        } else {
            None
        };
        let ok = frac >= thresholds.positive_fraction
            && fit.is_some_and(|f| f.r_squared >= thresholds.r_squared);
        row_ok.push(ok);
        fits.push(fit);
    }

    // q_min: start of the maximal all-ok suffix.
    let mut q_min_idx = None;
    for qi in (0..qs.len()).rev() {
        if row_ok[qi] {
            q_min_idx = Some(qi);
        } else {
            break;
        }
    }

    let lambda: Vec<Option<QFit>> = fits
        .iter()
        .enumerate()
        .map(|(qi, f)| match q_min_idx {
            Some(start) if qi >= start => *f,
            _ => None,
        })
        .collect();

    let h_xy: Vec<Option<f64>> = (0..qs.len())
        .map(|qi| match (h_x.fits[qi], h_y.fits[qi]) {
            (Some(a), Some(b)) => Some((a.exponent + b.exponent) / 2.0),
            _ => None,
        })
        .collect();
    let d_xy: Vec<Option<f64>> = (0..qs.len())
        .map(|qi| match (lambda[qi], h_xy[qi]) {
            (Some(l), Some(h)) => Some(l.exponent - h),
            _ => None,
        })
        .collect();

    Ok(CrossScalingReport {
        qs: qs.to_vec(),
        lambda,
        q_min: q_min_idx.map(|i| qs[i]),
        h_xy,
        d_xy,
        positive_fraction,
        thresholds,
    })
}

/// One violation of the Cauchy-Schwarz bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CsViolation {
    pub q: f64,
    pub s: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Result of checking |F_XY^q(s)| <= sqrt(F_XX^q(s) F_YY^q(s)) over all
/// cells with q >= 0. An empty violation list is the expected outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CsBoundReport {
    pub checked_cells: usize,
    pub violations: Vec<CsViolation>,
}

/// Check the Cauchy-Schwarz bound of the q-th order moments cellwise.
pub fn cs_bound_check(
    surface: &CrossSurface,
    fxx: &FluctuationSurface,
    fyy: &FluctuationSurface,
) -> Result<CsBoundReport> {
    if fxx.qgrid != surface.qgrid
        || fyy.qgrid != surface.qgrid
        || fxx.scales != surface.scales
        || fyy.scales != surface.scales
    {
        return Err(Error::invalid("surfaces must share q and scale grids"));
    }
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for (qi, &q) in surface.qgrid.qs().iter().enumerate() {
        if q < 0.0 {
            continue;
        }
        for (si, &s) in surface.scales.scales().iter().enumerate() {
            let lhs = surface.raw_moments[qi][si].abs();
            let rhs = (fxx.raw_moments[qi][si] * fyy.raw_moments[qi][si]).sqrt();
            if !lhs.is_finite() || !rhs.is_finite() {
                continue;
            }
            checked += 1;
            if lhs > rhs * (1.0 + CS_SLACK) {
                violations.push(CsViolation { q, s, lhs, rhs });
            }
        }
    }
    Ok(CsBoundReport {
        checked_cells: checked,
        violations,
    })
}
