//! Multifractal detrended fluctuation analysis of a single series:
//! q-order fluctuation functions, generalized Hurst exponents h(q),
//! tau(q) and the singularity spectrum f(alpha) with width and asymmetry
//! summaries.

use rayon::prelude::*;
use serde::Serialize;

use crate::detrend::{self, ScaleGrid};
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;

/// Strictly increasing grid of moment orders q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QGrid {
    qs: Vec<f64>,
}

impl QGrid {
    pub fn new(qs: Vec<f64>) -> Result<Self> {
        if qs.is_empty() {
            return Err(Error::invalid("q grid must not be empty"));
        }
        if qs.iter().any(|q| !q.is_finite()) {
            return Err(Error::invalid("q grid must be finite"));
        }
        if qs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("q grid must be strictly increasing"));
        }
        Ok(Self { qs })
    }

    /// Inclusive range with a fixed step.
    pub fn range(q_min: f64, q_max: f64, step: f64) -> Result<Self> {
        if step <= 0.0 || q_max < q_min {
            return Err(Error::invalid(format!(
                "bad q range: [{q_min}, {q_max}] step {step}"
            )));
        }
        let n = ((q_max - q_min) / step).round() as usize + 1;
        let qs = (0..n)
            .map(|i| {
                let q = q_min + i as f64 * step;
                if q.abs() < 1e-12 {
                    0.0
                } else {
                    q
                }
            })
            .filter(|q| *q <= q_max + 1e-9)
            .collect();
        Self::new(qs)
    }

    /// Single-series default: -4 to 4 with step 0.5.
    pub fn default_single() -> Self {
        Self::range(-4.0, 4.0, 0.5).unwrap()
    }

    /// Cross-analysis default: 0.2 to 4 with step 0.2.
    pub fn default_cross() -> Self {
        Self::range(0.2, 4.0, 0.2).unwrap()
    }

    /// Default for rho_q profiles: q = 1, 2, 3, 4.
    pub fn default_rho() -> Self {
        Self::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    pub fn qs(&self) -> &[f64] {
        &self.qs
    }

    pub fn len(&self) -> usize {
        self.qs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceKind {
    Single,
    Cross,
}

/// Fraction of excluded boxes above which a cell is flagged.
pub const EXCLUSION_FLAG_FRACTION: f64 = 0.10;

/// Relative threshold below which a box variance counts as zero
/// (degenerate) for negative and zero q.
const ZERO_BOX_REL: f64 = 1e-24;

/// Matrix of fluctuation function values over a q-grid and a scale grid.
///
/// `values[qi][si]` holds F(q,s), the 1/q-th root of the q-th order moment
/// (at q = 0 the logarithmic limit). `raw_moments[qi][si]` holds the moment
/// F^q(s) itself, which is what enters rho_q and the Cauchy-Schwarz bound;
/// its q -> 0 limit is 1 for a single series.
#[derive(Debug, Clone, Serialize)]
pub struct FluctuationSurface {
    pub qgrid: QGrid,
    pub scales: ScaleGrid,
    pub values: Vec<Vec<f64>>,
    pub raw_moments: Vec<Vec<f64>>,
    /// Boxes excluded per cell under the zero-variance rule (q <= 0 only).
    pub excluded: Vec<Vec<usize>>,
    /// Total boxes per scale (2 * floor(T/s)).
    pub total_boxes: Vec<usize>,
    pub kind: SurfaceKind,
}

impl FluctuationSurface {
    /// A cell is flagged when more than 10% of its boxes were excluded.
    pub fn flagged(&self, qi: usize, si: usize) -> bool {
        self.excluded[qi][si] as f64 > EXCLUSION_FLAG_FRACTION * self.total_boxes[si] as f64
    }
}

pub(crate) fn zero_threshold(f2: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = f2.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    ZERO_BOX_REL * median
}

pub(crate) struct CellValue {
    pub moment: f64,
    pub root: f64,
    pub excluded: usize,
}

/// Aggregate box variances into the q-th order fluctuation value of one
/// (q, s) cell. Boxes are consumed in layout order so the reduction is
/// deterministic.
pub(crate) fn single_cell(f2: &[f64], q: f64, zero_thresh: f64) -> CellValue {
    let n = f2.len();
    if q > 0.0 {
        let sum: f64 = f2.iter().map(|v| v.powf(q / 2.0)).sum();
        let moment = sum / n as f64;
        CellValue {
            moment,
            root: moment.powf(1.0 / q),
            excluded: 0,
        }
    } else {
        // Degenerate boxes would dominate q < 0 or break the q = 0 log
        // limit; exclude them and renormalize by the retained count.
        let retained: Vec<f64> = f2.iter().copied().filter(|v| *v > zero_thresh).collect();
        let excluded = n - retained.len();
        if retained.is_empty() {
            return CellValue {
                moment: f64::NAN,
                root: f64::NAN,
                excluded,
            };
        }
        let nr = retained.len() as f64;
        if q == 0.0 {
            let log_mean: f64 = retained.iter().map(|v| v.ln()).sum::<f64>() / nr;
            CellValue {
                moment: 1.0,
                root: (0.5 * log_mean).exp(),
                excluded,
            }
        } else {
            let sum: f64 = retained.iter().map(|v| v.powf(q / 2.0)).sum();
            let moment = sum / nr;
            CellValue {
                moment,
                root: moment.powf(1.0 / q),
                excluded,
            }
        }
    }
}

/// q-order fluctuation surface of a single series (the MFDFA fluctuation
/// functions F(q,s)).
pub fn fluctuation_single(
    series: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
) -> Result<FluctuationSurface> {
    let n = series.len();
    if n < 4 * scales.s_min() {
        return Err(Error::TooShort {
            needed: 4 * scales.s_min(),
            got: n,
        });
    }
    scales.validate_for(n, m)?;
    let profile = detrend::profile(&series.values);

    let per_scale: Vec<(Vec<CellValue>, usize)> = scales
        .scales()
        .par_iter()
        .map(|&s| {
            let f2 = detrend::scale_variances(&profile, s, m).expect("validated scale");
            let thresh = zero_threshold(&f2);
            let cells = qgrid
                .qs()
                .iter()
                .map(|&q| single_cell(&f2, q, thresh))
                .collect();
            (cells, f2.len())
        })
        .collect();

    let nq = qgrid.len();
    let ns = scales.len();
    let mut values = vec![vec![0.0; ns]; nq];
    let mut raw_moments = vec![vec![0.0; ns]; nq];
    let mut excluded = vec![vec![0usize; ns]; nq];
    let mut total_boxes = vec![0usize; ns];
    for (si, (cells, nb)) in per_scale.into_iter().enumerate() {
        total_boxes[si] = nb;
        for (qi, cell) in cells.into_iter().enumerate() {
            values[qi][si] = cell.root;
            raw_moments[qi][si] = cell.moment;
            excluded[qi][si] = cell.excluded;
        }
    }

    Ok(FluctuationSurface {
        qgrid: qgrid.clone(),
        scales: scales.clone(),
        values,
        raw_moments,
        excluded,
        total_boxes,
        kind: SurfaceKind::Single,
    })
}

/// Ordinary least squares of y on x. Returns (slope, intercept, r_squared,
/// stderr of the slope).
pub(crate) fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr = if n > 2.0 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, r_squared, stderr)
}

/// Power-law fit of one q row: ln F = exponent * ln s + intercept.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Per-q power-law fits of a fluctuation surface.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub qs: Vec<f64>,
    /// One fit per q; absent when fewer than 3 finite points remained.
    pub fits: Vec<Option<QFit>>,
    /// Scale interval actually used (inclusive, in samples).
    pub fit_range: (usize, usize),
    /// Moment orders at and above this value are unreliable because the
    /// return distribution tail diverges there (set from a tail fit).
    pub unreliable_above: Option<f64>,
}

impl ScalingFit {
    pub fn exponent(&self, qi: usize) -> Option<f64> {
        self.fits[qi].map(|f| f.exponent)
    }

    /// Annotate moment orders q >= gamma as unreliable, mirroring the
    /// divergence of moments beyond the tail exponent.
    pub fn annotate_moment_cap(&mut self, gamma: f64) {
        if self.qs.iter().any(|&q| q >= gamma) {
            self.unreliable_above = Some(gamma);
        }
    }

    pub fn is_unreliable(&self, q: f64) -> bool {
        matches!(self.unreliable_above, Some(g) if q >= g)
    }
}

/// Fit F(q,s) ~ s^h(q) per q by OLS of ln F on ln s over `fit_range`
/// (an inclusive scale interval; `None` uses the full grid). Non-finite or
/// non-positive F cells are dropped from that q's fit; a fit with fewer
/// than 3 surviving points is reported absent.
pub fn fit_scaling(
    surface: &FluctuationSurface,
    fit_range: Option<(usize, usize)>,
) -> Result<ScalingFit> {
    fit_scaling_with_ranges(surface, fit_range, &[])
}

/// [`fit_scaling`] with per-q range overrides: `overrides[qi]`, when set,
/// replaces the default scale interval for that q row only.
pub fn fit_scaling_with_ranges(
    surface: &FluctuationSurface,
    fit_range: Option<(usize, usize)>,
    overrides: &[Option<(usize, usize)>],
) -> Result<ScalingFit> {
    if !overrides.is_empty() && overrides.len() != surface.qgrid.len() {
        return Err(Error::LengthMismatch {
            left: overrides.len(),
            right: surface.qgrid.len(),
        });
    }
    let default = fit_range.unwrap_or((surface.scales.s_min(), surface.scales.s_max()));
    let indices_in = |lo: usize, hi: usize| -> Vec<usize> {
        surface
            .scales
            .scales()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= lo && s <= hi)
            .map(|(i, _)| i)
            .collect()
    };
    let default_idx = indices_in(default.0, default.1);
    if default_idx.len() < 3 {
        return Err(Error::invalid(format!(
            "fit range [{}, {}] covers fewer than 3 scales",
            default.0, default.1
        )));
    }

    let fits = surface
        .values
        .iter()
        .enumerate()
        .map(|(qi, row)| {
            let override_idx;
            let idx = match overrides.get(qi).copied().flatten() {
                Some((lo, hi)) => {
                    override_idx = indices_in(lo, hi);
                    &override_idx
                }
                None => &default_idx,
            };
            let mut ln_s = Vec::with_capacity(idx.len());
            let mut ln_f = Vec::with_capacity(idx.len());
            for &si in idx {
                let f = row[si];
                if f.is_finite() && f > 0.0 {
                    ln_s.push((surface.scales.scales()[si] as f64).ln());
                    ln_f.push(f.ln());
                }
            }
            if ln_s.len() < 3 {
                return None;
            }
            let (slope, intercept, r2, _) = ols(&ln_s, &ln_f);
            Some(QFit {
                exponent: slope,
                intercept,
                r_squared: r2,
                n_points: ln_s.len(),
            })
        })
        .collect();

    let used: Vec<usize> = default_idx
        .iter()
        .map(|&i| surface.scales.scales()[i])
        .collect();
    Ok(ScalingFit {
        qs: surface.qgrid.qs().to_vec(),
        fits,
        fit_range: (used[0], *used.last().unwrap()),
        unreliable_above: None,
    })
}

/// tau(q) = q h(q) - 1, elementwise over the fit's q grid.
pub fn tau(fit: &ScalingFit) -> Vec<Option<f64>> {
    fit.qs
        .iter()
        .zip(&fit.fits)
        .map(|(q, f)| f.map(|f| q * f.exponent - 1.0))
        .collect()
}

/// Sampled singularity spectrum with width and asymmetry summaries.
#[derive(Debug, Clone, Serialize)]
pub struct SingularitySpectrum {
    pub qs: Vec<f64>,
    pub alphas: Vec<f64>,
    pub f_values: Vec<f64>,
    /// alpha at the spectrum maximum (the q = 0 grid point).
    pub alpha_0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub delta_alpha: f64,
    pub delta_alpha_left: f64,
    pub delta_alpha_right: f64,
    /// (dL - dR) / (dL + dR); positive means left-sided asymmetry.
    pub asymmetry: f64,
    /// Width below resolution; asymmetry reported as 0.
    pub degenerate: bool,
    /// q values where alpha(q) increases, violating concavity.
    pub monotonicity_warnings: Vec<f64>,
}

/// Width below which a spectrum counts as degenerate (monofractal within
/// finite-difference resolution).
const DEGENERATE_WIDTH: f64 = 1e-6;

/// Legendre-transform the fitted tau(q) into (alpha, f(alpha)) samples:
/// alpha = tau'(q) by central finite differences (one-sided at the
/// endpoints) and f = q alpha - tau. The q grid must reach both sides of 0,
/// since the maximum anchoring alpha_0 and the arm-length asymmetry sit at
/// q = 0.
pub fn spectrum(qs: &[f64], tau: &[f64]) -> Result<SingularitySpectrum> {
    if qs.len() != tau.len() {
        return Err(Error::LengthMismatch {
            left: qs.len(),
            right: tau.len(),
        });
    }
    let n = qs.len();
    if n < 3 {
        return Err(Error::invalid("spectrum needs at least 3 q points"));
    }
    if qs[0] > 0.0 || qs[n - 1] < 0.0 {
        return Err(Error::invalid(
            "spectrum needs q values on both sides of 0",
        ));
    }

    let mut alphas = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        alphas.push((tau[b] - tau[a]) / (qs[b] - qs[a]));
    }
    let f_values: Vec<f64> = (0..n).map(|i| qs[i] * alphas[i] - tau[i]).collect();

    let i0 = qs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let alpha_0 = alphas[i0];
    let alpha_min = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_max = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta_alpha = alpha_max - alpha_min;
    let delta_alpha_left = alpha_0 - alpha_min;
    let delta_alpha_right = alpha_max - alpha_0;
    let degenerate = delta_alpha < DEGENERATE_WIDTH;
    let asymmetry = if degenerate {
        0.0
    } else {
        (delta_alpha_left - delta_alpha_right) / (delta_alpha_left + delta_alpha_right)
    };

    // alpha(q) should decrease with q for a concave tau.
    let monotonicity_warnings: Vec<f64> = (0..n - 1)
        .filter(|&i| alphas[i + 1] > alphas[i] + 1e-9)
        .map(|i| qs[i + 1])
        .collect();

    Ok(SingularitySpectrum {
        qs: qs.to_vec(),
        alphas,
        f_values,
        alpha_0,
        alpha_min,
        alpha_max,
        delta_alpha,
        delta_alpha_left,
        delta_alpha_right,
        asymmetry,
        degenerate,
        monotonicity_warnings,
    })
}

/// [`spectrum`] applied to a fit, using the q points whose fit is present.
pub fn spectrum_from_fit(fit: &ScalingFit) -> Result<SingularitySpectrum> {
    let taus = tau(fit);
    let mut qs = Vec::new();
    let mut ts = Vec::new();
    for (q, t) in fit.qs.iter().zip(taus) {
        if let Some(t) = t {
            qs.push(*q);
            ts.push(t);
        }
    }
    spectrum(&qs, &ts)
}

/// Asymmetry parameter of a spectrum: (dL - dR)/(dL + dR), positive for a
/// left-sided (large-fluctuation-dominated) spectrum; 0 when degenerate.
pub fn asymmetry(spec: &SingularitySpectrum) -> f64 {
    if spec.degenerate {
        0.0
    } else {
        (spec.delta_alpha_left - spec.delta_alpha_right)
            / (spec.delta_alpha_left + spec.delta_alpha_right)
    }
}
