//! The q-dependent detrended cross-correlation coefficient rho_q(s), its
//! surrogate significance band, sub-period profiles and lead-lag scans.
//!
//! rho_q(s) is the ratio of the q-th order cross-covariance moment to the
//! geometric mean of the two variance moments, taken on identical boxes.
//! For q > 0 it is bounded by 1 in magnitude; q acts as a filter selecting
//! which fluctuation sizes dominate the comparison.

use rayon::prelude::*;
use serde::Serialize;

use crate::detrend::{self, ScaleGrid};
use crate::error::{Error, Result};
use crate::ingest::{self, AlignedPanel, ReturnSeries, WindowScheme};
use crate::mfdfa::QGrid;
use crate::surrogate::{self, SurrogateSpec};

/// Surrogate band attached to a rho profile: per-cell mean and standard
/// deviation over shuffled realizations.
#[derive(Debug, Clone, Serialize)]
pub struct RhoBand {
    pub mean: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub n_realizations: usize,
}

/// rho_q(s) over a q-grid and scale grid, at one lag and window.
/// Undefined cells (zero denominator) hold NaN, never 0.
#[derive(Debug, Clone, Serialize)]
pub struct RhoProfile {
    pub qgrid: QGrid,
    pub scales: ScaleGrid,
    pub rho: Vec<Vec<f64>>,
    /// Relative shift in steps; positive means x leads.
    pub lag: i64,
    pub window_label: Option<String>,
    pub surrogate_band: Option<RhoBand>,
}

impl RhoProfile {
    pub fn cell(&self, qi: usize, si: usize) -> f64 {
        self.rho[qi][si]
    }

    pub fn is_defined(&self, qi: usize, si: usize) -> bool {
        self.rho[qi][si].is_finite()
    }
}

/// Scale-averaged rho per q for one window and lag.
#[derive(Debug, Clone, Serialize)]
pub struct RhoSummary {
    pub window_label: Option<String>,
    pub lag: i64,
    pub qs: Vec<f64>,
    /// Arithmetic mean of rho_q(s) over the defined cells of the scale grid.
    pub rho_bar: Vec<Option<f64>>,
    pub defined_cells: Vec<usize>,
    pub undefined_cells: Vec<usize>,
    /// Window shorter than the configured minimum usable length.
    pub flagged_short: bool,
}

/// Options for rho computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RhoOptions {
    /// Permit q <= 0 entries. Their cells follow undefined-cell semantics:
    /// the magnitude bound does not apply, and a cell is NaN whenever a
    /// moment is non-finite or the denominator is not positive.
    pub allow_nonpositive_q: bool,
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

/// rho_q(s) of an aligned equal-length pair. The default contract requires
/// every q > 0; see [`rho_with`] to opt in to q <= 0.
pub fn rho(
    x: &ReturnSeries,
    y: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
) -> Result<RhoProfile> {
    rho_with(x, y, qgrid, scales, m, RhoOptions::default())
}

/// rho_q(s) with explicit options.
pub fn rho_with(
    x: &ReturnSeries,
    y: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
    opts: RhoOptions,
) -> Result<RhoProfile> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if !opts.allow_nonpositive_q && qgrid.qs().iter().any(|&q| q <= 0.0) {
        return Err(Error::invalid(
            "rho_q is defined for q > 0; pass allow_nonpositive_q to override",
        ));
    }
    let n = x.len();
    scales.validate_for(n, m)?;

    let px = detrend::profile(&x.values);
    let py = detrend::profile(&y.values);

    let per_scale: Vec<Vec<f64>> = scales
        .scales()
        .par_iter()
        .map(|&s| {
            let moments = detrend::scale_cross_moments(&px, &py, s, m).expect("validated scale");
            let nb = moments.len() as f64;
            qgrid
                .qs()
                .iter()
                .map(|&q| {
                    if q > 0.0 {
                        let (mut num, mut den_x, mut den_y) = (0.0, 0.0, 0.0);
                        for &(fxx, fyy, fxy) in &moments {
                            num += sign_of(fxy) * fxy.abs().powf(q / 2.0);
                            den_x += fxx.powf(q / 2.0);
                            den_y += fyy.powf(q / 2.0);
                        }
                        let den = ((den_x / nb) * (den_y / nb)).sqrt();
                        if den > 0.0 && den.is_finite() {
                            (num / nb) / den
                        } else {
                            f64::NAN
                        }
                    } else {
                        nonpositive_q_cell(&moments, q)
                    }
                })
                .collect()
        })
        .collect();

    let mut rho = vec![vec![f64::NAN; scales.len()]; qgrid.len()];
    for (si, col) in per_scale.into_iter().enumerate() {
        for (qi, v) in col.into_iter().enumerate() {
            rho[qi][si] = v;
        }
    }

    Ok(RhoProfile {
        qgrid: qgrid.clone(),
        scales: scales.clone(),
        rho,
        lag: 0,
        window_label: x.window_label.clone().or_else(|| y.window_label.clone()),
        surrogate_band: None,
    })
}

/// q <= 0 cell: exclude degenerate boxes per moment, then form the ratio
/// when all three moments are finite and the denominator positive.
fn nonpositive_q_cell(moments: &[(f64, f64, f64)], q: f64) -> f64 {
    let fxx: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let fyy: Vec<f64> = moments.iter().map(|m| m.1).collect();
    let fxy_abs: Vec<f64> = moments.iter().map(|m| m.2.abs()).collect();
    let tx = crate::mfdfa::zero_threshold(&fxx);
    let ty = crate::mfdfa::zero_threshold(&fyy);
    let txy = crate::mfdfa::zero_threshold(&fxy_abs);

    let moment = |vals: Vec<(f64, f64)>| -> f64 {
        // (value, sign) pairs already filtered.
        if vals.is_empty() {
            return f64::NAN;
        }
        let n = vals.len() as f64;
        if q == 0.0 {
            vals.iter().map(|(_, sg)| sg).sum::<f64>() / n
        } else {
            vals.iter()
                .map(|(v, sg)| sg * v.powf(q / 2.0))
                .sum::<f64>()
                / n
        }
    };

    let num = moment(
        moments
            .iter()
            .filter(|m| m.2.abs() > txy)
            .map(|m| (m.2.abs(), sign_of(m.2)))
            .collect(),
    );
    let dx = moment(
        fxx.iter()
            .filter(|v| **v > tx)
            .map(|v| (*v, 1.0))
            .collect(),
    );
    let dy = moment(
        fyy.iter()
            .filter(|v| **v > ty)
            .map(|v| (*v, 1.0))
            .collect(),
    );
    let den = (dx * dy).sqrt();
    if num.is_finite() && den.is_finite() && den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// rho with a surrogate significance band from `n_surrogates` independently
/// shuffled pairs (both members reshuffled per realization, derived seeds
/// seed + i). Identical seeds reproduce the band bit-for-bit.
pub fn rho_with_band(
    x: &ReturnSeries,
    y: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
    n_surrogates: usize,
    seed: u64,
) -> Result<RhoProfile> {
    rho_with_band_opts(x, y, qgrid, scales, m, n_surrogates, seed, true)
}

/// [`rho_with_band`] with control over whether both members are shuffled
/// (the strongest null) or only the second.
#[allow(clippy::too_many_arguments)]
pub fn rho_with_band_opts(
    x: &ReturnSeries,
    y: &ReturnSeries,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
    n_surrogates: usize,
    seed: u64,
    shuffle_both: bool,
) -> Result<RhoProfile> {
    if n_surrogates < 2 {
        return Err(Error::invalid("surrogate band needs at least 2 realizations"));
    }
    let mut profile = rho(x, y, qgrid, scales, m)?;

    let spec = SurrogateSpec {
        n_realizations: n_surrogates,
        seed,
    };
    let stats = surrogate::band(
        |real_seed| {
            // Two independent permutations per realization, drawn from one
            // derived-seed stream.
            let sx = if shuffle_both {
                surrogate::shuffle(x, real_seed.wrapping_mul(2))
            } else {
                x.clone()
            };
            let sy = surrogate::shuffle(y, real_seed.wrapping_mul(2).wrapping_add(1));
            let p = rho(&sx, &sy, qgrid, scales, m)?;
            Ok(p.rho.into_iter().flatten().collect())
        },
        &spec,
    )?;

    let ns = scales.len();
    let unflatten = |flat: Vec<f64>| -> Vec<Vec<f64>> {
        flat.chunks(ns).map(|c| c.to_vec()).collect()
    };
    profile.surrogate_band = Some(RhoBand {
        mean: unflatten(stats.mean),
        sigma: unflatten(stats.sigma),
        n_realizations: n_surrogates,
    });
    Ok(profile)
}

/// One rho profile per lag, via [`ingest::shift_pair`]. Positive lag means
/// x leads (y is retarded relative to x).
pub fn lag_scan(
    x: &ReturnSeries,
    y: &ReturnSeries,
    lags: &[i64],
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
) -> Result<Vec<RhoProfile>> {
    lags.iter()
        .map(|&lag| {
            let (sx, sy) = ingest::shift_pair(x, y, lag)?;
            let mut p = rho(&sx, &sy, qgrid, scales, m)?;
            p.lag = lag;
            Ok(p)
        })
        .collect()
}

/// Scale-average a profile into a summary.
pub fn summarize(profile: &RhoProfile, flagged_short: bool) -> RhoSummary {
    let nq = profile.qgrid.len();
    let mut rho_bar = Vec::with_capacity(nq);
    let mut defined = Vec::with_capacity(nq);
    let mut undefined = Vec::with_capacity(nq);
    for qi in 0..nq {
        let cells: Vec<f64> = profile.rho[qi]
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        defined.push(cells.len());
        undefined.push(profile.scales.len() - cells.len());
        rho_bar.push(if cells.is_empty() {
            None
        } else {
            Some(cells.iter().sum::<f64>() / cells.len() as f64)
        });
    }
    RhoSummary {
        window_label: profile.window_label.clone(),
        lag: profile.lag,
        qs: profile.qgrid.qs().to_vec(),
        rho_bar,
        defined_cells: defined,
        undefined_cells: undefined,
        flagged_short,
    }
}

/// A windowed rho result; the profile is absent when the window cannot
/// support any configured scale or lag.
#[derive(Debug, Clone)]
pub struct WindowedRho {
    pub summary: RhoSummary,
    pub profile: Option<RhoProfile>,
}

/// rho profiles and scale-averaged summaries for one instrument pair of an
/// aligned panel, split into sub-period windows, at each requested lag.
/// Windows shorter than `min_len` are flagged, never dropped; a window too
/// short to compute yields a summary with no defined cells.
#[allow(clippy::too_many_arguments)]
pub fn windowed_rho(
    panel: &AlignedPanel,
    pair: (&str, &str),
    scheme: WindowScheme,
    lags: &[i64],
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
    min_len: usize,
) -> Result<Vec<WindowedRho>> {
    let x = panel
        .column(pair.0)
        .ok_or_else(|| Error::invalid(format!("instrument '{}' not in panel", pair.0)))?;
    let y = panel
        .column(pair.1)
        .ok_or_else(|| Error::invalid(format!("instrument '{}' not in panel", pair.1)))?;

    let wx = ingest::split_windows(x, Some(&panel.timestamps), scheme, min_len)?;
    let wy = ingest::split_windows(y, Some(&panel.timestamps), scheme, min_len)?;
    if wx.is_empty() {
        return Err(Error::invalid("window split produced no windows"));
    }
    debug_assert_eq!(wx.len(), wy.len());

    let mut out = Vec::with_capacity(wx.len() * lags.len());
    for (winx, winy) in wx.iter().zip(&wy) {
        let label = winx.series.window_label.clone();
        let flagged = winx.flagged_short;
        for &lag in lags {
            let computed = compute_window(
                &winx.series,
                &winy.series,
                lag,
                qgrid,
                scales,
                m,
            );
            match computed {
                Some(mut profile) => {
                    profile.lag = lag;
                    profile.window_label = label.clone();
                    let summary = summarize(&profile, flagged);
                    out.push(WindowedRho {
                        summary,
                        profile: Some(profile),
                    });
                }
                None => out.push(WindowedRho {
                    summary: RhoSummary {
                        window_label: label.clone(),
                        lag,
                        qs: qgrid.qs().to_vec(),
                        rho_bar: vec![None; qgrid.len()],
                        defined_cells: vec![0; qgrid.len()],
                        undefined_cells: vec![scales.len(); qgrid.len()],
                        flagged_short: true,
                    },
                    profile: None,
                }),
            }
        }
    }
    Ok(out)
}

fn compute_window(
    x: &ReturnSeries,
    y: &ReturnSeries,
    lag: i64,
    qgrid: &QGrid,
    scales: &ScaleGrid,
    m: usize,
) -> Option<RhoProfile> {
    if lag.unsigned_abs() as usize >= x.len() {
        return None;
    }
    let (sx, sy) = ingest::shift_pair(x, y, lag).ok()?;
    let usable = scales.restrict_to_len(sx.len())?;
    if usable.s_min() < m + 2 {
        return None;
    }
    rho(&sx, &sy, qgrid, &usable, m).ok()
}
