//! Output writers. Every file embeds the full configuration, seed, library
//! version and generator identity, so a rerun with an identical config is
//! byte-identical. CSV files carry the metadata as leading `#` comment
//! lines; JSON files carry it in a `meta` object.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use mfx_core::mfcca::{CrossScalingReport, CrossSurface};
use mfx_core::mfdfa::{FluctuationSurface, ScalingFit, SingularitySpectrum};
use mfx_core::rhoq::{RhoProfile, RhoSummary};
use mfx_core::tails::{CcdfCurve, TailFit};

use crate::config::AnalysisConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Run metadata stamped into every output.
pub struct Meta {
    pub config_json: String,
    pub seed: u64,
}

impl Meta {
    pub fn from_config(config: &AnalysisConfig) -> Self {
        // The embedded config omits worker count and output placement: they
        // cannot affect results, and dropping them keeps reruns into other
        // directories or with other thread caps byte-identical.
        let mut value = serde_json::to_value(config).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
            map.remove("threads");
        }
        Self {
            config_json: serde_json::to_string(&value).expect("config serializes"),
            seed: config.seed,
        }
    }

    pub fn from_json(config_json: String, seed: u64) -> Self {
        Self { config_json, seed }
    }

    fn csv_header(&self) -> String {
        format!(
            "# mfx {VERSION}\n# generator: {}\n# seed: {}\n# config: {}\n",
            mfx_core::GENERATOR_ID,
            self.seed,
            self.config_json
        )
    }

    fn json_value(&self) -> serde_json::Value {
        json!({
            "version": VERSION,
            "generator": mfx_core::GENERATOR_ID,
            "seed": self.seed,
            "config": serde_json::from_str::<serde_json::Value>(&self.config_json).unwrap(),
        })
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

fn write_file(path: &Path, content: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path.to_path_buf())
}

fn write_json(path: &Path, meta: &Meta, payload: serde_json::Value) -> Result<PathBuf> {
    let doc = json!({ "meta": meta.json_value(), "data": payload });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(path, &text)
}

pub fn write_surface_csv(path: &Path, meta: &Meta, surface: &FluctuationSurface) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("q,s,F\n");
    for (qi, &q) in surface.qgrid.qs().iter().enumerate() {
        for (si, &s) in surface.scales.scales().iter().enumerate() {
            writeln!(out, "{q},{s},{}", fmt_f(surface.values[qi][si])).unwrap();
        }
    }
    write_file(path, &out)
}

pub fn write_cross_surface_csv(path: &Path, meta: &Meta, surface: &CrossSurface) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("q,s,F_signed,valid\n");
    for (qi, &q) in surface.qgrid.qs().iter().enumerate() {
        for (si, &s) in surface.scales.scales().iter().enumerate() {
            let valid = surface.signed_values[qi][si].is_finite() && !surface.near_zero[qi][si];
            writeln!(
                out,
                "{q},{s},{},{}",
                fmt_f(surface.signed_values[qi][si]),
                u8::from(valid)
            )
            .unwrap();
        }
    }
    write_file(path, &out)
}

pub fn write_scaling_json(
    path: &Path,
    meta: &Meta,
    instrument: &str,
    fit: &ScalingFit,
    taus: &[Option<f64>],
) -> Result<PathBuf> {
    let rows: Vec<serde_json::Value> = fit
        .qs
        .iter()
        .enumerate()
        .map(|(qi, q)| match fit.fits[qi] {
            Some(f) => json!({
                "q": q,
                "h": f.exponent,
                "intercept": f.intercept,
                "r_squared": f.r_squared,
                "n_points": f.n_points,
                "tau": taus[qi],
                "unreliable": fit.is_unreliable(*q),
            }),
            None => json!({ "q": q, "h": null, "tau": null }),
        })
        .collect();
    write_json(
        path,
        meta,
        json!({
            "instrument": instrument,
            "fit_range": { "s_lo": fit.fit_range.0, "s_hi": fit.fit_range.1 },
            "unreliable_above": fit.unreliable_above,
            "per_q": rows,
        }),
    )
}

pub fn write_spectrum_json(
    path: &Path,
    meta: &Meta,
    instrument: &str,
    spec: &SingularitySpectrum,
) -> Result<PathBuf> {
    write_json(
        path,
        meta,
        json!({
            "instrument": instrument,
            "alpha_0": spec.alpha_0,
            "alpha_min": spec.alpha_min,
            "alpha_max": spec.alpha_max,
            "delta_alpha": spec.delta_alpha,
            "delta_alpha_left": spec.delta_alpha_left,
            "delta_alpha_right": spec.delta_alpha_right,
            "asymmetry": spec.asymmetry,
            "degenerate": spec.degenerate,
            "monotonicity_warnings": spec.monotonicity_warnings,
        }),
    )
}

pub fn write_spectrum_curve_csv(
    path: &Path,
    meta: &Meta,
    spec: &SingularitySpectrum,
) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("q,alpha,f\n");
    for i in 0..spec.qs.len() {
        writeln!(
            out,
            "{},{},{}",
            spec.qs[i],
            fmt_f(spec.alphas[i]),
            fmt_f(spec.f_values[i])
        )
        .unwrap();
    }
    write_file(path, &out)
}

pub fn write_cross_report_json(
    path: &Path,
    meta: &Meta,
    pair: (&str, &str),
    report: &CrossScalingReport,
) -> Result<PathBuf> {
    let rows: Vec<serde_json::Value> = report
        .qs
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            json!({
                "q": q,
                "lambda": report.lambda[qi].map(|f| f.exponent),
                "lambda_r_squared": report.lambda[qi].map(|f| f.r_squared),
                "h_xy": report.h_xy[qi],
                "d_xy": report.d_xy[qi],
                "positive_fraction": report.positive_fraction[qi],
            })
        })
        .collect();
    write_json(
        path,
        meta,
        json!({
            "x": pair.0,
            "y": pair.1,
            "q_min": report.q_min,
            "thresholds": {
                "r_squared": report.thresholds.r_squared,
                "positive_fraction": report.thresholds.positive_fraction,
            },
            "per_q": rows,
        }),
    )
}

/// Rows: (window, lag, q, s, rho, band_mean, band_sigma). Band columns are
/// empty without a surrogate band.
pub fn write_rho_csv(path: &Path, meta: &Meta, profiles: &[&RhoProfile]) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("window,lag,q,s,rho,band_mean,band_sigma\n");
    for p in profiles {
        let window = p.window_label.as_deref().unwrap_or("full");
        for (qi, &q) in p.qgrid.qs().iter().enumerate() {
            for (si, &s) in p.scales.scales().iter().enumerate() {
                let (bm, bs) = match &p.surrogate_band {
                    Some(b) => (fmt_f(b.mean[qi][si]), fmt_f(b.sigma[qi][si])),
                    None => (String::new(), String::new()),
                };
                writeln!(
                    out,
                    "{window},{},{q},{s},{},{bm},{bs}",
                    p.lag,
                    fmt_f(p.rho[qi][si])
                )
                .unwrap();
            }
        }
    }
    write_file(path, &out)
}

/// Scale-averaged summaries, one row per (pair, window, lag, q).
pub fn write_panel_summary_csv(
    path: &Path,
    meta: &Meta,
    rows: &[(String, RhoSummary)],
) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("pair,window,lag,q,rho_bar,defined_cells,flagged_short\n");
    for (pair, s) in rows {
        let window = s.window_label.as_deref().unwrap_or("full");
        for (qi, q) in s.qs.iter().enumerate() {
            let bar = s.rho_bar[qi].map(fmt_f).unwrap_or_default();
            writeln!(
                out,
                "{pair},{window},{},{q},{bar},{},{}",
                s.lag,
                s.defined_cells[qi],
                u8::from(s.flagged_short)
            )
            .unwrap();
        }
    }
    write_file(path, &out)
}

pub fn write_panel_summary_json(
    path: &Path,
    meta: &Meta,
    rows: &[(String, RhoSummary)],
) -> Result<PathBuf> {
    let payload: Vec<serde_json::Value> = rows
        .iter()
        .map(|(pair, s)| {
            json!({
                "pair": pair,
                "window": s.window_label,
                "lag": s.lag,
                "qs": s.qs,
                "rho_bar": s.rho_bar,
                "defined_cells": s.defined_cells,
                "flagged_short": s.flagged_short,
            })
        })
        .collect();
    write_json(path, meta, json!({ "summaries": payload }))
}

pub fn write_ccdf_csv(path: &Path, meta: &Meta, curves: &[CcdfCurve]) -> Result<PathBuf> {
    let mut out = meta.csv_header();
    out.push_str("side,r,ccdf\n");
    for c in curves {
        for (r, p) in c.r.iter().zip(&c.p) {
            writeln!(out, "{},{},{}", c.side.name(), fmt_f(*r), fmt_f(*p)).unwrap();
        }
    }
    write_file(path, &out)
}

pub fn write_tails_json(
    path: &Path,
    meta: &Meta,
    instrument: &str,
    fits: &[TailFit],
    sensitivity: &[TailFit],
) -> Result<PathBuf> {
    let fit_json = |f: &TailFit| {
        json!({
            "side": f.side.name(),
            "method": format!("{:?}", f.method).to_lowercase(),
            "gamma": f.gamma,
            "gamma_stderr": f.gamma_stderr,
            "fit_quantile": f.fit_quantile,
            "n_tail": f.n_tail,
            "r_squared": f.r_squared,
        })
    };
    write_json(
        path,
        meta,
        json!({
            "instrument": instrument,
            "fits": fits.iter().map(fit_json).collect::<Vec<_>>(),
            "sensitivity": sensitivity.iter().map(fit_json).collect::<Vec<_>>(),
        }),
    )
}

/// Synthetic quote CSV: epoch-second timestamps on a fixed bar grid and a
/// price path reconstructed from centered, rescaled returns.
pub fn write_quotes_csv(
    path: &Path,
    meta: &Meta,
    values: &[f64],
    start_epoch: i64,
    bar_seconds: i64,
) -> Result<PathBuf> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let scale = if var > 0.0 { 1e-3 / var.sqrt() } else { 0.0 };

    let mut out = meta.csv_header();
    out.push_str("timestamp,price\n");
    let mut log_price: f64 = 100f64.ln();
    writeln!(out, "{start_epoch},{}", fmt_f(log_price.exp())).unwrap();
    for (i, v) in values.iter().enumerate() {
        log_price += scale * (v - mean);
        writeln!(
            out,
            "{},{}",
            start_epoch + (i as i64 + 1) * bar_seconds,
            fmt_f(log_price.exp())
        )
        .unwrap();
    }
    write_file(path, &out)
}
