//! Command implementations. Each command validates the configuration before
//! any computation, runs the pipeline and writes its output files; the exit
//! status is success only if every requested file was produced.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use mfx_core::ingest::{
    align, load_csv, log_returns, normalize, AlignOptions, AlignedPanel, CsvSchema,
    RawQuoteSeries, ReturnSeries,
};
use mfx_core::mfcca::{cross_fluctuation, cs_bound_check, fit_lambda, LambdaThresholds};
use mfx_core::mfdfa::{fit_scaling, fluctuation_single, spectrum_from_fit, tau, ScalingFit};
use mfx_core::rhoq::{lag_scan, rho, rho_with_band, windowed_rho, RhoProfile};
use mfx_core::synth::{self, GeneratorSpec};
use mfx_core::tails::{ccdf, tail_exponent, TailFit, TailMethod, TailSide};

use crate::config::{AnalysisConfig, InputSpec};
use crate::output::{self, Meta};

/// Tail-fit quantiles reported alongside the configured one.
const SENSITIVITY_QUANTILES: [f64; 3] = [0.005, 0.01, 0.02];

fn load_input(spec: &InputSpec, cfg: &AnalysisConfig) -> Result<RawQuoteSeries> {
    let schema = CsvSchema {
        time_col: spec.time_col.clone(),
        price_col: spec.price_col.clone(),
    };
    let loaded = load_csv(&spec.path, &schema, &spec.id, cfg.bar_seconds)
        .with_context(|| format!("loading {}", spec.path.display()))?;
    if loaded.rejected_rows > 0 {
        eprintln!(
            "{}: rejected {} rows with invalid prices",
            spec.id, loaded.rejected_rows
        );
    }
    Ok(loaded.series)
}

fn load_returns(spec: &InputSpec, cfg: &AnalysisConfig) -> Result<ReturnSeries> {
    Ok(log_returns(&load_input(spec, cfg)?)?)
}

fn align_inputs(cfg: &AnalysisConfig) -> Result<AlignedPanel> {
    let raws: Vec<RawQuoteSeries> = cfg
        .inputs
        .iter()
        .map(|i| load_input(i, cfg))
        .collect::<Result<_>>()?;
    Ok(align(
        &raws,
        AlignOptions {
            drop_gap_returns: cfg.drop_gap_returns,
        },
    )?)
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

/// Tail exponent used to annotate unreliable moment orders: the smaller of
/// the two one-sided OLS estimates, when obtainable.
fn tail_gamma_estimate(returns: &ReturnSeries, cfg: &AnalysisConfig) -> Option<f64> {
    let normalized = normalize(returns).ok()?;
    let mut gammas = Vec::new();
    for side in [TailSide::Positive, TailSide::Negative] {
        if let Ok(fit) = tail_exponent(&normalized, side, cfg.tail_quantile, TailMethod::Ols) {
            gammas.push(fit.gamma);
        }
    }
    gammas.into_iter().reduce(f64::min)
}

fn single_series_outputs(
    returns: &ReturnSeries,
    cfg: &AnalysisConfig,
    meta: &Meta,
) -> Result<(Vec<PathBuf>, ScalingFit)> {
    let qgrid = cfg.single_qgrid()?;
    let scales = cfg.scale_grid(returns.len())?;
    let surface = fluctuation_single(returns, &qgrid, &scales, cfg.poly_order)?;
    let mut fit = fit_scaling(&surface, None)?;
    if let Some(gamma) = tail_gamma_estimate(returns, cfg) {
        fit.annotate_moment_cap(gamma);
    }
    let taus = tau(&fit);
    let spectrum = spectrum_from_fit(&fit)?;

    let id = &returns.instrument_id;
    let dir = &cfg.out_dir;
    let files = vec![
        output::write_surface_csv(&dir.join(format!("{id}_fq.csv")), meta, &surface)?,
        output::write_scaling_json(
            &dir.join(format!("{id}_scaling.json")),
            meta,
            id,
            &fit,
            &taus,
        )?,
        output::write_spectrum_json(&dir.join(format!("{id}_spectrum.json")), meta, id, &spectrum)?,
        output::write_spectrum_curve_csv(
            &dir.join(format!("{id}_spectrum_curve.csv")),
            meta,
            &spectrum,
        )?,
    ];
    Ok((files, fit))
}

/// Full single-series workflow; with `pair` set and exactly two inputs the
/// cross-correlation workflow runs as well.
pub fn cmd_mfdfa(cfg: &AnalysisConfig, pair: bool) -> Result<()> {
    cfg.validate()?;
    if cfg.inputs.is_empty() {
        bail!("mfdfa needs at least one --input");
    }
    if pair && cfg.inputs.len() != 2 {
        bail!("--pair needs exactly 2 inputs, got {}", cfg.inputs.len());
    }
    let meta = Meta::from_config(cfg);
    let mut files = Vec::new();
    for spec in &cfg.inputs {
        let returns = load_returns(spec, cfg)?;
        let (mut fs, _) = single_series_outputs(&returns, cfg, &meta)?;
        files.append(&mut fs);
    }
    if pair {
        files.extend(pair_outputs(cfg, &meta)?);
    }
    report_files(&files);
    Ok(())
}

fn pair_outputs(cfg: &AnalysisConfig, meta: &Meta) -> Result<Vec<PathBuf>> {
    let panel = align_inputs(cfg)?;
    let x = panel.columns[0].clone();
    let y = panel.columns[1].clone();
    let n = x.len();
    // One grid serves the synchronous profile and every lag, so it must fit
    // the shortest shifted series.
    let max_lag = cfg.lags.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0);
    if max_lag >= n {
        bail!("largest lag {max_lag} is not smaller than the aligned length {n}");
    }
    let scales = cfg.scale_grid(n - max_lag)?;
    let cross_q = cfg.cross_qgrid()?;
    let m = cfg.poly_order;

    let fxx = fluctuation_single(&x, &cross_q, &scales, m)?;
    let fyy = fluctuation_single(&y, &cross_q, &scales, m)?;
    let hx = fit_scaling(&fxx, None)?;
    let hy = fit_scaling(&fyy, None)?;
    let cross = cross_fluctuation(&x, &y, &cross_q, &scales, m)?;
    let report = fit_lambda(&cross, &hx, &hy, LambdaThresholds::default())?;
    let bound = cs_bound_check(&cross, &fxx, &fyy)?;
    if !bound.violations.is_empty() {
        eprintln!(
            "warning: {} Cauchy-Schwarz violations detected",
            bound.violations.len()
        );
    }

    let rho_q = cfg.rho_qgrid()?;
    let rho_profile = if cfg.surrogates >= 2 {
        rho_with_band(&x, &y, &rho_q, &scales, m, cfg.surrogates, cfg.seed)?
    } else {
        rho(&x, &y, &rho_q, &scales, m)?
    };
    let lag_profiles = lag_scan(&x, &y, &cfg.lags, &rho_q, &scales, m)?;

    let tag = format!("{}__{}", x.instrument_id, y.instrument_id);
    let dir = &cfg.out_dir;
    let lag_refs: Vec<&RhoProfile> = lag_profiles.iter().collect();
    Ok(vec![
        output::write_cross_surface_csv(&dir.join(format!("{tag}_cross_fq.csv")), meta, &cross)?,
        output::write_cross_report_json(
            &dir.join(format!("{tag}_cross_report.json")),
            meta,
            (&x.instrument_id, &y.instrument_id),
            &report,
        )?,
        output::write_rho_csv(&dir.join(format!("{tag}_rho.csv")), meta, &[&rho_profile])?,
        output::write_rho_csv(&dir.join(format!("{tag}_rho_lags.csv")), meta, &lag_refs)?,
    ])
}

/// Cross-correlation workflow for one pair: MFCCA surface and report,
/// rho_q with its surrogate band, and the lag scan.
pub fn cmd_pair(cfg: &AnalysisConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.inputs.len() != 2 {
        bail!("pair needs exactly 2 inputs, got {}", cfg.inputs.len());
    }
    let meta = Meta::from_config(cfg);
    let files = pair_outputs(cfg, &meta)?;
    report_files(&files);
    Ok(())
}

/// CCDF curves and tail-exponent fits per instrument and side.
pub fn cmd_tails(cfg: &AnalysisConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.inputs.is_empty() {
        bail!("tails needs at least one --input");
    }
    let meta = Meta::from_config(cfg);
    let mut files = Vec::new();
    for spec in &cfg.inputs {
        let returns = load_returns(spec, cfg)?;
        let normalized = normalize(&returns)?;
        let mut curves = Vec::new();
        let mut fits: Vec<TailFit> = Vec::new();
        let mut sensitivity: Vec<TailFit> = Vec::new();
        for side in [TailSide::Negative, TailSide::Positive] {
            match ccdf(&normalized, side) {
                Ok(c) => curves.push(c),
                Err(e) => eprintln!("{}: {side:?} tail skipped: {e}", spec.id),
            }
            for method in [TailMethod::Ols, TailMethod::Hill] {
                match tail_exponent(&normalized, side, cfg.tail_quantile, method) {
                    Ok(f) => fits.push(f),
                    Err(e) => eprintln!("{}: {side:?}/{method:?} fit skipped: {e}", spec.id),
                }
            }
            for q in SENSITIVITY_QUANTILES {
                if let Ok(f) = tail_exponent(&normalized, side, q, TailMethod::Ols) {
                    sensitivity.push(f);
                }
            }
        }
        let id = &spec.id;
        files.push(output::write_ccdf_csv(
            &cfg.out_dir.join(format!("{id}_ccdf.csv")),
            &meta,
            &curves,
        )?);
        files.push(output::write_tails_json(
            &cfg.out_dir.join(format!("{id}_tails.json")),
            &meta,
            id,
            &fits,
            &sensitivity,
        )?);
    }
    report_files(&files);
    Ok(())
}

/// Windowed scale-averaged rho summaries of every instrument against a base
/// instrument, across the configured lags.
pub fn cmd_panel(cfg: &AnalysisConfig, base: Option<&str>) -> Result<()> {
    cfg.validate()?;
    if cfg.inputs.len() < 2 {
        bail!("panel needs at least 2 inputs, got {}", cfg.inputs.len());
    }
    let base_id = base.unwrap_or(&cfg.inputs[0].id).to_string();
    if !cfg.inputs.iter().any(|i| i.id == base_id) {
        bail!("base instrument '{base_id}' is not among the inputs");
    }

    let meta = Meta::from_config(cfg);
    let panel = align_inputs(cfg)?;
    let scales = cfg.scale_grid(panel.len())?;
    let min_len = cfg.min_window_len(scales.s_max());
    let rho_q = cfg.rho_qgrid()?;
    let scheme = cfg.windows.to_scheme();

    let mut rows = Vec::new();
    for other in cfg.inputs.iter().filter(|i| i.id != base_id) {
        let windowed = windowed_rho(
            &panel,
            (&base_id, &other.id),
            scheme,
            &cfg.lags,
            &rho_q,
            &scales,
            cfg.poly_order,
            min_len,
        )?;
        let pair_label = format!("{}__{}", base_id, other.id);
        let flagged = windowed.iter().filter(|w| w.summary.flagged_short).count();
        if flagged > 0 {
            eprintln!("{pair_label}: {flagged} windows below the minimum usable length {min_len}");
        }
        for w in windowed {
            rows.push((pair_label.clone(), w.summary));
        }
    }

    let files = vec![
        output::write_panel_summary_csv(&cfg.out_dir.join("panel_rho_summary.csv"), &meta, &rows)?,
        output::write_panel_summary_json(
            &cfg.out_dir.join("panel_rho_summary.json"),
            &meta,
            &rows,
        )?,
    ];
    report_files(&files);
    Ok(())
}

/// Emit a synthetic series (or pair) as quote CSVs on a fixed bar grid.
pub fn cmd_synth(
    spec: &GeneratorSpec,
    id: &str,
    out_dir: &std::path::Path,
    start_epoch: i64,
    bar_seconds: i64,
) -> Result<()> {
    let meta = Meta::from_json(
        serde_json::to_string(spec).expect("generator spec serializes"),
        spec.seed,
    );
    let files = match synth::generate(spec)? {
        synth::Generated::Single(s) => vec![output::write_quotes_csv(
            &out_dir.join(format!("{id}.csv")),
            &meta,
            &s.values,
            start_epoch,
            bar_seconds,
        )?],
        synth::Generated::Pair(x, y) => vec![
            output::write_quotes_csv(
                &out_dir.join(format!("{id}_x.csv")),
                &meta,
                &x.values,
                start_epoch,
                bar_seconds,
            )?,
            output::write_quotes_csv(
                &out_dir.join(format!("{id}_y.csv")),
                &meta,
                &y.values,
                start_epoch,
                bar_seconds,
            )?,
        ],
    };
    report_files(&files);
    Ok(())
}
