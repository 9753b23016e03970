//! `mfx` — multifractal time-series analysis from the command line.
//!
//! Subcommands: `mfdfa` (single-series fluctuation functions, h(q), tau(q)
//! and the singularity spectrum), `pair` (cross-correlation scaling and
//! rho_q with surrogate bands and lag scans), `tails` (CCDFs and tail
//! exponents), `panel` (windowed rho summaries against a base instrument)
//! and `synth` (seeded synthetic series).

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{AnalysisConfig, InputSpec, WindowSpec};
use mfx_core::synth::{GeneratorKind, GeneratorSpec};

#[derive(Parser)]
#[command(name = "mfx", version, about = "Multifractal time-series analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct CommonOpts {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input CSV file (repeatable). Columns default to timestamp,price.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,

    /// Output directory (default: $MFX_OUT_DIR or ./mfx-out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for every stochastic step.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread cap; 0 uses all cores. Results are identical for any
    /// value.
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long)]
    q_min: Option<f64>,
    #[arg(long)]
    q_max: Option<f64>,
    #[arg(long)]
    q_step: Option<f64>,
    #[arg(long)]
    s_min: Option<usize>,
    #[arg(long)]
    s_max: Option<usize>,
    #[arg(long)]
    s_points: Option<usize>,

    /// Detrending polynomial order (1..=5).
    #[arg(long)]
    poly_order: Option<usize>,

    /// Sub-period scheme: "half-year" or a window count.
    #[arg(long)]
    windows: Option<WindowSpec>,

    /// Comma-separated signed lags in bar steps, e.g. --lags=-1,0,1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lags: Option<Vec<i64>>,

    /// Surrogate realizations for significance bands.
    #[arg(long)]
    surrogates: Option<usize>,

    /// Fraction of largest magnitudes used per tail fit.
    #[arg(long)]
    tail_quantile: Option<f64>,

    /// Drop returns spanning removed timestamp gaps instead of keeping them.
    #[arg(long)]
    drop_gap_returns: bool,

    /// Nominal seconds between quotes.
    #[arg(long)]
    bar_seconds: Option<i64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single-series multifractal analysis: F(q,s), h(q), tau(q), f(alpha).
    Mfdfa {
        #[command(flatten)]
        common: CommonOpts,
        /// With exactly two inputs, also run the pair workflow.
        #[arg(long)]
        pair: bool,
    },
    /// Cross-correlation analysis of one pair: MFCCA, rho_q, band, lags.
    Pair {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// CCDFs and power-law tail exponents per instrument and side.
    Tails {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Windowed rho summaries of every instrument against a base.
    Panel {
        #[command(flatten)]
        common: CommonOpts,
        /// Base instrument id (default: the first input).
        #[arg(long)]
        base: Option<String>,
    },
    /// Generate a synthetic series (or pair) as quote CSVs.
    Synth {
        /// fgn | cascade | pareto | coupled | regime-switch
        #[arg(long)]
        kind: String,
        /// Output series id (file name stem).
        #[arg(long, default_value = "synth")]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Series length (ignored for cascades).
        #[arg(long, default_value_t = 65536)]
        length: usize,
        /// Hurst exponent for fgn.
        #[arg(long)]
        hurst: Option<f64>,
        /// Cascade multiplier p in (0.5, 1).
        #[arg(long)]
        multiplier: Option<f64>,
        /// Cascade depth k (length 2^k).
        #[arg(long)]
        depth: Option<u32>,
        /// Multiply cascade increments by i.i.d. signs.
        #[arg(long)]
        sign_randomize: bool,
        /// Pareto tail exponent gamma > 1.
        #[arg(long)]
        gamma: Option<f64>,
        /// Coupling strength c in [0, 1] for coupled/regime-switch pairs.
        #[arg(long)]
        coupling: Option<f64>,
        /// Leave the largest fluctuations uncorrelated (coupled pairs).
        #[arg(long)]
        decouple_tails: bool,
        /// Index at which a regime-switch pair decouples.
        #[arg(long)]
        switch_index: Option<usize>,
        /// Epoch seconds of the first bar (default 2012-01-02 00:00 UTC).
        #[arg(long, default_value_t = 1325462400)]
        start_epoch: i64,
        #[arg(long, default_value_t = 300)]
        bar_seconds: i64,
    },
}

fn merge(common: &CommonOpts) -> Result<AnalysisConfig> {
    let mut cfg = match &common.config {
        Some(path) => AnalysisConfig::from_file(path)?,
        None => AnalysisConfig::default(),
    };
    if !common.inputs.is_empty() {
        cfg.inputs = common
            .inputs
            .iter()
            .map(|p| InputSpec::from_path(p.clone()))
            .collect();
    }
    if let Some(v) = &common.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    if let Some(v) = common.q_min {
        cfg.q_min = v;
    }
    if let Some(v) = common.q_max {
        cfg.q_max = v;
    }
    if let Some(v) = common.q_step {
        cfg.q_step = v;
    }
    if let Some(v) = common.s_min {
        cfg.s_min = v;
    }
    if let Some(v) = common.s_max {
        cfg.s_max = v;
    }
    if let Some(v) = common.s_points {
        cfg.s_points = v;
    }
    if let Some(v) = common.poly_order {
        cfg.poly_order = v;
    }
    if let Some(v) = common.windows {
        cfg.windows = v;
    }
    if let Some(v) = &common.lags {
        cfg.lags = v.clone();
    }
    if let Some(v) = common.surrogates {
        cfg.surrogates = v;
    }
    if let Some(v) = common.tail_quantile {
        cfg.tail_quantile = v;
    }
    if common.drop_gap_returns {
        cfg.drop_gap_returns = true;
    }
    if let Some(v) = common.bar_seconds {
        cfg.bar_seconds = v;
    }
    Ok(cfg)
}

/// Run `f` inside a rayon pool capped at `threads` workers (0 = all cores).
fn with_pool<T>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?
            .install(f)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Mfdfa { common, pair } => {
            let cfg = merge(&common)?;
            with_pool(cfg.threads, || commands::cmd_mfdfa(&cfg, pair))
        }
        Command::Pair { common } => {
            let cfg = merge(&common)?;
            with_pool(cfg.threads, || commands::cmd_pair(&cfg))
        }
        Command::Tails { common } => {
            let cfg = merge(&common)?;
            with_pool(cfg.threads, || commands::cmd_tails(&cfg))
        }
        Command::Panel { common, base } => {
            let cfg = merge(&common)?;
            with_pool(cfg.threads, || commands::cmd_panel(&cfg, base.as_deref()))
        }
        Command::Synth {
            kind,
            id,
            out,
            seed,
            length,
            hurst,
            multiplier,
            depth,
            sign_randomize,
            gamma,
            coupling,
            decouple_tails,
            switch_index,
            start_epoch,
            bar_seconds,
        } => {
            let kind = match kind.as_str() {
                "fgn" => GeneratorKind::Fgn {
                    hurst: hurst.unwrap_or(0.5),
                },
                "cascade" => GeneratorKind::Cascade {
                    multiplier: multiplier.unwrap_or(0.7),
                    depth: depth.unwrap_or(16),
                    sign_randomized: sign_randomize,
                },
                "pareto" => GeneratorKind::Pareto {
                    gamma: gamma.unwrap_or(3.0),
                },
                "coupled" => GeneratorKind::Coupled {
                    coupling: coupling.unwrap_or(0.7),
                    decouple_tails,
                },
                "regime-switch" => GeneratorKind::RegimeSwitch {
                    coupling: coupling.unwrap_or(0.7),
                    switch_index: switch_index.unwrap_or(length / 2),
                },
                other => bail!("unknown generator kind '{other}'"),
            };
            let spec = GeneratorSpec { kind, length, seed };
            let out_dir = out
                .or_else(|| std::env::var_os(config::OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("mfx-out"));
            commands::cmd_synth(&spec, &id, &out_dir, start_epoch, bar_seconds)
        }
    }
}
