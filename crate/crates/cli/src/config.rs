//! Analysis configuration: defaults mirror the standard protocol (q in
//! [-4,4] step 0.5 for single series, step 0.2 for cross moments, scales
//! 10..3750, second-order detrending, 100 surrogate realizations, top-1%
//! tail fits). Values come from an optional TOML file plus command-line
//! flags; flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mfx_core::detrend::{ScaleGrid, MAX_POLY_ORDER};
use mfx_core::mfdfa::QGrid;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub id: String,
    pub path: PathBuf,
    #[serde(default = "default_time_col")]
    pub time_col: String,
    #[serde(default = "default_price_col")]
    pub price_col: String,
}

fn default_time_col() -> String {
    "timestamp".into()
}

fn default_price_col() -> String {
    "price".into()
}

impl InputSpec {
    pub fn from_path(path: PathBuf) -> Self {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".into());
        Self {
            id,
            path,
            time_col: default_time_col(),
            price_col: default_price_col(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSpec {
    HalfYear,
    Count(usize),
}

impl std::str::FromStr for WindowSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "half-year" {
            Ok(WindowSpec::HalfYear)
        } else {
            s.parse::<usize>()
                .map(WindowSpec::Count)
                .map_err(|_| format!("windows must be 'half-year' or a count, got '{s}'"))
        }
    }
}

impl WindowSpec {
    pub fn to_scheme(self) -> mfx_core::ingest::WindowScheme {
        match self {
            WindowSpec::HalfYear => mfx_core::ingest::WindowScheme::HalfYear,
            WindowSpec::Count(k) => mfx_core::ingest::WindowScheme::FixedCount(k),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    #[serde(rename = "input")]
    pub inputs: Vec<InputSpec>,
    pub bar_seconds: i64,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub cross_q_step: f64,
    pub rho_qs: Vec<f64>,
    pub s_min: usize,
    /// Upper scale; 0 means min(3750, T/4) per series.
    pub s_max: usize,
    pub s_points: usize,
    pub poly_order: usize,
    pub windows: WindowSpec,
    pub lags: Vec<i64>,
    pub surrogates: usize,
    pub tail_quantile: f64,
    pub drop_gap_returns: bool,
    pub seed: u64,
    /// Worker cap; 0 uses all cores.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            bar_seconds: 300,
            q_min: -4.0,
            q_max: 4.0,
            q_step: 0.5,
            cross_q_step: 0.2,
            rho_qs: vec![1.0, 2.0, 3.0, 4.0],
            s_min: 10,
            s_max: 0,
            s_points: 25,
            poly_order: 2,
            windows: WindowSpec::HalfYear,
            lags: vec![0],
            surrogates: 100,
            tail_quantile: 0.01,
            drop_gap_returns: false,
            seed: 0,
            threads: 0,
            out_dir: default_out_dir(),
        }
    }
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MFX_OUT_DIR";

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("mfx-out"))
}

impl AnalysisConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: AnalysisConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok(cfg)
    }

    /// Validate every structural precondition before any computation.
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_POLY_ORDER).contains(&self.poly_order) {
            bail!(
                "poly order {} out of range 1..={MAX_POLY_ORDER}",
                self.poly_order
            );
        }
        if self.s_min < self.poly_order + 2 {
            bail!(
                "s_min {} too small for polynomial order {}: boxes must have at least {} points",
                self.s_min,
                self.poly_order,
                self.poly_order + 2
            );
        }
        if self.s_max != 0 && self.s_max < self.s_min {
            bail!("s_max {} below s_min {}", self.s_max, self.s_min);
        }
        if self.s_points < 3 {
            bail!("need at least 3 scale points, got {}", self.s_points);
        }
        if self.q_step <= 0.0 || self.q_max < self.q_min {
            bail!(
                "bad q grid: [{}, {}] step {}",
                self.q_min,
                self.q_max,
                self.q_step
            );
        }
        if self.cross_q_step <= 0.0 {
            bail!("cross q step must be positive");
        }
        if self.rho_qs.is_empty() || self.rho_qs.iter().any(|q| *q <= 0.0) {
            bail!("rho q values must be positive");
        }
        if self.rho_qs.windows(2).any(|w| w[1] <= w[0]) {
            bail!("rho q values must be strictly increasing");
        }
        if !(self.tail_quantile > 0.0 && self.tail_quantile < 0.5) {
            bail!(
                "tail quantile {} must lie in (0, 0.5)",
                self.tail_quantile
            );
        }
        if self.lags.is_empty() {
            bail!("at least one lag required");
        }
        if self.bar_seconds <= 0 {
            bail!("bar_seconds must be positive");
        }
        if let WindowSpec::Count(0) = self.windows {
            bail!("window count must be positive");
        }
        Ok(())
    }

    pub fn single_qgrid(&self) -> Result<QGrid> {
        QGrid::range(self.q_min, self.q_max, self.q_step).map_err(Into::into)
    }

    pub fn cross_qgrid(&self) -> Result<QGrid> {
        let lo = if self.q_min > 0.0 {
            self.q_min
        } else {
            self.cross_q_step
        };
        QGrid::range(lo, self.q_max, self.cross_q_step).map_err(Into::into)
    }

    pub fn rho_qgrid(&self) -> Result<QGrid> {
        QGrid::new(self.rho_qs.clone()).map_err(Into::into)
    }

    /// Scale grid for a series of length `t`, applying the configured bounds
    /// and the T/4 cap.
    pub fn scale_grid(&self, t: usize) -> Result<ScaleGrid> {
        let cap = t / 4;
        let s_max = if self.s_max == 0 {
            cap.min(3750)
        } else {
            self.s_max
        };
        if s_max > cap {
            bail!(
                "s_max {} exceeds a quarter of the series length {} (cap {})",
                s_max,
                t,
                cap
            );
        }
        if s_max < self.s_min {
            bail!("series too short: usable s_max {} below s_min {}", cap, self.s_min);
        }
        ScaleGrid::log_spaced(self.s_min, s_max, self.s_points).map_err(Into::into)
    }

    /// Minimum usable window length: 4 times the effective largest scale.
    pub fn min_window_len(&self, s_max_effective: usize) -> usize {
        4 * s_max_effective
    }
}
