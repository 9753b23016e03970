//! Seeded shuffling surrogates and ensemble band statistics.
//!
//! A shuffle preserves the value distribution exactly while destroying all
//! temporal and cross structure, which makes it the significance null for
//! cross-correlation measures and the standard diagnostic for
//! correlation-induced multifractality.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;

/// Specification of a surrogate ensemble. Shuffling is the only surrogate
/// kind in scope.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SurrogateSpec {
    pub n_realizations: usize,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            n_realizations: 100,
            seed: 0,
        }
    }
}

/// Uniform random permutation of the series (Fisher-Yates under the seeded
/// generator named in [`crate::GENERATOR_ID`]). The multiset of values is
/// preserved exactly; the same seed yields the same permutation.
pub fn shuffle(series: &ReturnSeries, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = series.values.clone();
    values.shuffle(&mut rng);
    ReturnSeries {
        instrument_id: series.instrument_id.clone(),
        values,
        normalized: series.normalized,
        window_label: series.window_label.clone(),
    }
}

/// Elementwise ensemble statistics of a cell vector over realizations.
#[derive(Debug, Clone, Serialize)]
pub struct BandStats {
    pub mean: Vec<f64>,
    /// Standard deviation (divisor n-1); NaN-filled and flagged undefined
    /// when only one realization was run.
    pub sigma: Vec<f64>,
    pub n_realizations: usize,
    pub sigma_defined: bool,
}

/// Run `statistic` once per realization with the derived seed `seed + i`
/// and reduce to elementwise mean and standard deviation. Realizations run
/// in parallel; the reduction consumes them in realization order, so the
/// result does not depend on thread count.
pub fn band<F>(statistic: F, spec: &SurrogateSpec) -> Result<BandStats>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if spec.n_realizations == 0 {
        return Err(Error::invalid("surrogate ensemble needs n >= 1"));
    }
    let cells: Vec<Vec<f64>> = (0..spec.n_realizations as u64)
        .into_par_iter()
        .map(|i| statistic(spec.seed.wrapping_add(i)))
        .collect::<Result<_>>()?;

    let len = cells[0].len();
    if cells.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("statistic returned inconsistent cell counts"));
    }

    let n = spec.n_realizations as f64;
    let mut mean = vec![0.0; len];
    for c in &cells {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }

    let sigma_defined = spec.n_realizations > 1;
    let sigma = if sigma_defined {
        let mut ss = vec![0.0; len];
        for c in &cells {
            for ((s, v), m) in ss.iter_mut().zip(c).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        ss.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect()
    } else {
        vec![f64::NAN; len]
    };

    Ok(BandStats {
        mean,
        sigma,
        n_realizations: spec.n_realizations,
        sigma_defined,
    })
}
