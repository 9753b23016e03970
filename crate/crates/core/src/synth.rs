//! Seeded synthetic generators with known scaling properties, used both as
//! test oracles and as demo inputs for the CLI.
//!
//! Every generator is reproducible bit-for-bit from `(spec, seed)`. The
//! fractional Gaussian noise generator uses circulant embedding
//! (Davies-Harte), which realizes the target autocovariance exactly rather
//! than approximately; approximate generators must not be used where an
//! oracle is required.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::mfdfa::QGrid;

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GeneratorKind {
    /// Fractional Gaussian noise with Hurst exponent `hurst` in (0,1).
    Fgn { hurst: f64 },
    /// Deterministic binomial multiplicative cascade at depth `depth`
    /// (output length 2^depth) with multiplier `multiplier` in (0.5, 1).
    /// `sign_randomized` multiplies each increment by an i.i.d. +/-1 to
    /// mimic zero-mean returns; the analytic targets apply only to the
    /// unsigned cascade.
    Cascade {
        multiplier: f64,
        depth: u32,
        sign_randomized: bool,
    },
    /// Symmetric Pareto-tailed i.i.d. sample: random sign times a magnitude
    /// with survival P(>r) = r^(-gamma) for r >= 1.
    Pareto { gamma: f64 },
    /// Pair (x, y) with y = c*x + sqrt(1-c^2)*eta on the body of the
    /// distribution. With `decouple_tails`, both series additionally receive
    /// sparse large shocks at independent times, so the largest fluctuations
    /// carry no cross-correlation while small and medium ones stay coupled.
    Coupled { coupling: f64, decouple_tails: bool },
    /// Pair whose coupling switches off at `switch_index`: y is coupled to x
    /// with strength `coupling` before the switch and independent after.
    RegimeSwitch { coupling: f64, switch_index: usize },
}

/// Full specification of a synthetic series (or pair).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Output length. Ignored for cascades, whose length is 2^depth.
    pub length: usize,
    pub seed: u64,
}

/// Output of [`generate`]: a single series or a pair, depending on the kind.
#[derive(Debug, Clone)]
pub enum Generated {
    Single(ReturnSeries),
    Pair(ReturnSeries, ReturnSeries),
}

/// Shock probability per sample for tail-decoupled coupled pairs.
const SHOCK_PROB: f64 = 0.01;
/// Shock amplitude (in units of the body standard deviation).
const SHOCK_AMP: f64 = 8.0;

fn validate(spec: &GeneratorSpec) -> Result<()> {
    match spec.kind {
        GeneratorKind::Fgn { hurst } => {
            if !(hurst > 0.0 && hurst < 1.0) {
                return Err(Error::invalid(format!("fgn hurst {hurst} not in (0,1)")));
            }
            if spec.length < 2 {
                return Err(Error::TooShort { needed: 2, got: spec.length });
            }
        }
        GeneratorKind::Cascade { multiplier, depth, .. } => {
            if !(multiplier > 0.5 && multiplier < 1.0) {
                return Err(Error::invalid(format!(
                    "cascade multiplier {multiplier} not in (0.5,1)"
                )));
            }
            if depth == 0 || depth > 30 {
                return Err(Error::invalid(format!("cascade depth {depth} out of range")));
            }
        }
        GeneratorKind::Pareto { gamma } => {
            if gamma.is_nan() || gamma <= 1.0 {
                return Err(Error::invalid(format!("pareto gamma {gamma} must exceed 1")));
            }
            if spec.length < 2 {
                return Err(Error::TooShort { needed: 2, got: spec.length });
            }
        }
        GeneratorKind::Coupled { coupling, .. } => {
            if !(0.0..=1.0).contains(&coupling) {
                return Err(Error::invalid(format!("coupling {coupling} not in [0,1]")));
            }
            if spec.length < 2 {
                return Err(Error::TooShort { needed: 2, got: spec.length });
            }
        }
        GeneratorKind::RegimeSwitch { coupling, switch_index } => {
            if !(0.0..=1.0).contains(&coupling) {
                return Err(Error::invalid(format!("coupling {coupling} not in [0,1]")));
            }
            if switch_index >= spec.length {
                return Err(Error::invalid(format!(
                    "switch index {switch_index} beyond length {}",
                    spec.length
                )));
            }
        }
    }
    Ok(())
}

/// Generate the series (or pair) described by `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match spec.kind {
        GeneratorKind::Fgn { hurst } => {
            let v = fgn_davies_harte(hurst, spec.length, &mut rng);
            Generated::Single(named("fgn", v))
        }
        GeneratorKind::Cascade { multiplier, depth, sign_randomized } => {
            let mut v = binomial_cascade(multiplier, depth);
            if sign_randomized {
                for x in v.iter_mut() {
                    if rng.random::<bool>() {
                        *x = -*x;
                    }
                }
            }
            Generated::Single(named("cascade", v))
        }
        GeneratorKind::Pareto { gamma } => {
            let v = (0..spec.length)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mag = (1.0 - u).powf(-1.0 / gamma);
                    if rng.random::<bool>() { mag } else { -mag }
                })
                .collect();
            Generated::Single(named("pareto", v))
        }
        GeneratorKind::Coupled { coupling, decouple_tails } => {
            let (x, y) = coupled_pair(coupling, decouple_tails, spec.length, &mut rng);
            Generated::Pair(named("coupled_x", x), named("coupled_y", y))
        }
        GeneratorKind::RegimeSwitch { coupling, switch_index } => {
            let root = 1.0 - coupling * coupling;
            let noise_w = root.max(0.0).sqrt();
            let mut x = Vec::with_capacity(spec.length);
            let mut y = Vec::with_capacity(spec.length);
            for t in 0..spec.length {
                let g: f64 = rng.sample(StandardNormal);
                let eta: f64 = rng.sample(StandardNormal);
                x.push(g);
                y.push(if t < switch_index { coupling * g + noise_w * eta } else { eta });
            }
            Generated::Pair(named("regime_x", x), named("regime_y", y))
        }
    })
}

/// [`generate`] for kinds that yield one series.
pub fn generate_single(spec: &GeneratorSpec) -> Result<ReturnSeries> {
    match generate(spec)? {
        Generated::Single(s) => Ok(s),
        Generated::Pair(..) => Err(Error::invalid("generator kind yields a pair")),
    }
}

/// [`generate`] for kinds that yield a pair.
pub fn generate_pair(spec: &GeneratorSpec) -> Result<(ReturnSeries, ReturnSeries)> {
    match generate(spec)? {
        Generated::Pair(x, y) => Ok((x, y)),
        Generated::Single(_) => Err(Error::invalid("generator kind yields a single series")),
    }
}

fn named(id: &str, values: Vec<f64>) -> ReturnSeries {
    ReturnSeries::new(id, values)
}

fn coupled_pair(
    c: f64,
    decouple_tails: bool,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let noise_w = (1.0 - c * c).max(0.0).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        if decouple_tails {
            // The draw layout is fixed so the body stream is identical
            // whether or not a shock fires.
            let bx: f64 = rng.random();
            let by: f64 = rng.random();
            let ux: f64 = rng.sample(StandardNormal);
            let uy: f64 = rng.sample(StandardNormal);
            x.push(if bx < SHOCK_PROB { SHOCK_AMP * ux } else { g });
            y.push(if by < SHOCK_PROB {
                SHOCK_AMP * uy
            } else {
                c * g + noise_w * eta
            });
        } else {
            x.push(g);
            y.push(c * g + noise_w * eta);
        }
    }
    (x, y)
}

/// Deterministic binomial cascade: index i at depth k receives the product
/// of `multiplier` for each 0-bit and `1-multiplier` for each 1-bit of i.
fn binomial_cascade(p: f64, depth: u32) -> Vec<f64> {
    let n = 1usize << depth;
    let q = 1.0 - p;
    let mut pow_p = vec![1.0; depth as usize + 1];
    let mut pow_q = vec![1.0; depth as usize + 1];
    for j in 1..=depth as usize {
        pow_p[j] = pow_p[j - 1] * p;
        pow_q[j] = pow_q[j - 1] * q;
    }
    (0..n)
        .map(|i| {
            let ones = i.count_ones() as usize;
            pow_p[depth as usize - ones] * pow_q[ones]
        })
        .collect()
}

/// Exact fGn sample of length `n` via circulant embedding. The embedding is
/// padded to a power of two for the FFT; the covariance of the returned
/// sample is exact regardless of padding.
fn fgn_davies_harte(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n2 = n.next_power_of_two().max(2);
    let m = 2 * n2;

    // fGn autocovariance r(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H)/2, r(0)=1.
    let two_h = 2.0 * h;
    let r = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
        }
    };

    // First row of the circulant: [r0 .. r_{n2}, r_{n2-1} .. r_1].
    let mut c: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..=n2 {
        c.push(Complex::new(r(k), 0.0));
    }
    for k in (1..n2).rev() {
        c.push(Complex::new(r(k), 0.0));
    }
    debug_assert_eq!(c.len(), m);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);

    // Eigenvalues of the embedding; non-negative for fGn, clamp rounding.
    let lambda: Vec<f64> = c
        .iter()
        .map(|v| {
            debug_assert!(v.re > -1e-8, "circulant eigenvalue {} < 0", v.re);
            v.re.max(0.0)
        })
        .collect();

    let mf = m as f64;
    let mut a = vec![Complex::new(0.0, 0.0); m];
    let g0: f64 = rng.sample(StandardNormal);
    a[0] = Complex::new((lambda[0] / mf).sqrt() * g0, 0.0);
    let gh: f64 = rng.sample(StandardNormal);
    a[n2] = Complex::new((lambda[n2] / mf).sqrt() * gh, 0.0);
    for j in 1..n2 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let w = (lambda[j] / (2.0 * mf)).sqrt();
        a[j] = Complex::new(w * re, w * im);
        a[m - j] = a[j].conj();
    }

    fft.process(&mut a);
    a.truncate(n);
    a.into_iter().map(|v| v.re).collect()
}

/// Exact scaling curves for generators whose multifractal structure is known
/// in closed form (fGn and the unsigned binomial cascade).
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticTargets {
    pub qs: Vec<f64>,
    pub h: Vec<f64>,
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f: Vec<f64>,
}

/// Closed-form h(q), tau(q), alpha(q) and f(alpha(q)) on the given q-grid.
///
/// For fGn: h(q) = H. For the binomial cascade with multiplier p:
/// tau(q) = -log2(p^q + (1-p)^q), h(q) = (tau(q)+1)/q with the analytic
/// q -> 0 limit, and alpha(q) = tau'(q) evaluated exactly.
pub fn analytic_targets(spec: &GeneratorSpec, qgrid: &QGrid) -> Result<AnalyticTargets> {
    let qs = qgrid.qs().to_vec();
    match spec.kind {
        GeneratorKind::Fgn { hurst } => {
            let h = vec![hurst; qs.len()];
            let tau: Vec<f64> = qs.iter().map(|q| q * hurst - 1.0).collect();
            let alpha = vec![hurst; qs.len()];
            let f = vec![1.0; qs.len()];
            Ok(AnalyticTargets { qs, h, tau, alpha, f })
        }
        GeneratorKind::Cascade { multiplier: p, .. } => {
            let ln2 = std::f64::consts::LN_2;
            let pq = 1.0 - p;
            let tau_of = |q: f64| -> f64 { -(p.powf(q) + pq.powf(q)).ln() / ln2 };
            let alpha_of = |q: f64| -> f64 {
                let (a, b) = (p.powf(q), pq.powf(q));
                -(a * p.ln() + b * pq.ln()) / ((a + b) * ln2)
            };
            let h: Vec<f64> = qs
                .iter()
                .map(|&q| {
                    if q.abs() < 1e-12 {
                        // lim_{q->0} (tau(q)+1)/q = tau'(0)
                        alpha_of(0.0)
                    } else {
                        (tau_of(q) + 1.0) / q
                    }
                })
                .collect();
            let tau: Vec<f64> = qs.iter().map(|&q| tau_of(q)).collect();
            let alpha: Vec<f64> = qs.iter().map(|&q| alpha_of(q)).collect();
            let f: Vec<f64> = qs
                .iter()
                .zip(alpha.iter().zip(&tau))
                .map(|(&q, (&a, &t))| q * a - t)
                .collect();
            Ok(AnalyticTargets { qs, h, tau, alpha, f })
        }
        _ => Err(Error::invalid(
            "analytic targets exist only for fgn and cascade kinds",
        )),
    }
}
