//! Shared detrending kernel: integrated profiles, two-ended box layouts and
//! order-m polynomial residuals.
//!
//! The box partition takes `M_s = floor(T/s)` boxes from the start of the
//! series and another `M_s` from the end, so no samples are discarded when
//! `s` does not divide `T`. Polynomial fits use a discrete orthonormal basis
//! built by a three-term recurrence, which keeps the normal equations
//! well-conditioned up to the largest scales in use.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

/// Strictly increasing integer box sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaleGrid {
    scales: Vec<usize>,
}

impl ScaleGrid {
    pub fn new(scales: Vec<usize>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("scale grid must not be empty"));
        }
        if scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("scales must be strictly increasing"));
        }
        Ok(Self { scales })
    }

    /// `n` logarithmically spaced integer scales from `s_min` to `s_max`,
    /// deduplicated after rounding.
    pub fn log_spaced(s_min: usize, s_max: usize, n: usize) -> Result<Self> {
        if s_min < 2 || s_max < s_min || n == 0 {
            return Err(Error::invalid(format!(
                "bad scale grid spec: s_min={s_min} s_max={s_max} n={n}"
            )));
        }
        let (lo, hi) = ((s_min as f64).ln(), (s_max as f64).ln());
        let mut scales: Vec<usize> = (0..n)
            .map(|i| {
                let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                (lo + f * (hi - lo)).exp().round() as usize
            })
            .collect();
        scales.dedup();
        Self::new(scales)
    }

    /// Default grid for a series of length `t`: 25 log-spaced scales from 10
    /// to `min(3750, t/4)`.
    pub fn default_for_len(t: usize) -> Result<Self> {
        let s_max = (t / 4).min(3750);
        if s_max < 10 {
            return Err(Error::TooShort { needed: 40, got: t });
        }
        Self::log_spaced(10, s_max, 25)
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn s_min(&self) -> usize {
        self.scales[0]
    }

    pub fn s_max(&self) -> usize {
        *self.scales.last().unwrap()
    }

    /// Check the grid against a series length and detrending order:
    /// the smallest box must overdetermine the fit and the largest must not
    /// exceed a quarter of the series.
    pub fn validate_for(&self, t: usize, order: usize) -> Result<()> {
        if self.s_min() < order + 2 {
            return Err(Error::UnderdeterminedFit {
                len: self.s_min(),
                order,
            });
        }
        if self.s_max() > t / 4 {
            return Err(Error::ScaleBeyondQuarter {
                scale: self.s_max(),
                len: t,
            });
        }
        Ok(())
    }

    /// The sub-grid usable for a series of length `t`, or `None` when no
    /// scale fits.
    pub fn restrict_to_len(&self, t: usize) -> Option<ScaleGrid> {
        let kept: Vec<usize> = self
            .scales
            .iter()
            .copied()
            .filter(|&s| s <= t / 4)
            .collect();
        if kept.is_empty() {
            None
        } else {
            Some(ScaleGrid { scales: kept })
        }
    }
}

/// Partition of a length-`t` series into `2*m_s` boxes of size `s`:
/// `m_s` from the start and `m_s` from the end.
#[derive(Debug, Clone, Copy)]
pub struct BoxLayout {
    pub t: usize,
    pub s: usize,
    pub m_s: usize,
}

impl BoxLayout {
    pub fn new(t: usize, s: usize) -> Result<Self> {
        if s == 0 || s > t {
            return Err(Error::ScaleTooLarge { scale: s, len: t });
        }
        Ok(Self { t, s, m_s: t / s })
    }

    pub fn n_boxes(&self) -> usize {
        2 * self.m_s
    }

    /// Index range of box `nu`. Boxes `0..m_s` run forward from the start;
    /// boxes `m_s..2*m_s` run backward from the end. When `s` divides `t`
    /// the two partitions coincide as index sets but both are emitted.
    pub fn box_range(&self, nu: usize) -> Range<usize> {
        debug_assert!(nu < self.n_boxes());
        if nu < self.m_s {
            let start = nu * self.s;
            start..start + self.s
        } else {
            let end = self.t - (nu - self.m_s) * self.s;
            end - self.s..end
        }
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.n_boxes()).map(move |nu| self.box_range(nu))
    }
}

/// Integrated profile: cumulative sum of the mean-subtracted values.
pub fn profile(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect()
}

/// Detrended profile segment: the residual after subtracting the fitted
/// order-m polynomial.
#[derive(Debug, Clone)]
pub struct ResidualBox {
    pub values: Vec<f64>,
}

/// Discrete orthonormal polynomial basis over the within-box index
/// `i = 1..=s`, degrees `0..=order`. Built once per scale and shared across
/// boxes.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    s: usize,
    order: usize,
    /// `basis[k][i]` = value of the degree-k orthonormal polynomial at i.
    basis: Vec<Vec<f64>>,
}

/// Highest detrending order supported.
pub const MAX_POLY_ORDER: usize = 5;

impl PolyBasis {
    pub fn new(s: usize, order: usize) -> Result<Self> {
        if order > MAX_POLY_ORDER {
            return Err(Error::invalid(format!(
                "polynomial order {order} exceeds maximum {MAX_POLY_ORDER}"
            )));
        }
        if s < order + 2 {
            return Err(Error::UnderdeterminedFit { len: s, order });
        }
        let t: Vec<f64> = (1..=s).map(|i| i as f64).collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);

        let norm = (s as f64).sqrt();
        basis.push(t.iter().map(|_| 1.0 / norm).collect());

        for k in 0..order {
            // Three-term recurrence: q = (t - a_k) p_k - b_k p_{k-1}.
            let pk = &basis[k];
            let a: f64 = t.iter().zip(pk).map(|(ti, p)| ti * p * p).sum();
            let mut q: Vec<f64> = t.iter().zip(pk).map(|(ti, p)| (ti - a) * p).collect();
            if k > 0 {
                let pk1 = &basis[k - 1];
                let b: f64 = t
                    .iter()
                    .zip(pk.iter().zip(pk1))
                    .map(|(ti, (p, p1))| ti * p * p1)
                    .sum();
                for (qi, p1) in q.iter_mut().zip(pk1) {
                    *qi -= b * p1;
                }
            }
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::UnderdeterminedFit { len: s, order });
            }
            for v in q.iter_mut() {
                *v /= norm;
            }
            basis.push(q);
        }

        Ok(Self { s, order, basis })
    }

    pub fn scale(&self) -> usize {
        self.s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn project(&self, seg: &[f64]) -> [f64; MAX_POLY_ORDER + 1] {
        let mut c = [0.0; MAX_POLY_ORDER + 1];
        for (k, p) in self.basis.iter().enumerate() {
            c[k] = seg.iter().zip(p).map(|(v, b)| v * b).sum();
        }
        c
    }

    /// Residuals of the least-squares polynomial fit to `seg`.
    pub fn residuals(&self, seg: &[f64]) -> Vec<f64> {
        debug_assert_eq!(seg.len(), self.s);
        let c = self.project(seg);
        (0..self.s)
            .map(|i| {
                let mut fit = 0.0;
                for (k, p) in self.basis.iter().enumerate() {
                    fit += c[k] * p[i];
                }
                seg[i] - fit
            })
            .collect()
    }

    /// Mean squared residual of the fit: the detrended variance
    /// `f^2 = (1/s) sum_i r_i^2` of one box.
    pub(crate) fn variance_moment(&self, seg: &[f64]) -> f64 {
        let c = self.project(seg);
        let mut acc = 0.0;
        for i in 0..self.s {
            let mut fit = 0.0;
            for (k, p) in self.basis.iter().enumerate() {
                fit += c[k] * p[i];
            }
            let r = seg[i] - fit;
            acc += r * r;
        }
        acc / self.s as f64
    }

    /// Detrended variances and covariance of a pair of box segments:
    /// `(f_xx^2, f_yy^2, f_xy^2)`. Both fits use the same basis, and the
    /// accumulation order is fixed so that algebraic identities such as
    /// y = -x propagate exactly.
    pub(crate) fn cross_moments(&self, seg_x: &[f64], seg_y: &[f64]) -> (f64, f64, f64) {
        let cx = self.project(seg_x);
        let cy = self.project(seg_y);
        let (mut fxx, mut fyy, mut fxy) = (0.0, 0.0, 0.0);
        for i in 0..self.s {
            let mut fit_x = 0.0;
            let mut fit_y = 0.0;
            for (k, p) in self.basis.iter().enumerate() {
                fit_x += cx[k] * p[i];
                fit_y += cy[k] * p[i];
            }
            let rx = seg_x[i] - fit_x;
            let ry = seg_y[i] - fit_y;
            fxx += rx * rx;
            fyy += ry * ry;
            fxy += rx * ry;
        }
        let s = self.s as f64;
        (fxx / s, fyy / s, fxy / s)
    }
}

/// Subtract the least-squares polynomial of degree `m` (in the within-box
/// index) from a profile segment.
pub fn detrend_box(segment: &[f64], m: usize) -> Result<ResidualBox> {
    let basis = PolyBasis::new(segment.len(), m)?;
    Ok(ResidualBox {
        values: basis.residuals(segment),
    })
}

/// Detrended variance f^2 of every box of a profile at scale `s`, in box
/// order (start boxes then end boxes).
pub(crate) fn scale_variances(profile: &[f64], s: usize, order: usize) -> Result<Vec<f64>> {
    let layout = BoxLayout::new(profile.len(), s)?;
    let basis = PolyBasis::new(s, order)?;
    Ok(layout
        .ranges()
        .map(|r| basis.variance_moment(&profile[r]))
        .collect())
}

/// Detrended `(f_xx^2, f_yy^2, f_xy^2)` of every box of a profile pair at
/// scale `s`, in box order.
pub(crate) fn scale_cross_moments(
    profile_x: &[f64],
    profile_y: &[f64],
    s: usize,
    order: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if profile_x.len() != profile_y.len() {
        return Err(Error::LengthMismatch {
            left: profile_x.len(),
            right: profile_y.len(),
        });
    }
    let layout = BoxLayout::new(profile_x.len(), s)?;
    let basis = PolyBasis::new(s, order)?;
    Ok(layout
        .ranges()
        .map(|r| basis.cross_moments(&profile_x[r.clone()], &profile_y[r]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn profile_alternating() {
        assert_eq!(profile(&[1.0, -1.0, 1.0, -1.0]), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn profile_constant_is_zero() {
        let p = profile(&[3.5; 7]);
        assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn profile_small_example() {
        let p = profile(&[1.0, 2.0, 3.0]);
        assert_eq!(p, vec![-1.0, -1.0, 0.0]);
    }

    #[test]
    fn layout_t10_s3() {
        let l = BoxLayout::new(10, 3).unwrap();
        assert_eq!(l.m_s, 3);
        assert_eq!(l.n_boxes(), 6);
        assert_eq!(l.box_range(0), 0..3);
        assert_eq!(l.box_range(1), 3..6);
        assert_eq!(l.box_range(2), 6..9);
        assert_eq!(l.box_range(3), 7..10);
        assert_eq!(l.box_range(4), 4..7);
        assert_eq!(l.box_range(5), 1..4);
    }

    #[test]
    fn layout_exact_division_emits_both_partitions() {
        let l = BoxLayout::new(9, 3).unwrap();
        assert_eq!(l.n_boxes(), 6);
        let mut start: Vec<_> = (0..3).map(|nu| l.box_range(nu)).collect();
        let mut end: Vec<_> = (3..6).map(|nu| l.box_range(nu)).collect();
        start.sort_by_key(|r| r.start);
        end.sort_by_key(|r| r.start);
        assert_eq!(start, end);
    }

    #[test]
    fn layout_scale_too_large() {
        assert!(matches!(
            BoxLayout::new(5, 6),
            Err(Error::ScaleTooLarge { .. })
        ));
    }

    #[test]
    fn layout_boxes_tile_both_ends() {
        let l = BoxLayout::new(103, 10).unwrap();
        let mut covered_start = [false; 103];
        for nu in 0..l.m_s {
            for i in l.box_range(nu) {
                covered_start[i] = true;
            }
        }
        assert!(covered_start[..l.m_s * 10].iter().all(|&c| c));
        let mut covered_end = [false; 103];
        for nu in l.m_s..2 * l.m_s {
            for i in l.box_range(nu) {
                covered_end[i] = true;
            }
        }
        assert!(covered_end[103 - l.m_s * 10..].iter().all(|&c| c));
    }

    #[test]
    fn detrend_exact_quadratic_gives_zero_residuals() {
        let seg: Vec<f64> = (1..=40)
            .map(|i| {
                let i = i as f64;
                2.5 * i * i - 7.0 * i + 3.0
            })
            .collect();
        let r = detrend_box(&seg, 2).unwrap();
        let scale = seg.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(r.values.iter().all(|v| v.abs() < 1e-9 * scale));
    }

    #[test]
    fn detrend_cubic_with_m2_leaves_residuals() {
        let seg: Vec<f64> = (1..=40).map(|i| (i as f64).powi(3)).collect();
        let r = detrend_box(&seg, 2).unwrap();
        assert!(r.values.iter().any(|v| v.abs() > 1.0));
    }

    #[test]
    fn detrend_reduces_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seg: Vec<f64> = (0..100).map(|_| rng.random::<f64>() - 0.5).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        let r = detrend_box(&seg, 2).unwrap();
        assert!(var(&r.values) < var(&seg));
    }

    #[test]
    fn detrend_underdetermined_errors() {
        assert!(matches!(
            detrend_box(&[1.0, 2.0, 3.0], 2),
            Err(Error::UnderdeterminedFit { .. })
        ));
    }

    #[test]
    fn residuals_invariant_under_polynomial_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seg: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let shifted: Vec<f64> = seg
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let t = (i + 1) as f64;
                v + 4.0 - 2.0 * t + 0.3 * t * t
            })
            .collect();
        let r1 = detrend_box(&seg, 2).unwrap();
        let r2 = detrend_box(&shifted, 2).unwrap();
        let scale = shifted.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in r1.values.iter().zip(&r2.values) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn residual_sum_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seg: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 10.0).collect();
        for m in 0..=3 {
            let r = detrend_box(&seg, m).unwrap();
            assert!(r.values.iter().sum::<f64>().abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_orthogonal_to_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seg: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 100.0).collect();
        let basis = PolyBasis::new(200, 3).unwrap();
        let r = basis.residuals(&seg);
        let seg_norm = seg.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..=3 {
            let b = PolyBasis::new(200, 3).unwrap();
            let dot: f64 = r.iter().zip(&b.basis[k]).map(|(x, y)| x * y).sum();
            assert!(dot.abs() < 1e-8 * seg_norm, "degree {k}: {dot}");
        }
    }

    #[test]
    fn basis_well_conditioned_at_large_scale() {
        let basis = PolyBasis::new(3750, 5).unwrap();
        // All pairs orthonormal to near machine precision.
        for a in 0..=5 {
            for b in 0..=5 {
                let dot: f64 = basis.basis[a]
                    .iter()
                    .zip(&basis.basis[b])
                    .map(|(x, y)| x * y)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "({a},{b}): {dot}");
            }
        }
    }

    #[test]
    fn cross_moments_match_single_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..80).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..80).map(|_| rng.random::<f64>()).collect();
        let basis = PolyBasis::new(80, 2).unwrap();
        let (fxx, fyy, _) = basis.cross_moments(&x, &y);
        assert_eq!(fxx, basis.variance_moment(&x));
        assert_eq!(fyy, basis.variance_moment(&y));
    }

    #[test]
    fn cross_moments_negation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let basis = PolyBasis::new(64, 2).unwrap();
        let (fxx, fyy, fxy) = basis.cross_moments(&x, &neg);
        assert_eq!(fyy, fxx);
        assert_eq!(fxy, -fxx);
    }

    #[test]
    fn log_spaced_grid_default() {
        let g = ScaleGrid::default_for_len(1 << 17).unwrap();
        assert_eq!(g.s_min(), 10);
        assert_eq!(g.s_max(), 3750);
        assert!(g.len() <= 25 && g.len() > 20);
        g.validate_for(1 << 17, 2).unwrap();
    }

    #[test]
    fn grid_validation_catches_small_smin() {
        let g = ScaleGrid::new(vec![3, 10, 20]).unwrap();
        assert!(matches!(
            g.validate_for(1000, 2),
            Err(Error::UnderdeterminedFit { .. })
        ));
    }
}
