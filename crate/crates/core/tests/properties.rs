//! Property tests for the structural invariants.

use proptest::prelude::*;

use mfx_core::detrend::{profile, BoxLayout, ScaleGrid};
use mfx_core::ingest::{
    align, log_returns, normalize, shift_pair, split_windows, AlignOptions, RawQuoteSeries,
    ReturnSeries, WindowScheme,
};
use mfx_core::mfdfa::QGrid;
use mfx_core::rhoq::rho;
use mfx_core::surrogate::shuffle;
use mfx_core::tails::{ccdf, TailSide};

fn price_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(10.0f64..1000.0, 8..200)
}

fn return_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05f64..0.05, 8..400)
}

proptest! {
    #[test]
    fn returns_cumsum_exp_recovers_prices(prices in price_vec()) {
        let ts: Vec<i64> = (0..prices.len() as i64).map(|i| i * 300).collect();
        let raw = RawQuoteSeries::new("p", ts, prices.clone(), 300).unwrap();
        let r = log_returns(&raw).unwrap();
        let mut p = prices[0];
        for (i, v) in r.values.iter().enumerate() {
            p *= v.exp();
            prop_assert!((p - prices[i + 1]).abs() / prices[i + 1] < 1e-10);
        }
    }

    #[test]
    fn normalize_has_zero_mean_unit_sd(values in return_vec()) {
        let s = ReturnSeries::new("t", values);
        prop_assume!(s.std_dev() > 1e-12);
        let n = normalize(&s).unwrap();
        prop_assert!(n.mean().abs() < 1e-9);
        prop_assert!((n.std_dev() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn split_windows_concatenates_back(values in return_vec(), k in 1usize..8) {
        let s = ReturnSeries::new("t", values.clone());
        prop_assume!(k <= values.len());
        let w = split_windows(&s, None, WindowScheme::FixedCount(k), 1).unwrap();
        prop_assert_eq!(w.len(), k);
        let cat: Vec<f64> = w.iter().flat_map(|w| w.series.values.clone()).collect();
        prop_assert_eq!(cat, values);
        // Earlier windows take the remainder.
        let lens: Vec<usize> = w.iter().map(|w| w.series.len()).collect();
        for i in 1..lens.len() {
            prop_assert!(lens[i - 1] >= lens[i]);
            prop_assert!(lens[i - 1] - lens[i] <= 1);
        }
    }

    #[test]
    fn half_year_windows_cover_and_order(n in 10usize..500, start in 0i64..2_000_000_000) {
        let ts: Vec<i64> = (0..n as i64).map(|i| start + i * 86_400).collect();
        let s = ReturnSeries::new("t", vec![0.5; n]);
        let w = split_windows(&s, Some(&ts), WindowScheme::HalfYear, 1).unwrap();
        let total: usize = w.iter().map(|w| w.series.len()).sum();
        prop_assert_eq!(total, n);
        let labels: Vec<String> = w.iter().filter_map(|w| w.series.window_label.clone()).collect();
        for pair in labels.windows(2) {
            prop_assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn shift_roundtrip_restores_overlap(values in return_vec(), k in 1usize..5) {
        prop_assume!(values.len() > 2 * k + 1);
        let x = ReturnSeries::new("x", values);
        let (a, b) = shift_pair(&x, &x, k as i64).unwrap();
        let (c, d) = shift_pair(&a, &b, -(k as i64)).unwrap();
        // After the inverse shift the overlap is synchronous again: both
        // outputs are the same x[k .. n-k] slice.
        prop_assert_eq!(&c.values, &d.values);
        prop_assert_eq!(c.values.len(), x.values.len() - 2 * k);
    }

    #[test]
    fn shuffle_preserves_multiset(values in return_vec(), seed in any::<u64>()) {
        let s = ReturnSeries::new("t", values.clone());
        let sh = shuffle(&s, seed);
        let mut a = values;
        let mut b = sh.values;
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn profile_ends_at_zero(values in return_vec()) {
        let p = profile(&values);
        let scale = values.iter().map(|v| v.abs()).sum::<f64>().max(1e-12);
        prop_assert!(p.last().unwrap().abs() < 1e-9 * scale);
    }

    #[test]
    fn layout_tiles_from_both_ends(t in 10usize..5000, s in 2usize..100) {
        prop_assume!(s <= t);
        let l = BoxLayout::new(t, s).unwrap();
        prop_assert_eq!(l.n_boxes(), 2 * (t / s));
        for nu in 0..l.n_boxes() {
            let r = l.box_range(nu);
            prop_assert_eq!(r.len(), s);
            prop_assert!(r.end <= t);
        }
    }

    #[test]
    fn ccdf_is_strictly_decreasing(values in prop::collection::vec(-3.0f64..3.0, 20..200)) {
        let mut s = ReturnSeries::new("t", values);
        s.normalized = true;
        for side in [TailSide::Positive, TailSide::Negative] {
            if let Ok(c) = ccdf(&s, side) {
                prop_assert!((c.p[0] - 1.0).abs() < 1e-12);
                for w in c.p.windows(2) {
                    prop_assert!(w[1] < w[0]);
                }
                for w in c.r.windows(2) {
                    prop_assert!(w[1] > w[0]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn align_is_order_invariant(
        offsets in prop::collection::vec(0usize..4, 2..5),
        perm_seed in any::<u64>(),
    ) {
        let n = 60;
        let series: Vec<RawQuoteSeries> = offsets
            .iter()
            .enumerate()
            .map(|(i, &off)| {
                let ts: Vec<i64> = (0..n).map(|j| (j + off as i64) * 300).collect();
                let prices: Vec<f64> = (0..n).map(|j| 100.0 + (i as f64) + (j as f64) * 0.1).collect();
                RawQuoteSeries::new(format!("s{i}"), ts, prices, 300).unwrap()
            })
            .collect();
        let a = align(&series, AlignOptions::default()).unwrap();
        let mut permuted = series.clone();
        // Deterministic permutation from the seed.
        let k = (perm_seed as usize) % permuted.len();
        permuted.rotate_left(k);
        let b = align(&permuted, AlignOptions::default()).unwrap();
        prop_assert_eq!(&a.timestamps, &b.timestamps);
        for col in &a.columns {
            let other = b.column(&col.instrument_id).unwrap();
            prop_assert_eq!(&col.values, &other.values);
        }
    }

    #[test]
    fn rho_symmetric_bounded_and_sign_covariant(seed in any::<u64>()) {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 600;
        let x = ReturnSeries::new("x", (0..n).map(|_| rng.random::<f64>() - 0.5).collect());
        let y = ReturnSeries::new("y", (0..n).map(|_| rng.random::<f64>() - 0.5).collect());
        let qgrid = QGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let scales = ScaleGrid::log_spaced(8, n / 4, 6).unwrap();
        let a = rho(&x, &y, &qgrid, &scales, 2).unwrap();
        let b = rho(&y, &x, &qgrid, &scales, 2).unwrap();
        let yneg = ReturnSeries::new("yn", y.values.iter().map(|v| -v).collect());
        let c = rho(&x, &yneg, &qgrid, &scales, 2).unwrap();
        for qi in 0..qgrid.len() {
            for si in 0..scales.len() {
                let v = a.rho[qi][si];
                prop_assert!(v.is_finite());
                prop_assert!(v.abs() <= 1.0 + 1e-9);
                prop_assert_eq!(v, b.rho[qi][si]);
                prop_assert!((v + c.rho[qi][si]).abs() < 1e-12);
            }
        }
    }
}
