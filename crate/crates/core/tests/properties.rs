mod common;

use oilcast::dataset::ColumnScale;
use oilcast::dataset::{
    fill_gaps, fit_scaler, make_windows, spearman, ColumnRole, SplitSpec, WindowSpec,
};
use oilcast::decompose::decompose;
use oilcast::ensemble::{fuse, search_weights, EnsembleWeights, ForecastSet};
use oilcast::evaluation::metrics;
use oilcast::numeric::Array2;
use oilcast::training::EpochSchedule;
use proptest::prelude::*;

use common::*;

fn pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3..max).prop_flat_map(|n| {
        let v = || {
            prop::collection::vec(
                prop_oneof![(-50i32..50).prop_map(f64::from), -50.0..50.0f64],
                n,
            )
        };
        (v(), v())
    })
}

fn non_constant(v: &[f64]) -> bool {
    v.iter().any(|&a| a != v[0])
}

proptest! {
    #[test]
    fn spearman_symmetric_monotone_invariant_and_matches_oracle((x, y) in pair(40)) {
        prop_assume!(non_constant(&x) && non_constant(&y));
        let rho = spearman(&x, &y).unwrap();
        prop_assert_eq!(rho, spearman(&y, &x).unwrap());
        prop_assert!((rho - oracle_spearman(&x, &y)).abs() <= 1e-12);
        let cubed: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        let squashed: Vec<f64> = y.iter().map(|v| (v / 50.0).exp()).collect();
        prop_assert!((spearman(&cubed, &squashed).unwrap() - rho).abs() <= 1e-12);
    }

    #[test]
    fn interpolation_reproduces_a_line(
        slope in -5.0..5.0f64,
        icept in -100.0..100.0f64,
        mask in prop::collection::vec(any::<bool>(), 3..60),
    ) {
        let n = mask.len();
        let line: Vec<f64> = (0..n).map(|t| icept + slope * t as f64).collect();
        let mut gapped: Vec<Option<f64>> = line.iter().map(|&v| Some(v)).collect();
        for (i, &hole) in mask.iter().enumerate().take(n - 1).skip(1) {
            if hole {
                gapped[i] = None;
            }
        }
        let filled = fill_gaps(&gapped).unwrap();
        for t in 0..n {
            prop_assert!((filled[t] - line[t]).abs() <= 1e-9 * (1.0 + line[t].abs()));
        }
    }

    #[test]
    fn decomposition_reconstructs_and_is_shift_equivariant(
        series in prop::collection::vec(-100.0..100.0f64, 5..80),
        half in 1usize..6,
        shift in -50.0..50.0f64,
    ) {
        let w = (2 * half + 1).min(if series.len() % 2 == 1 { series.len() } else { series.len() - 1 });
        let d = decompose(&series, w).unwrap();
        for (t, &v) in series.iter().enumerate() {
            prop_assert!((d.trend[t] + d.residual[t] - v).abs() <= 1e-12);
        }
        let shifted: Vec<f64> = series.iter().map(|v| v + shift).collect();
        let s = decompose(&shifted, w).unwrap();
        for t in 0..series.len() {
            prop_assert!((s.trend[t] - d.trend[t] - shift).abs() <= 1e-9);
            prop_assert!((s.residual[t] - d.residual[t]).abs() <= 1e-9);
        }
    }

    #[test]
    fn metrics_affine_and_permutation_invariant(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..50),
        a in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
        b in -100.0..100.0f64,
        rot in 0usize..50,
    ) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let m = metrics(&y, &p).unwrap();
        prop_assert!((m.rmse - m.mse.sqrt()).abs() <= 1e-12);
        prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12) && m.mae >= 0.0);
        let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let pa: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let s = metrics(&ya, &pa).unwrap();
        let tol = |x: f64| 1e-9 * (1.0 + x.abs());
        prop_assert!((s.mae - a.abs() * m.mae).abs() <= tol(s.mae));
        prop_assert!((s.mse - a * a * m.mse).abs() <= tol(s.mse));
        prop_assert!((s.rmse - a.abs() * m.rmse).abs() <= tol(s.rmse));
        let k = rot % y.len();
        let (mut yr, mut pr) = (y.clone(), p.clone());
        yr.rotate_left(k);
        pr.rotate_left(k);
        let r = metrics(&yr, &pr).unwrap();
        prop_assert!((r.mae - m.mae).abs() <= 1e-12 * (1.0 + m.mae));
        prop_assert!((r.mse - m.mse).abs() <= 1e-12 * (1.0 + m.mse));
    }

    #[test]
    fn fuse_is_linear_in_each_forecast(
        vals in prop::collection::vec(-5.0..5.0f64, 24),
        w in (0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
        which in 0usize..3,
    ) {
        let arr = |i: usize| Array2::new(2, 2, vals[4 * i..4 * i + 4].to_vec()).unwrap();
        let dates = vec![day(2020, 1, 1), day(2020, 1, 2)];
        let weights = EnsembleWeights::new(w.0, w.1, w.2).unwrap();
        let base = [arr(0), arr(1), arr(2)];
        let with = |slot: Array2| {
            let mut f = base.clone();
            f[which] = slot;
            fuse(&ForecastSet::new(f[0].clone(), f[1].clone(), f[2].clone(), dates.clone()).unwrap(), &weights).unwrap()
        };
        let (f, g) = (arr(3), arr(4));
        let combo = f.scale(alpha).add(&g.scale(beta)).unwrap();
        let zero = Array2::zeros(2, 2);
        // linear (not affine): subtract the contribution of the other slots
        let offset = with(zero);
        let lhs = with(combo).sub(&offset).unwrap();
        let rhs = with(f).sub(&offset).unwrap().scale(alpha)
            .add(&with(g).sub(&offset).unwrap().scale(beta)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9);

        let zeros = ForecastSet::new(Array2::zeros(2, 2), Array2::zeros(2, 2), Array2::zeros(2, 2), dates).unwrap();
        prop_assert!(fuse(&zeros, &weights).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_search_never_worse_than_forecast_1(vals in prop::collection::vec(-2.0..2.0f64, 24)) {
        let arr = |i: usize| Array2::new(3, 2, vals[6 * i..6 * i + 6].to_vec()).unwrap();
        let dates = vec![day(2020, 1, 1), day(2020, 1, 2), day(2020, 1, 3)];
        let set = ForecastSet::new(arr(0), arr(1), arr(2), dates).unwrap();
        let scale = ColumnScale { mean: 70.0, std: 15.0 };
        let targets = arr(3).map(|v| scale.inverse(v));
        let found = search_weights(&set, &targets, scale, 0.5).unwrap();
        let fallback = metrics(targets.data(), set.forecast_1.map(|v| scale.inverse(v)).data()).unwrap().mse;
        prop_assert!(found.mse <= fallback);
        prop_assert_eq!(found.evaluations, 125);
    }

    #[test]
    fn every_epoch_is_a_permutation(n in 1usize..200, seed in any::<u64>()) {
        let mut schedule = EpochSchedule::new(n, seed, true);
        for _ in 0..3 {
            let mut order = schedule.next_epoch().to_vec();
            order.sort_unstable();
            prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn windows_stay_inside_their_split(window in 1usize..8, horizon in 1usize..4, n in 60usize..120) {
        let dates = daily(day(2021, 1, 1), n);
        let split = SplitSpec::new(dates[n / 2], dates[3 * n / 4]);
        let ds = single_column("y", dates.clone(), (0..n).map(|t| t as f64).collect());
        let w = make_windows(&ds, &WindowSpec { features: vec!["y".into()], target: "y".into(), window, horizon }, &split).unwrap();
        let ranges = split.partition(&dates).unwrap();
        for (samples, range) in [(&w.train, ranges.train), (&w.valid, ranges.valid), (&w.test, ranges.test)] {
            prop_assert_eq!(samples.len(), range.len() - window - horizon + 1);
            for s in samples.iter() {
                prop_assert!(s.anchor_index + 1 >= range.start + window);
                prop_assert!(s.anchor_index + horizon < range.end);
                prop_assert_eq!(s.targets[0], (s.anchor_index + 1) as f64);
            }
        }
    }
}

#[test]
fn scaler_ignores_validation_and_test_rows() {
    let n = 100;
    let dates = daily(day(2022, 1, 1), n);
    let split = SplitSpec::new(dates[59], dates[79]);
    let values: Vec<f64> = (0..n)
        .map(|t| (t as f64 * 0.37).sin() * 4.0 + 10.0)
        .collect();
    let base = single_column("p", dates.clone(), values.clone())
        .with_column(
            "x",
            ColumnRole::Exogenous,
            values.iter().map(|v| v * 2.0).collect(),
        )
        .unwrap();
    let mut mutated = values.clone();
    for v in &mut mutated[60..] {
        *v = *v * 1e3 - 7.0;
    }
    let other = single_column("p", dates, mutated.clone())
        .with_column(
            "x",
            ColumnRole::Exogenous,
            mutated.iter().map(|v| v * 2.0).collect(),
        )
        .unwrap();
    assert_eq!(
        fit_scaler(&base, &split).unwrap(),
        fit_scaler(&other, &split).unwrap()
    );
}
