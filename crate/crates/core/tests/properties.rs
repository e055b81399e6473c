use chrono::NaiveDate;
use icejam_core::features::{
    date_range, degree_days_freezing, fill_gaps_temperature, melt_test, window_precip_sum, winter_precip, DailyRecord,
    FeatureTable, MeltTest, SeasonFeatures, SeasonWindow, StationSeries,
};
use icejam_core::firth::{fit_firth, logistic, logit, p_values, DesignMatrix, FirthOptions};
use icejam_core::projection::{km_median, MedianWait};
use icejam_core::selection::{forward_stepwise, SelectionOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

/// Station covering 2000-11-01 through 2001-06-30 from parallel value lists.
fn station(temps: &[f64], precip: &[f64]) -> StationSeries {
    let recs = date_range(d(2000, 11, 1), d(2001, 6, 30))
        .enumerate()
        .map(|(i, date)| DailyRecord::new(date, Some(temps[i % temps.len()]), Some(precip[i % precip.len()])))
        .collect();
    StationSeries::new("s", recs).unwrap()
}

const SEASON_DAYS: usize = 242;

fn winter() -> SeasonWindow {
    SeasonWindow::winter(2001)
}

fn temps() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30f64..20.0, SEASON_DAYS)
}

fn precips() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0f64..15.0], SEASON_DAYS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn winter_precip_between_zero_and_window_sum(t in temps(), p in precips()) {
        let s = station(&t, &p);
        let w = winter_precip(&s, &winter()).unwrap();
        let total = window_precip_sum(&s, &winter()).unwrap();
        prop_assert!(w >= 0.0);
        prop_assert!(w <= total + 1e-9 * total.max(1.0));
    }

    #[test]
    fn winter_precip_equals_sum_without_resets(t in prop::collection::vec(-30f64..-0.5, SEASON_DAYS), p in precips()) {
        let s = station(&t, &p);
        let w = winter_precip(&s, &winter()).unwrap();
        let total = window_precip_sum(&s, &winter()).unwrap();
        prop_assert!((w - total).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn ddf_nonnegative_and_additive(t in temps(), cut in 1i64..178) {
        let s = station(&t, &[0.0]);
        let w = winter();
        let whole = degree_days_freezing(&s, &w).unwrap();
        prop_assert!(whole >= 0.0);
        let mid = w.start + chrono::Days::new(cut as u64);
        let a = SeasonWindow::new(2001, w.start, mid).unwrap();
        let b = SeasonWindow::new(2001, mid.succ_opt().unwrap(), w.end).unwrap();
        let parts = degree_days_freezing(&s, &a).unwrap() + degree_days_freezing(&s, &b).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1.0));
    }

    // Uniform warming never delays the day cumulative thaw reaches 150.
    #[test]
    fn warming_never_delays_melt(t in prop::collection::vec(-10f64..12.0, SEASON_DAYS), warm in 0f64..5.0) {
        let reach = MeltTest { lower: 0.0, ..MeltTest::default() };
        let base = station(&t, &[0.0]);
        let warmer: Vec<f64> = t.iter().map(|v| v + warm).collect();
        let hot = station(&warmer, &[0.0]);
        let a = reach.evaluate(&base, 2001).unwrap();
        let b = reach.evaluate(&hot, 2001).unwrap();
        match (a, b) {
            (Some(x), Some(y)) => prop_assert!(y <= x),
            (Some(_), None) => prop_assert!(false, "warming lost the crossing"),
            _ => {}
        }
        prop_assert!(melt_test(&base, 2001).is_ok());
    }

    #[test]
    fn temperature_fill_keeps_present_values_and_is_idempotent(
        t in temps(),
        offset in -5f64..5.0,
        gaps in prop::collection::vec(any::<bool>(), SEASON_DAYS),
    ) {
        let donor = station(&t, &[0.0]);
        let target_recs: Vec<DailyRecord> = donor
            .records()
            .iter()
            .enumerate()
            // keep the first of every month so each month has coincident days
            .map(|(i, r)| {
                let missing = gaps[i % gaps.len()] && r.date.format("%d").to_string() != "01";
                DailyRecord::new(r.date, if missing { None } else { r.tmean.map(|v| v + offset) }, r.precip)
            })
            .collect();
        let target = StationSeries::new("t", target_recs).unwrap();
        let once = fill_gaps_temperature(&target, &donor).unwrap();
        for (orig, filled) in target.records().iter().zip(once.series.records()) {
            if let Some(v) = orig.tmean {
                prop_assert_eq!(v.to_bits(), filled.tmean.unwrap().to_bits());
            }
        }
        let twice = fill_gaps_temperature(&once.series, &donor).unwrap();
        prop_assert!(twice.filled.is_empty());
        prop_assert_eq!(twice.series, once.series);
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Logistic data with both outcomes present.
fn dataset(seed: u64, n: usize, beta: &[f64]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let cols: Vec<Vec<f64>> = (1..beta.len()).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
        let y: Vec<bool> = (0..n)
            .map(|i| {
                let eta = beta[0] + (1..beta.len()).map(|j| beta[j] * cols[j - 1][i]).sum::<f64>();
                rng.random::<f64>() < logistic(eta)
            })
            .collect();
        if y.iter().any(|&v| v) && y.iter().any(|&v| !v) {
            return (cols, y);
        }
    }
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intercept_only_closed_form(y in prop::collection::vec(any::<bool>(), 3..80)) {
        let dm = DesignMatrix::intercept_only(&y).unwrap();
        let m = fit_firth(&dm).unwrap();
        let s = y.iter().filter(|&&v| v).count() as f64;
        let expected = logit((s + 0.5) / (y.len() as f64 + 1.0));
        prop_assert!((m.beta[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn converged_fit_is_well_formed(seed in any::<u64>(), n in 20usize..70) {
        let (cols, y) = dataset(seed, n, &[-1.5, 1.0, -0.7]);
        let dm = DesignMatrix::from_columns(&names(2), &cols, &y).unwrap();
        let m = fit_firth(&dm).unwrap();
        prop_assert!(m.converged);
        prop_assert!(m.max_score < 1e-8);
        prop_assert!(m.beta.iter().all(|b| b.is_finite()));
        prop_assert!(m.aicc.is_some_and(f64::is_finite));
        let c = &m.cov;
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(c[(i, j)].to_bits(), c[(j, i)].to_bits());
            }
        }
        prop_assert!(c.clone().cholesky().is_some());
        for t in p_values(&m, &dm, &FirthOptions::default()).unwrap() {
            prop_assert!((0.0..=1.0).contains(&t.wald_p));
            if let Some(p) = t.lr_p {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn shift_and_scale_invariance(seed in any::<u64>(), c in -5f64..5.0, s in 0.2f64..5.0) {
        let (cols, y) = dataset(seed, 40, &[-1.0, 1.2, 0.5]);
        let base = fit_firth(&DesignMatrix::from_columns(&names(2), &cols, &y).unwrap()).unwrap();

        let mut shifted = cols.clone();
        shifted[0].iter_mut().for_each(|v| *v += c);
        let ms = fit_firth(&DesignMatrix::from_columns(&names(2), &shifted, &y).unwrap()).unwrap();
        prop_assert!((ms.beta[0] - (base.beta[0] - c * base.beta[1])).abs() < 1e-6);
        prop_assert!((ms.beta[1] - base.beta[1]).abs() < 1e-6);
        prop_assert!((ms.beta[2] - base.beta[2]).abs() < 1e-6);

        let mut scaled = cols.clone();
        scaled[1].iter_mut().for_each(|v| *v *= s);
        let mc = fit_firth(&DesignMatrix::from_columns(&names(2), &scaled, &y).unwrap()).unwrap();
        prop_assert!((mc.beta[2] - base.beta[2] / s).abs() < 1e-6);
        prop_assert!((mc.beta[0] - base.beta[0]).abs() < 1e-6);

        for i in 0..y.len() {
            let p0 = base.predict_prob(&[cols[0][i], cols[1][i]]).unwrap();
            let p1 = ms.predict_prob(&[shifted[0][i], shifted[1][i]]).unwrap();
            let p2 = mc.predict_prob(&[scaled[0][i], scaled[1][i]]).unwrap();
            prop_assert!((p0 - p1).abs() < 1e-10);
            prop_assert!((p0 - p2).abs() < 1e-10);
        }
    }

    #[test]
    fn separated_data_gives_finite_estimates(n in 6usize..40, cut in 0.2f64..0.8) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<bool> = x.iter().map(|&v| v > cut).collect();
        prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
        let m = fit_firth(&DesignMatrix::from_columns(&["x"], &[x], &y).unwrap()).unwrap();
        prop_assert!(m.converged);
        prop_assert!(m.beta.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn logistic_symmetric_and_increasing(a in -40f64..40.0, b in -15f64..15.0, h in 1e-3f64..10.0) {
        prop_assert!((logistic(-a) - (1.0 - logistic(a))).abs() <= 1e-15);
        prop_assert!(logistic(a + h) >= logistic(a));
        // strict wherever the slope is resolvable in double precision
        prop_assert!(logistic(b + h) > logistic(b));
    }

    #[test]
    fn geometric_median_from_km(p in 0.02f64..0.9, seed in any::<u64>()) {
        // Exact geometric quantiles as waits: the KM median is the analytic one.
        let horizon = 10_000u32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waits: Vec<u32> = (0..20_001)
            .map(|_| {
                let u: f64 = rng.random::<f64>().max(1e-300);
                (u.ln() / (1.0 - p).ln()).ceil().max(1.0) as u32
            })
            .collect();
        let mut sorted = waits.clone();
        sorted.sort_unstable();
        let km = km_median(&waits, &vec![false; waits.len()], horizon);
        prop_assert_eq!(km, MedianWait::Years(sorted[10_000]));
    }
}

#[test]
fn analytic_geometric_median_on_exact_quantiles() {
    for p in [0.05f64, 0.0909, 0.2, 0.5] {
        let n = 9999usize;
        let waits: Vec<u32> = (1..=n)
            .map(|i| {
                let u = i as f64 / (n + 1) as f64;
                ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0) as u32
            })
            .collect();
        let analytic = ((0.5f64).ln() / (1.0 - p).ln()).ceil() as u32;
        assert_eq!(km_median(&waits, &vec![false; n], 10_000), MedianWait::Years(analytic), "p={p}");
    }
}

#[test]
fn null_lr_p_values_are_uniform() {
    let reps = 400;
    let mut ps: Vec<f64> = (0..reps)
        .map(|r| {
            let (cols, y) = dataset(1000 + r, 60, &[-0.5, 0.0]);
            let dm = DesignMatrix::from_columns(&["x"], &cols, &y).unwrap();
            let m = fit_firth(&dm).unwrap();
            p_values(&m, &dm, &FirthOptions::default()).unwrap()[1].lr_p.unwrap()
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(ks < 1.63 / n.sqrt(), "KS statistic {ks}");
}

fn selection_table(seed: u64, duplicate: bool) -> (FeatureTable, Vec<String>) {
    let (cols, y) = dataset(seed, 55, &[-2.0, 1.5, -1.0, 0.0]);
    let mut extra = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    if duplicate {
        extra.push("a_copy".to_string());
    }
    let rows = (0..y.len())
        .map(|i| {
            let mut r = SeasonFeatures::new(1960 + i as i32, y[i]);
            r.set("a", Some(cols[0][i]));
            r.set("b", Some(cols[1][i]));
            r.set("c", Some(cols[2][i]));
            if duplicate {
                r.set("a_copy", Some(cols[0][i]));
            }
            r
        })
        .collect();
    (FeatureTable::new(rows, extra.clone()).unwrap(), extra)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn selection_path_invariants(seed in any::<u64>()) {
        let (table, cands) = selection_table(seed, false);
        let opts = SelectionOptions::default();
        let path = forward_stepwise(&table, &cands, &opts).unwrap();
        let accepted: Vec<_> = path.steps.iter().filter(|s| s.accepted).collect();
        for w in accepted.windows(2) {
            prop_assert!(w[1].aicc <= w[0].aicc);
            prop_assert_eq!(w[1].covariates.len(), w[0].covariates.len() + 1);
            prop_assert_eq!(&w[1].covariates[..w[0].covariates.len()], &w[0].covariates[..]);
        }
        for c in &path.candidate_table {
            prop_assert_eq!(c.covariates.len(), c.step);
            let incumbent = &path.steps[c.step - 1].covariates;
            prop_assert_eq!(&c.covariates[..c.step - 1], &incumbent[..]);
            if let Ok(m) = &c.outcome {
                prop_assert_eq!(m.model.k(), c.step + 1);
                prop_assert!(m.aicc.is_finite());
            }
        }
        let again = forward_stepwise(&table, &cands, &opts).unwrap();
        prop_assert_eq!(again, path.clone());

        let (dup_table, dup_cands) = selection_table(seed, true);
        let dup = forward_stepwise(&dup_table, &dup_cands, &opts).unwrap();
        prop_assert_eq!(dup.chosen_covariates(), path.chosen_covariates());
    }
}

#[test]
fn duplicate_column_is_rejected_as_collinear() {
    let (cols, y) = dataset(3, 40, &[-1.0, 1.0]);
    let x = DMatrix::from_fn(40, 3, |i, j| if j == 0 { 1.0 } else { cols[0][i] });
    let dm = DesignMatrix::new(vec!["constant".into(), "a".into(), "a_copy".into()], x, y).unwrap();
    assert!(fit_firth(&dm).is_err());
}
