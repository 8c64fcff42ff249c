use driftwatch::calibration::stream_rng;
use driftwatch::two_sample::{
    cramer_von_mises, cvm_null_moments, kolmogorov_smirnov, mann_whitney, mann_whitney_with,
    student_t, MwPValue,
};
use driftwatch::Sample;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn sample(v: &[f64]) -> Sample {
    Sample::try_from(v).unwrap()
}

fn mid_ranks(pooled: &[f64]) -> Vec<f64> {
    pooled
        .iter()
        .map(|&x| {
            let below = pooled.iter().filter(|&&y| y < x).count() as f64;
            let equal = pooled.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Two-sided permutation p-value of the rank sum by listing every subset.
fn brute_mw_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = mid_ranks(&pooled);
    let m = a.len();
    let mean = m as f64 * (pooled.len() as f64 + 1.0) / 2.0;
    let obs = (ranks[..m].iter().sum::<f64>() - mean).abs();
    let all = subsets(pooled.len(), m);
    let hits = all
        .iter()
        .filter(|s| (s.iter().map(|&i| ranks[i]).sum::<f64>() - mean).abs() >= obs - 1e-9)
        .count();
    hits as f64 / all.len() as f64
}

fn ecdf(xs: &[f64], x: f64) -> f64 {
    xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64
}

/// Anderson's T from its ECDF definition.
fn naive_cvm(a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len() as f64, b.len() as f64);
    let big_n = m + n;
    let sum: f64 = a
        .iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).powi(2))
        .sum();
    m * n / (big_n * big_n) * sum
}

fn naive_ks(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

fn t_density(x: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Two-sided tail by Simpson's rule on `[0, |t|]`.
fn simpson_two_sided(t: f64, df: f64) -> f64 {
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = t_density(0.0, df) + t_density(t.abs(), df);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_density(i as f64 * h, df);
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn exact_mw_matches_enumeration() {
    let cases: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![1., 2., 3.], vec![4., 5., 6.]),
        (vec![1., 5., 9., 2.], vec![3., 4., 8., 7., 6.]),
        (vec![1., 1., 2., 3.], vec![2., 2., 4., 4., 5.]),
        (vec![0., 0., 0.], vec![0., 1., 1.]),
        (vec![3.3, 1.2, 5.5, 0.4, 2.2, 9.1], vec![4.4, 6.6, 7.7, 8.8, 0.1, 1.0]),
        (vec![1., 2., 2., 2., 3., 3.], vec![2., 3., 3., 4., 4., 4.]),
    ];
    for (a, b) in &cases {
        let got = mann_whitney_with(&sample(a), &sample(b), MwPValue::Exact)
            .unwrap()
            .p_value
            .unwrap();
        let want = brute_mw_p(a, b);
        assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn exact_mw_random_small_samples() {
    let mut rng = stream_rng(11, 0);
    for _ in 0..60 {
        let m = rng.random_range(2..=6);
        let n = rng.random_range(2..=12 - m);
        // Coarse values so ties are common.
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.random_range(0..5) as f64).collect()
        };
        let (a, b) = (draw(m), draw(n));
        let got = mann_whitney(&sample(&a), &sample(&b)).unwrap().p_value.unwrap();
        assert!((got - brute_mw_p(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
    }
}

#[test]
fn mw_normal_approximation_tracks_exact_at_moderate_size() {
    let a: Vec<f64> = (0..10).map(|i| i as f64 * 1.7 % 7.3).collect();
    let b: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 2.3 % 6.1).collect();
    let exact = mann_whitney_with(&sample(&a), &sample(&b), MwPValue::Exact).unwrap();
    let approx = mann_whitney_with(&sample(&a), &sample(&b), MwPValue::Normal).unwrap();
    assert!((exact.p_value.unwrap() - approx.p_value.unwrap()).abs() < 0.02);
}

#[test]
fn cvm_moments_match_enumeration() {
    for (m, n) in [(2, 2), (2, 5), (3, 4), (4, 4), (5, 3), (3, 7)] {
        let big_n = m + n;
        let values: Vec<f64> = (0..big_n).map(|i| i as f64).collect();
        let stats: Vec<f64> = subsets(big_n, m)
            .iter()
            .map(|s| {
                let a: Vec<f64> = s.iter().map(|&i| values[i]).collect();
                let b: Vec<f64> = (0..big_n).filter(|i| !s.contains(i)).map(|i| values[i]).collect();
                naive_cvm(&a, &b)
            })
            .collect();
        let k = stats.len() as f64;
        let mean = stats.iter().sum::<f64>() / k;
        let var = stats.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / k;
        let (mu, sd) = cvm_null_moments(m, n);
        assert!((mean - mu).abs() < 1e-12, "mean at ({m},{n})");
        assert!((var - sd * sd).abs() < 1e-12, "var at ({m},{n})");
    }
}

#[test]
fn cvm_normalized_has_unit_moments_under_permutation() {
    let mut rng = stream_rng(3, 0);
    let mut pooled: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let shuffles = 400_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..shuffles {
        pooled.shuffle(&mut rng);
        let w = cramer_von_mises(&sample(&pooled[..15]), &sample(&pooled[15..]))
            .unwrap()
            .normalized;
        s1 += w;
        s2 += w * w;
    }
    let mean = s1 / shuffles as f64;
    let var = s2 / shuffles as f64 - mean * mean;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 1.0).abs() < 0.02, "var {var}");
}

#[test]
fn cvm_and_ks_match_ecdf_definitions() {
    let mut rng = stream_rng(4, 0);
    for _ in 0..200 {
        let m = rng.random_range(2..15);
        let n = rng.random_range(2..15);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let cvm = cramer_von_mises(&sample(&a), &sample(&b)).unwrap().statistic;
        assert!((cvm - naive_cvm(&a, &b)).abs() < 1e-12);
        let ks = kolmogorov_smirnov(&sample(&a), &sample(&b)).unwrap().statistic;
        assert!((ks - naive_ks(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn student_p_matches_numerical_integration() {
    let a = sample(&[5.1, 4.9, 6.2, 5.8, 6.0, 5.5]);
    let b = sample(&[4.1, 4.5, 3.9, 5.0, 4.4]);
    let r = student_t(&a, &b).unwrap();
    let want = simpson_two_sided(r.statistic, 9.0);
    assert!((r.p_value.unwrap() - want).abs() < 1e-9);

    for (t, df) in [(0.3, 3.0), (2.1, 12.0), (-4.0, 40.0)] {
        let got = driftwatch::two_sample::student_two_sided_p(t, df);
        assert!((got - simpson_two_sided(t, df)).abs() < 1e-9, "t={t} df={df}");
    }
}

#[test]
fn mw_normal_p_values_hold_level_under_null() {
    let reps = 20_000;
    let mut rejections = 0;
    for i in 0..reps {
        let mut rng = stream_rng(21, i);
        let a: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        if mann_whitney(&sample(&a), &sample(&b)).unwrap().p_value.unwrap() < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    // Continuity correction makes the test slightly conservative.
    assert!((0.040..=0.055).contains(&rate), "rate {rate}");
}

fn values(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50i32..50, len).prop_map(|v| v.into_iter().map(|x| x as f64 / 4.0).collect())
}

proptest! {
    #[test]
    fn rank_tests_ignore_order_within_samples(a in values(2..12), b in values(2..12), seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let (mut a2, mut b2) = (a.clone(), b.clone());
        a2.shuffle(&mut rng);
        b2.shuffle(&mut rng);
        for f in [mann_whitney, cramer_von_mises, kolmogorov_smirnov] {
            let x = f(&sample(&a), &sample(&b)).unwrap();
            let y = f(&sample(&a2), &sample(&b2)).unwrap();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn swapping_samples(a in values(2..12), b in values(2..12)) {
        let (sa, sb) = (sample(&a), sample(&b));
        let mw = mann_whitney(&sa, &sb).unwrap();
        let mw_rev = mann_whitney(&sb, &sa).unwrap();
        prop_assert!((mw.normalized + mw_rev.normalized).abs() < 1e-12);
        prop_assert!((mw.p_value.unwrap() - mw_rev.p_value.unwrap()).abs() < 1e-12);
        let c = cramer_von_mises(&sa, &sb).unwrap();
        let c_rev = cramer_von_mises(&sb, &sa).unwrap();
        prop_assert!((c.statistic - c_rev.statistic).abs() < 1e-12);
        let k = kolmogorov_smirnov(&sa, &sb).unwrap();
        let k_rev = kolmogorov_smirnov(&sb, &sa).unwrap();
        prop_assert_eq!(k.statistic, k_rev.statistic);
        let t = student_t(&sa, &sb).unwrap();
        let t_rev = student_t(&sb, &sa).unwrap();
        prop_assert_eq!(t.statistic, -t_rev.statistic);
    }

    #[test]
    fn rank_tests_invariant_under_increasing_maps(a in values(2..12), b in values(2..12)) {
        let warp = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| (x / 3.0).exp() * 7.0 - 2.0).collect() };
        for f in [mann_whitney, cramer_von_mises, kolmogorov_smirnov] {
            let x = f(&sample(&a), &sample(&b)).unwrap();
            let y = f(&sample(&warp(&a)), &sample(&warp(&b))).unwrap();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn p_values_are_probabilities(a in values(2..15), b in values(2..15)) {
        for f in [mann_whitney, student_t] {
            let p = f(&sample(&a), &sample(&b)).unwrap().p_value.unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
