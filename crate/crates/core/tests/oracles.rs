//! Independent oracles for generator moments, the t-test p-value and the
//! prevalence ratio, plus property tests of their invariants.

use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

use purple::dataset::{FeatureMatrix, GroupId, LabeledDataset};
use purple::model::sigmoid;
use purple::stats::{paired_t_test, two_sided_p};
use purple::synth::{generate_gauss, generate_violation, GaussSynthConfig};
use purple::{relative_prevalence, relative_prevalence_vs_complement, PurpleModel};

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(lo) + f(hi) + inner) * h / 3.0
}

fn t_density(u: f64, v: f64) -> f64 {
    let ln_c = ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0) - 0.5 * (v * std::f64::consts::PI).ln();
    (ln_c - (v + 1.0) / 2.0 * (1.0 + u * u / v).ln()).exp()
}

#[test]
fn t_p_value_matches_integrated_density() {
    for df in [2usize, 3, 5, 8, 13, 21, 34, 60] {
        let v = df as f64;
        for k in 0..=40 {
            let t = -10.0 + 0.5 * k as f64;
            let central = simpson(|u| t_density(u, v), 0.0, t.abs(), 20_000);
            let oracle = 1.0 - 2.0 * central;
            let got = two_sided_p(t, df);
            assert!((got - oracle).abs() < 1e-6, "df {df} t {t}: {got} vs {oracle}");
        }
    }
}

/// `E[σ(Z)]` for `Z ~ N(mu, sd²)`.
fn mean_sigmoid_of_normal(mu: f64, sd: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    simpson(|z| sigmoid(mu + sd * z) * phi(z), -12.0, 12.0, 4_000)
}

#[test]
fn gauss_generator_moments() {
    let cfg = GaussSynthConfig::default();
    let data = generate_gauss(&cfg, 11).unwrap();
    let (n_a, d) = (cfg.n_a, cfg.n_dims);
    let x = data.features();
    for (g, range, mean) in [(0, 0..n_a, -1.0), (1, n_a..data.len(), 1.0)] {
        let rows: Vec<Vec<f64>> = range.clone().map(|i| x.row(i).to_dense(d)).collect();
        let n = rows.len() as f64;
        for j in 0..d {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            // standard errors: 4/√n for the mean, about 16·√(2/n) for the variance
            assert!((m - mean).abs() < 5.0 * 4.0 / n.sqrt(), "group {g} dim {j} mean {m}");
            assert!((var - 16.0).abs() < 5.0 * 16.0 * (2.0 / n).sqrt(), "group {g} dim {j} var {var}");
        }
    }

    // h·x/‖h‖ with h = 1 is N(±√5, 16) per group
    let mu = 5f64.sqrt();
    let alpha_a = mean_sigmoid_of_normal(-mu, 4.0);
    let alpha_b = mean_sigmoid_of_normal(mu, 4.0);
    let p = data.latent_p().unwrap();
    let mean_p = |r: std::ops::Range<usize>| p[r.clone()].iter().sum::<f64>() / r.len() as f64;
    assert!((mean_p(0..n_a) - alpha_a).abs() < 0.01);
    assert!((mean_p(n_a..data.len()) - alpha_b).abs() < 0.01);
    let rp = mean_p(0..n_a) / mean_p(n_a..data.len());
    assert!((rp / (alpha_a / alpha_b) - 1.0).abs() < 0.03, "rp {rp}");

    // s only where y, at the group's labeling frequency
    let y = data.y().unwrap();
    let s = data.s();
    assert!(s.iter().zip(y).all(|(&s, &y)| !s || y));
    for (g, range, c) in [(0, 0..n_a, 0.5), (1, n_a..data.len(), 0.25)] {
        let pos = range.clone().filter(|&i| y[i]).count() as f64;
        let lab = range.filter(|&i| s[i]).count() as f64;
        let se = (c * (1.0 - c) / pos).sqrt();
        assert!((lab / pos - c).abs() < 5.0 * se, "group {g}: {}", lab / pos);
    }
}

#[test]
fn violation_shifts_latent_probability_by_half_delta() {
    let cfg = GaussSynthConfig {
        n_a: 2_000,
        n_b: 2_000,
        ..Default::default()
    };
    let base = generate_violation(&cfg, 0.0, 5).unwrap();
    let shifted = generate_violation(&cfg, 0.3, 5).unwrap();
    let (p0, p1) = (base.latent_p().unwrap(), shifted.latent_p().unwrap());
    for i in 0..base.len() {
        let off = if i < cfg.n_a { 0.15 } else { -0.15 };
        assert!((p1[i] - (p0[i] + off).clamp(0.0, 1.0)).abs() < 1e-12);
    }
}

fn one_feature_data(x: &[f64], g: &[u32]) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    LabeledDataset::new(
        FeatureMatrix::from_dense_rows(1, &rows).unwrap(),
        vec!["a".into(), "b".into(), "c".into()],
        g.iter().map(|&k| GroupId(k)).collect(),
        vec![false; x.len()],
        None,
        None,
    )
    .unwrap()
}

fn model(w: f64, b: f64) -> PurpleModel {
    let mut m = PurpleModel::zeros(1, vec!["a".into(), "b".into(), "c".into()]);
    m.w[0] = w;
    m.b = b;
    m
}

proptest! {
    #[test]
    fn relative_prevalence_matches_direct_ratio(
        rows in prop::collection::vec((-5.0f64..5.0, 0u32..3), 6..60),
        w in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let g: Vec<u32> = rows.iter().map(|r| r.1).collect();
        prop_assume!((0..3).all(|k| g.contains(&k)));
        let data = one_feature_data(&x, &g);
        let m = model(w, b);
        let mean = |pick: &dyn Fn(u32) -> bool| {
            let v: Vec<f64> = x.iter().zip(&g).filter(|(_, &k)| pick(k)).map(|(&v, _)| sigmoid(w * v + b)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let ab = relative_prevalence(&m, &data, "a", "b").unwrap();
        let ba = relative_prevalence(&m, &data, "b", "a").unwrap();
        prop_assert!((ab - mean(&|k| k == 0) / mean(&|k| k == 1)).abs() < 1e-12 * ab.max(1.0));
        prop_assert!((ab * ba - 1.0).abs() < 1e-12);
        let comp = relative_prevalence_vs_complement(&m, &data, "c").unwrap();
        prop_assert!((comp - mean(&|k| k == 2) / mean(&|k| k != 2)).abs() < 1e-12 * comp.max(1.0));
    }

    #[test]
    fn relative_prevalence_ignores_labeling_frequencies(
        x in prop::collection::vec(-5.0f64..5.0, 6..30),
        theta in prop::collection::vec(-4.0f64..4.0, 3),
    ) {
        let g: Vec<u32> = (0..x.len()).map(|i| (i % 3) as u32).collect();
        let data = one_feature_data(&x, &g);
        let m = model(0.7, -0.2);
        let mut m2 = m.clone();
        m2.theta = theta;
        prop_assert_eq!(
            relative_prevalence(&m, &data, "a", "b").unwrap(),
            relative_prevalence(&m2, &data, "a", "b").unwrap()
        );
    }

    #[test]
    fn t_test_is_shift_invariant_and_p_is_a_probability(
        d in prop::collection::vec(-3.0f64..3.0, 3..20),
        shift in -5.0f64..5.0,
    ) {
        let zeros = vec![0.0; d.len()];
        let Ok(r) = paired_t_test(&d, &zeros) else { return Ok(()) };
        let moved: Vec<f64> = d.iter().map(|v| v + shift).collect();
        let base: Vec<f64> = zeros.iter().map(|v| v + shift).collect();
        let r2 = paired_t_test(&moved, &base).unwrap();
        prop_assert!((r.t - r2.t).abs() < 1e-6 * r.t.abs().max(1.0));
        prop_assert!((0.0..=1.0).contains(&r.p));
        prop_assert_eq!(r.df, d.len() - 1);
    }

    #[test]
    fn p_value_decreases_with_abs_t(t in 0.0f64..8.0, dt in 0.01f64..2.0, df in 1usize..50) {
        prop_assert!(two_sided_p(t + dt, df) <= two_sided_p(t, df));
        prop_assert_eq!(two_sided_p(t, df), two_sided_p(-t, df));
    }
}
