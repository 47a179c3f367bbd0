//! Property tests for the distribution, fitting, and mixture invariants.

use edugamma::fitter::{build_targets, AgeGroup, AttainmentRecord, Sex};
use edugamma::gg::GgParams;
use edugamma::mixture::Region;
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = GgParams> {
    (
        (0.3f64..5.0).prop_map(|a| a),
        (0.5f64..20.0).prop_map(|b| b),
        (0.3f64..5.0).prop_map(|p| p),
    )
        .prop_map(|(a, beta, p)| GgParams::new(a, beta, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_round_trip(params in params_strategy(), u in 0.001f64..0.999) {
        let x = params.quantile(u).unwrap();
        let back = params.cdf(x).unwrap();
        prop_assert!((back - u).abs() <= 1e-8, "cdf(quantile({u})) = {back}");
    }

    #[test]
    fn cdf_is_monotone(params in params_strategy(), x1 in 0.0f64..40.0, x2 in 0.0f64..40.0) {
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(params.cdf(lo).unwrap() <= params.cdf(hi).unwrap() + 1e-15);
    }

    #[test]
    fn survival_complements_cdf(params in params_strategy(), x in 0.0f64..40.0) {
        let total = params.cdf(x).unwrap() + params.survival(x).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn lorenz_below_diagonal_and_monotone(params in params_strategy(), u in 0.0f64..=1.0) {
        let l = params.lorenz(u).unwrap();
        prop_assert!(l <= u + 1e-10, "L({u}) = {l}");
        prop_assert!((0.0..=1.0).contains(&l));
        let l2 = params.lorenz((u + 0.05).min(1.0)).unwrap();
        prop_assert!(l2 >= l - 1e-12);
    }

    #[test]
    fn inequality_measures_are_scale_invariant(params in params_strategy(), c in 0.1f64..10.0) {
        let scaled = GgParams::new(params.a(), params.beta() * c, params.p()).unwrap();
        // β never enters the Γ/ψ arguments or the gamma-domain Lorenz
        // curve, so these agree exactly.
        prop_assert_eq!(params.mld(), scaled.mld());
        prop_assert_eq!(params.theil(), scaled.theil());
        prop_assert_eq!(params.ge2(), scaled.ge2());
        prop_assert_eq!(params.gini(), scaled.gini());
    }

    #[test]
    fn mean_scales_linearly(params in params_strategy(), c in 0.1f64..10.0) {
        let scaled = GgParams::new(params.a(), params.beta() * c, params.p()).unwrap();
        let expected = params.mean() * c;
        prop_assert!((scaled.mean() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn targets_are_coherent(
        ns in 0.0f64..1.0,
        p in 0.0f64..1.0,
        s in 0.0f64..1.0,
        ti in 0.0f64..1.0,
        tc in 0.0f64..1.0,
        dur_p in 3.0f64..10.0,
        dur_s in 3.0f64..10.0,
    ) {
        let total = ns + p + s + ti + tc;
        prop_assume!(total > 1e-6);
        let record = AttainmentRecord {
            country: "XX".into(),
            year: 1990,
            sex: Sex::Total,
            age_group: AgeGroup::Over15,
            shares: [ns / total, p / total, s / total, ti / total, tc / total],
            dur_primary: dur_p,
            dur_secondary: dur_s,
        };
        let targets = build_targets(&record).unwrap();
        for w in targets.thresholds.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        let mut prev = 0.0;
        for &c in &targets.cdf_targets {
            prop_assert!(c >= prev - 1e-12);
            prev = c;
        }
        prop_assert!((targets.cdf_targets[3] + targets.surv_target - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn mixture_weight_scaling_is_irrelevant(
        params in params_strategy(),
        params2 in params_strategy(),
        w1 in 0.1f64..10.0,
        w2 in 0.1f64..10.0,
        c in 0.1f64..100.0,
        x in 0.0f64..40.0,
    ) {
        let base = Region::new(vec![
            ("a".into(), params, w1),
            ("b".into(), params2, w2),
        ]).unwrap();
        let scaled = Region::new(vec![
            ("a".into(), params, w1 * c),
            ("b".into(), params2, w2 * c),
        ]).unwrap();
        // Renormalization (w·c)/(Σw·c) rounds differently from w/Σw, so
        // "unchanged" means machine precision, not bit equality.
        prop_assert!((base.cdf(x).unwrap() - scaled.cdf(x).unwrap()).abs() <= 1e-13);
        prop_assert!((base.mean() - scaled.mean()).abs() <= 1e-12 * base.mean());
        let d1 = base.ge_decompose(0.0).unwrap();
        let d2 = scaled.ge_decompose(0.0).unwrap();
        prop_assert!((d1.total - d2.total).abs() <= 1e-12 * d1.total.abs().max(1.0));
    }

    #[test]
    fn mixture_lorenz_below_diagonal(
        params in params_strategy(),
        params2 in params_strategy(),
        w in 0.1f64..0.9,
        u in 0.01f64..0.99,
    ) {
        let region = Region::new(vec![
            ("a".into(), params, w),
            ("b".into(), params2, 1.0 - w),
        ]).unwrap();
        let l = region.lorenz(u).unwrap();
        prop_assert!(l <= u + 1e-9, "mixture L({u}) = {l}");
    }

    #[test]
    fn decomposition_sums_exactly(
        params in params_strategy(),
        params2 in params_strategy(),
        w in 0.05f64..0.95,
        theta in -0.5f64..3.0,
    ) {
        prop_assume!(theta.abs() > 1e-3 && (theta - 1.0).abs() > 1e-3);
        // Keep θ within the existence region for both members
        prop_assume!(params.p() + theta / params.a() > 0.05);
        prop_assume!(params2.p() + theta / params2.a() > 0.05);
        let region = Region::new(vec![
            ("a".into(), params, w),
            ("b".into(), params2, 1.0 - w),
        ]).unwrap();
        let d = region.ge_decompose(theta).unwrap();
        prop_assert_eq!(d.total, d.between + d.within);
        prop_assert!(d.within >= -1e-12);
    }
}

#[test]
fn lorenz_is_convex_on_dense_grid() {
    // Discrete second differences of L on a 1001-point grid stay above
    // -1e-10 for a spread of shapes.
    for (a, beta, p) in [(0.5, 1.0, 1.0), (1.0, 5.0, 1.0), (2.0, 8.0, 1.5), (5.0, 10.0, 0.5)] {
        let params = GgParams::new(a, beta, p).unwrap();
        let n = 1001;
        let values: Vec<f64> =
            (0..n).map(|i| params.lorenz(i as f64 / (n - 1) as f64).unwrap()).collect();
        for w in values.windows(3) {
            let second_diff = w[2] - 2.0 * w[1] + w[0];
            assert!(
                second_diff >= -1e-10,
                "convexity violated for ({a},{beta},{p}): {second_diff}"
            );
        }
    }
}

#[test]
fn pdf_normalizes_on_parameter_grid() {
    // Quadrature of the density over [0, q(0.99999)] lands in [0.99995, 1].
    // tanh-sinh handles the x^{ap-1} endpoint singularity when ap < 1.
    for a in [0.5, 1.0, 2.0, 5.0] {
        for p in [0.5, 1.0, 3.0, 10.0] {
            for beta in [1.0, 8.0] {
                let params = GgParams::new(a, beta, p).unwrap();
                let hi = params.quantile(0.99999).unwrap();
                let mass =
                    edugamma::verify::tanh_sinh(|x| params.pdf(x).unwrap_or(0.0), 0.0, hi, 1e-12);
                assert!(
                    (0.99995..=1.0 + 1e-9).contains(&mass),
                    "mass {mass} for ({a},{beta},{p})"
                );
            }
        }
    }
}

#[test]
fn mixture_pdf_normalizes_and_mean_matches_quadrature() {
    let region = Region::new(vec![
        ("a".into(), GgParams::new(1.5, 4.0, 0.8).unwrap(), 0.25),
        ("b".into(), GgParams::new(0.9, 7.0, 1.3).unwrap(), 0.45),
        ("c".into(), GgParams::new(2.2, 10.0, 2.0).unwrap(), 0.30),
    ])
    .unwrap();
    let hi = region.quantile(1.0 - 1e-9).unwrap() * 3.0;
    let mass = edugamma::verify::tanh_sinh(|x| region.pdf(x).unwrap_or(0.0), 0.0, hi, 1e-12);
    assert!((mass - 1.0).abs() <= 1e-8, "mixture pdf mass {mass}");
    let mean_quad =
        edugamma::verify::tanh_sinh(|x| x * region.pdf(x).unwrap_or(0.0), 0.0, hi, 1e-12);
    let rel = (region.mean() - mean_quad).abs() / region.mean();
    assert!(rel <= 1e-6, "mixture mean {} vs quadrature {mean_quad}", region.mean());
}

#[test]
fn mean_matches_quadrature_on_parameter_grid() {
    for a in [0.5, 1.0, 2.0, 5.0] {
        for p in [0.5, 1.0, 3.0, 10.0] {
            for beta in [1.0, 8.0] {
                let params = GgParams::new(a, beta, p).unwrap();
                let quad_mean = edugamma::verify::quad_functional(
                    &params,
                    edugamma::verify::QuadKind::Mean,
                );
                let rel = (params.mean() - quad_mean).abs() / params.mean();
                assert!(rel <= 1e-6, "mean mismatch for ({a},{beta},{p}): rel {rel}");
            }
        }
    }
}
