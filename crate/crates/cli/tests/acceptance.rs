//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). Tolerances are pinned here;
//! none is deferred to later calibration.
//!
//! Criterion 7 depends on the non-redistributable source data and runs only
//! when EDUGAMMA_BL_DATA points at a directory the user prepared; otherwise
//! it reports itself as skipped and passes vacuously.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use edugamma::fitter::{build_targets, grid_fit, FitConfig, FitTargets};
use edugamma::gg::GgParams;
use edugamma::mixture::Region;
use edugamma::verify::{
    self, mc_functional, mc_lorenz, quad_functional, ref_digamma, ref_ln_gamma, ref_reg_lower,
    sample_gg, sample_mixture, Functional, QuadKind,
};

/// The 32-point parameter grid used throughout: a × p × β.
fn parameter_grid() -> Vec<GgParams> {
    let mut grid = Vec::new();
    for a in [0.5, 1.0, 2.0, 5.0] {
        for p in [0.5, 1.0, 3.0, 10.0] {
            for beta in [1.0, 8.0] {
                grid.push(GgParams::new(a, beta, p).unwrap());
            }
        }
    }
    grid
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("acceptance {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance {criterion} failed: {detail}");
}

#[test]
fn criterion_1_special_function_accuracy() {
    let start = Instant::now();

    // Log-spaced grid over [1e-3, 1e4] plus points near the zeros of ln Γ.
    let mut xs: Vec<f64> = (0..=120).map(|i| 1e-3 * 1e7f64.powf(i as f64 / 120.0)).collect();
    xs.extend([0.5, 0.9, 0.999, 1.0, 1.25, 1.461632, 1.999, 2.0, 2.001, 3.5]);

    let mut max_lg: f64 = 0.0;
    let mut max_dg: f64 = 0.0;
    for &x in &xs {
        let reference = ref_ln_gamma(x);
        let got = edugamma::specfun::ln_gamma(x).unwrap();
        // Relative tolerance with an absolute floor of 1: ln Γ crosses zero
        // at x = 1 and 2, where a pure ratio is undefined.
        max_lg = max_lg.max((got - reference).abs() / reference.abs().max(1.0));

        let reference = ref_digamma(x);
        let got = edugamma::specfun::digamma(x).unwrap();
        max_dg = max_dg.max((got - reference).abs());
    }

    let mut max_p: f64 = 0.0;
    let mut max_inv: f64 = 0.0;
    for &s in &[0.3f64, 1.0, 2.0, 7.0, 50.0] {
        for &scale in &[0.01, 0.1, 0.3, 0.6, 1.0, 1.4, 2.0, 3.0, 5.0] {
            let x = s * scale;
            let reference = ref_reg_lower(s, x);
            let got = edugamma::specfun::reg_lower_inc_gamma(s, x).unwrap();
            max_p = max_p.max((got - reference).abs());
        }
        // Inverse: quantiles from 0.001 to 0.999, checked through the
        // reference forward map.
        for &u in &[0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999] {
            let x = edugamma::specfun::inv_reg_lower_inc_gamma(s, u).unwrap();
            max_inv = max_inv.max((ref_reg_lower(s, x) - u).abs());
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        max_lg <= 1e-13 && max_dg <= 1e-12 && max_p <= 1e-12 && max_inv <= 1e-12 && elapsed < 5.0;
    report(
        "1 special-function accuracy",
        pass,
        &format!(
            "ln_gamma rel {max_lg:.2e} (<=1e-13), digamma abs {max_dg:.2e} (<=1e-12), \
             P abs {max_p:.2e} (<=1e-12), P^-1 abs {max_inv:.2e} (<=1e-12), {elapsed:.2}s (<5s)"
        ),
    );
}

#[test]
fn criterion_2_closed_forms_vs_oracles() {
    let start = Instant::now();
    const N_DRAWS: usize = 1_000_000;

    let failures: Vec<String> = parameter_grid()
        .par_iter()
        .enumerate()
        .flat_map(|(i, params)| {
            let mut local = Vec::new();
            let rel = |closed: f64, quad: f64| (closed - quad).abs() / quad.abs().max(1e-12);

            // Quadrature of the defining integrals, 1e-6 relative.
            let checks = [
                ("mean", params.mean(), quad_functional(params, QuadKind::Mean)),
                ("mld", params.mld(), quad_functional(params, QuadKind::Mld)),
                ("theil", params.theil(), quad_functional(params, QuadKind::Theil)),
                ("ge2", params.ge2(), quad_functional(params, QuadKind::Ge2)),
            ];
            for (name, closed, quad) in checks {
                if rel(closed, quad) > 1e-6 {
                    local.push(format!("{name} quad mismatch at grid[{i}]: {closed} vs {quad}"));
                }
            }
            // Lorenz ordinates vs the partial-mean integral at the quantile.
            let mu_q = quad_functional(params, QuadKind::Mean);
            for u in [0.25, 0.5, 0.75] {
                let x_star = params.quantile(u).unwrap();
                let partial = verify::tanh_sinh(
                    |x| x * params.pdf(x).unwrap_or(0.0),
                    0.0,
                    x_star,
                    1e-11,
                ) / mu_q;
                let closed = params.lorenz(u).unwrap();
                if (closed - partial).abs() / partial.abs().max(1e-9) > 1e-6 {
                    local.push(format!(
                        "lorenz({u}) quad mismatch at grid[{i}]: {closed} vs {partial}"
                    ));
                }
            }

            // Monte Carlo with 1e6 draws, 3 standard errors.
            let sample = sample_gg(params, N_DRAWS, 0x5eed_0000 + i as u64);
            let mc_checks = [
                ("mean", params.mean(), mc_functional(&sample, Functional::Mean)),
                ("mld", params.mld(), mc_functional(&sample, Functional::Mld)),
                ("theil", params.theil(), mc_functional(&sample, Functional::Theil)),
                ("ge2", params.ge2(), mc_functional(&sample, Functional::Ge2)),
                ("gini", params.gini(), mc_functional(&sample, Functional::Gini)),
            ];
            for (name, closed, est) in mc_checks {
                if (closed - est.value).abs() > 3.0 * est.std_error {
                    local.push(format!(
                        "{name} MC mismatch at grid[{i}]: {closed} vs {} ± {}",
                        est.value, est.std_error
                    ));
                }
            }
            let est = mc_lorenz(&sample, 0.5);
            let closed = params.lorenz(0.5).unwrap();
            if (closed - est.value).abs() > 3.0 * est.std_error {
                local.push(format!("lorenz(0.5) MC mismatch at grid[{i}]"));
            }
            local
        })
        .collect();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && elapsed < 120.0;
    report(
        "2 closed forms vs quadrature and Monte Carlo",
        pass,
        &format!(
            "32-point grid, quad rel <=1e-6, MC within 3 SE, {elapsed:.1}s (<120s){}{}",
            if failures.is_empty() { "" } else { "; " },
            failures.join("; ")
        ),
    );
}

#[test]
fn criterion_3_special_case_collapse() {
    let mut max_err: f64 = 0.0;

    // a = 1: gamma(p, β). CDF via the regularized incomplete gamma of x/β,
    // mean pβ.
    for (p, beta) in [(0.5, 2.0), (3.0, 1.5), (10.0, 0.8)] {
        let gg = GgParams::new(1.0, beta, p).unwrap();
        for x in [0.1, 0.5, 2.0, 8.0, 30.0] {
            let gamma_cdf = edugamma::specfun::reg_lower_inc_gamma(p, x / beta).unwrap();
            max_err = max_err.max((gg.cdf(x).unwrap() - gamma_cdf).abs());
        }
        max_err = max_err.max((gg.mean() - p * beta).abs() / (p * beta));
    }

    // p = 1: Weibull(a, β). F(x) = 1 − exp(−(x/β)^a), mean βΓ(1 + 1/a).
    for (a, beta) in [(0.7, 3.0), (2.0, 1.0), (4.5, 6.0)] {
        let gg = GgParams::new(a, beta, 1.0).unwrap();
        for x in [0.1, 0.5, 2.0, 8.0] {
            let weibull_cdf = 1.0 - (-(x / beta).powf(a)).exp();
            max_err = max_err.max((gg.cdf(x).unwrap() - weibull_cdf).abs());
        }
        let weibull_mean = beta * ref_ln_gamma(1.0 + 1.0 / a).exp();
        max_err = max_err.max((gg.mean() - weibull_mean).abs() / weibull_mean);
    }

    // a = p = 1: exponential(β).
    for beta in [0.5, 5.0] {
        let gg = GgParams::new(1.0, beta, 1.0).unwrap();
        for x in [0.1, 1.0, 4.0, 20.0] {
            let expo_cdf = 1.0 - (-x / beta).exp();
            max_err = max_err.max((gg.cdf(x).unwrap() - expo_cdf).abs());
        }
        max_err = max_err.max((gg.mean() - beta).abs() / beta);
    }

    report(
        "3 special-case collapse",
        max_err <= 1e-10,
        &format!("max deviation {max_err:.2e} (<=1e-10)"),
    );
}

#[test]
fn criterion_4_fit_recovery() {
    let start = Instant::now();
    let thresholds = [1.0, 6.0, 12.0, 16.0];
    let config = FitConfig::default();

    // 200 synthetic target sets from the stated parameter box.
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
    let mut cases = Vec::new();
    for _ in 0..200 {
        let a = rng.random_range(0.5f64.ln()..5.0f64.ln()).exp();
        let p = rng.random_range(0.5f64.ln()..5.0f64.ln()).exp();
        let beta = rng.random_range(2.0..12.0);
        let truth = GgParams::new(a, beta, p).unwrap();
        let cdf = thresholds.map(|t| truth.cdf(t).unwrap());
        let surv = truth.survival(thresholds[3]).unwrap();
        cases.push(FitTargets::new(thresholds, cdf, surv).unwrap());
    }

    let successes: usize = cases
        .par_iter()
        .map(|targets| {
            let fit = grid_fit(targets, &config).expect("fit");
            if fit.rss > 1e-8 {
                return 0;
            }
            for (t, want) in targets.thresholds.iter().zip(targets.cdf_targets) {
                let got = fit.params.cdf(*t).unwrap();
                if (got - want).abs() > 1e-4 {
                    return 0;
                }
            }
            let surv = fit.params.survival(targets.thresholds[3]).unwrap();
            if (surv - targets.surv_target).abs() > 1e-4 {
                return 0;
            }
            1
        })
        .sum();

    // The exponential(β = 5) reference cell must recover its mean.
    let expo = |t: f64| 1.0 - (-t / 5.0f64).exp();
    let targets = FitTargets::new(
        thresholds,
        thresholds.map(expo),
        (-16.0f64 / 5.0).exp(),
    )
    .unwrap();
    let fit = grid_fit(&targets, &config).expect("exponential fit");
    let mys_err = (fit.params.mean() - 5.0).abs();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = successes >= 190 && mys_err <= 1e-3 && elapsed < 600.0;
    report(
        "4 fit recovery",
        pass,
        &format!(
            "{successes}/200 recovered (>=190), exponential MYS error {mys_err:.2e} (<=1e-3), \
             {elapsed:.0}s (<600s)"
        ),
    );
}

#[test]
fn criterion_5_decomposition_identity_and_validity() {
    const N_DRAWS: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(55_055);
    let mut regions = Vec::new();
    for _ in 0..50 {
        let n_members = rng.random_range(2..=5);
        let mut members = Vec::new();
        for m in 0..n_members {
            let a = rng.random_range(0.6f64.ln()..4.0f64.ln()).exp();
            let p = rng.random_range(0.6f64.ln()..4.0f64.ln()).exp();
            let beta = rng.random_range(1.0..12.0);
            let weight = rng.random_range(0.1..1.0);
            members.push((format!("m{m}"), GgParams::new(a, beta, p).unwrap(), weight));
        }
        regions.push(Region::new(members).unwrap());
    }

    // Identity: exact by construction for every θ.
    for region in &regions {
        for theta in [0.0, 1.0, 2.0] {
            let d = region.ge_decompose(theta).unwrap();
            assert_eq!(d.total, d.between + d.within, "identity must be exact");
        }
    }

    // Validity: the decomposed total matches Monte Carlo GE on the mixture.
    let failures: Vec<String> = regions
        .par_iter()
        .enumerate()
        .flat_map(|(i, region)| {
            let mut local = Vec::new();
            let sample = sample_mixture(region, N_DRAWS, 777_000 + i as u64);
            for (theta, kind) in
                [(0.0, Functional::Mld), (1.0, Functional::Theil), (2.0, Functional::Ge2)]
            {
                let total = region.ge_decompose(theta).unwrap().total;
                let est = mc_functional(&sample, kind);
                if (total - est.value).abs() > 3.0 * est.std_error {
                    local.push(format!(
                        "region {i} GE({theta}): {total} vs MC {} ± {}",
                        est.value, est.std_error
                    ));
                }
            }
            local
        })
        .collect();

    // Two-exponential toy: between-MLD = 0.5·ln 2 + 0.5·ln(2/3).
    let toy = Region::new(vec![
        ("a".into(), GgParams::new(1.0, 1.0, 1.0).unwrap(), 0.5),
        ("b".into(), GgParams::new(1.0, 3.0, 1.0).unwrap(), 0.5),
    ])
    .unwrap();
    let between = toy.ge_decompose(0.0).unwrap().between;
    let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
    let toy_err = (between - expected).abs();

    let pass = failures.is_empty() && toy_err <= 1e-6;
    report(
        "5 decomposition identity and validity",
        pass,
        &format!(
            "50 regions exact, MC within 3 SE, toy between-MLD error {toy_err:.2e} (<=1e-6){}{}",
            if failures.is_empty() { "" } else { "; " },
            failures.join("; ")
        ),
    );
}

fn run_fit(dir: &Path, input: &Path, out_name: &str, threads: &str) -> PathBuf {
    let out = dir.join(out_name);
    let status = Command::new(env!("CARGO_BIN_EXE_edugamma"))
        .arg("fit")
        .arg(input)
        .arg("-o")
        .arg(&out)
        .env("EDUGAMMA_THREADS", threads)
        .output()
        .expect("run edugamma fit");
    assert!(
        status.status.success(),
        "fit failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    out
}

#[test]
fn criterion_6_determinism_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_edugamma"))
        .arg("demo")
        .arg("-o")
        .arg(dir.path())
        .output()
        .expect("run edugamma demo");
    assert!(status.status.success());
    let input = dir.path().join("demo_attainment.csv");

    let a = run_fit(dir.path(), &input, "run_a.csv", "1");
    let b = run_fit(dir.path(), &input, "run_b.csv", "1");
    let c = run_fit(dir.path(), &input, "run_c.csv", "4");
    let bytes_a = std::fs::read(&a).unwrap();
    let identical =
        bytes_a == std::fs::read(&b).unwrap() && bytes_a == std::fs::read(&c).unwrap();

    // The demo is generated from known parameters: every cell refits tightly.
    let table = edugamma::dataio::read_results_csv(&a).unwrap();
    let worst_rss = table.rows.iter().map(|r| r.rss).fold(0.0f64, f64::max);
    let pass = identical && table.rows.len() == 24 && worst_rss <= 1e-8;
    report(
        "6 determinism",
        pass,
        &format!(
            "byte-identical across 2 runs and EDUGAMMA_THREADS in {{1,4}}: {identical}; \
             24 demo cells, worst rss {worst_rss:.2e} (<=1e-8)"
        ),
    );
}

#[test]
fn criterion_7_source_data_reproduction_optional() {
    // Desk-scale reproduction of the published numbers requires the
    // non-redistributable source tables. When EDUGAMMA_BL_DATA names a
    // directory containing bl_attainment.csv (the standard input schema,
    // 15plus totals included) and bl_groups.csv (world grouping with
    // population weights), this fits everything and checks mean years of
    // schooling for the 1970 world total within ±0.05 years of 3.4405 and
    // the 1970 total RSS median within an order of magnitude of 1.99e-4.
    let Ok(dir) = std::env::var("EDUGAMMA_BL_DATA") else {
        println!("acceptance 7 source-data reproduction: SKIP (EDUGAMMA_BL_DATA not set)");
        return;
    };
    let dir = PathBuf::from(dir);
    let attainment = dir.join("bl_attainment.csv");
    let groups = dir.join("bl_groups.csv");
    assert!(attainment.exists() && groups.exists(), "EDUGAMMA_BL_DATA must contain bl_attainment.csv and bl_groups.csv");

    let work = tempfile::tempdir().unwrap();
    let results = run_fit(work.path(), &attainment, "bl_results.csv", "4");
    let table = edugamma::dataio::read_results_csv(&results).unwrap();

    // RSS quartiles, 1970 totals.
    let rss_1970: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| {
            r.year == 1970
                && r.sex == edugamma::fitter::Sex::Total
                && r.age_group == edugamma::fitter::AgeGroup::Over15
        })
        .map(|r| r.rss)
        .collect();
    let q = edugamma::fitter::quartiles(&rss_1970).expect("1970 totals present");
    let rss_ok = q.median >= 1.99e-5 && q.median <= 1.99e-3;

    // World MYS 1970 total.
    let group_rows = edugamma::dataio::read_groups_csv(&groups).unwrap();
    let mut members = Vec::new();
    for row in &table.rows {
        if row.year != 1970
            || row.sex != edugamma::fitter::Sex::Total
            || row.age_group != edugamma::fitter::AgeGroup::Over15
        {
            continue;
        }
        if let Some(g) = group_rows.iter().find(|g| g.cell_id == row.country) {
            members.push((row.country.clone(), row.params, g.weight));
        }
    }
    let region = Region::new(members).expect("world region");
    let mys = region.mean();
    let mys_ok = (mys - 3.4405).abs() <= 0.05;

    report(
        "7 source-data reproduction",
        rss_ok && mys_ok,
        &format!(
            "world 1970 total MYS {mys:.4} (3.4405 ± 0.05), 1970 total RSS median {:.3e} \
             (order of 1.99e-4)",
            q.median
        ),
    );
}

#[test]
fn criterion_8_property_suites() {
    let mut problems = Vec::new();

    for params in parameter_grid() {
        // Lorenz below the diagonal, nondecreasing, convex on a 1001-grid.
        let n = 1001;
        let values: Vec<f64> =
            (0..n).map(|i| params.lorenz(i as f64 / (n - 1) as f64).unwrap()).collect();
        for (i, w) in values.windows(2).enumerate() {
            let u = i as f64 / (n - 1) as f64;
            if values[i] > u + 1e-10 {
                problems.push(format!("L({u}) above diagonal for {params:?}"));
                break;
            }
            if w[1] < w[0] - 1e-12 {
                problems.push(format!("L not monotone at {u} for {params:?}"));
                break;
            }
        }
        for w in values.windows(3) {
            if w[2] - 2.0 * w[1] + w[0] < -1e-10 {
                problems.push(format!("L not convex for {params:?}"));
                break;
            }
        }

        // Scale invariance of the inequality measures is exact.
        let scaled = GgParams::new(params.a(), params.beta() * 3.0, params.p()).unwrap();
        if scaled.mld() != params.mld()
            || scaled.theil() != params.theil()
            || scaled.ge2() != params.ge2()
            || scaled.gini() != params.gini()
        {
            problems.push(format!("scale invariance broken for {params:?}"));
        }

        // Quantile round trips.
        for u in [0.01, 0.1, 0.5, 0.9, 0.99] {
            let x = params.quantile(u).unwrap();
            if (params.cdf(x).unwrap() - u).abs() > 1e-8 {
                problems.push(format!("quantile round trip at {u} for {params:?}"));
            }
        }
    }

    // Dominance-check correctness on constructed pairs.
    let lo = Region::new(vec![("lo".into(), GgParams::new(1.0, 1.0, 1.0).unwrap(), 1.0)]).unwrap();
    let hi = Region::new(vec![("hi".into(), GgParams::new(1.0, 2.0, 1.0).unwrap(), 1.0)]).unwrap();
    if !hi.first_order_dominates(&lo, 25.0, 2001).unwrap().dominates {
        problems.push("constructed dominating pair not detected".into());
    }
    if lo.first_order_dominates(&hi, 25.0, 2001).unwrap().dominates {
        problems.push("reversed pair wrongly declared dominant".into());
    }
    // Same mean, different shape: the CDFs cross, so neither dominates.
    let gamma = Region::new(vec![("g".into(), GgParams::new(1.0, 0.5, 4.0).unwrap(), 1.0)]).unwrap();
    let expo = Region::new(vec![("e".into(), GgParams::new(1.0, 2.0, 1.0).unwrap(), 1.0)]).unwrap();
    if gamma.first_order_dominates(&expo, 25.0, 2001).unwrap().dominates
        || expo.first_order_dominates(&gamma, 25.0, 2001).unwrap().dominates
    {
        problems.push("crossing pair wrongly declared dominant".into());
    }

    // Censor-aware targets stay coherent after renormalization.
    let record = edugamma::fitter::AttainmentRecord {
        country: "XX".into(),
        year: 2000,
        sex: edugamma::fitter::Sex::Total,
        age_group: edugamma::fitter::AgeGroup::Over15,
        shares: [0.2998, 0.3998, 0.1999, 0.06, 0.04],
        dur_primary: 6.0,
        dur_secondary: 6.0,
    };
    let targets = build_targets(&record).unwrap();
    if (targets.cdf_targets[3] + targets.surv_target - 1.0).abs() > 1e-9 {
        problems.push("renormalized targets do not close to 1".into());
    }

    report(
        "8 property suites",
        problems.is_empty(),
        &format!(
            "Lorenz shape, scale invariance, quantile round trips, dominance checks{}{}",
            if problems.is_empty() { "" } else { "; " },
            problems.join("; ")
        ),
    );
}
