//! Independent oracles for the test suite: a seeded generalized gamma
//! sampler, Monte Carlo estimates of the distribution functionals, adaptive
//! quadrature of their defining integrals, and high-precision reference
//! implementations of the log-gamma and digamma functions.
//!
//! Nothing here is used by the production estimation path; these routines
//! exist so that the closed forms can be checked against routes that do not
//! share their code.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gg::GgParams;
use crate::mixture::Region;

/// Draw n variates from GG(a, β, p), deterministically for a given seed.
///
/// Uses the power relationship X = β·G^{1/a} with G ~ Gamma(p, 1), sampling
/// G by Marsaglia-Tsang rejection (with the U^{1/p} boost for p < 1).
pub fn sample_gg(params: &GgParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let g = gamma_variate(&mut rng, params.p());
        out.push(params.beta() * g.powf(1.0 / params.a()));
    }
    out
}

/// Draw n variates from a population-weighted mixture, deterministically for
/// a given seed: pick a member by weight, then draw from it.
pub fn sample_mixture(region: &Region, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = region.members();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pick: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = members.len() - 1;
        for (i, m) in members.iter().enumerate() {
            acc += m.weight;
            if pick < acc {
                chosen = i;
                break;
            }
        }
        let m = &members[chosen];
        let g = gamma_variate(&mut rng, m.params.p());
        out.push(m.params.beta() * g.powf(1.0 / m.params.a()));
    }
    out
}

/// Marsaglia-Tsang gamma(shape, 1) variate.
fn gamma_variate<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = gamma_variate(rng, shape + 1.0);
        let u: f64 = rng.random();
        return g * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Which functional of the distribution to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Mean,
    Mld,
    Theil,
    Ge2,
    Gini,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

const MC_BATCHES: usize = 100;

/// Plug-in Monte Carlo estimate of a functional, with a batch-means standard
/// error (the sample is split into 100 batches; the spread of the per-batch
/// statistics estimates the sampling error of the pooled statistic).
pub fn mc_functional(samples: &[f64], kind: Functional) -> McEstimate {
    assert!(!samples.is_empty(), "mc_functional needs a nonempty sample");
    let value = plugin_statistic(samples, kind);
    if samples.len() < 2 * MC_BATCHES {
        // Too small to batch; fall back to the naive iid error of the mean.
        let mean = plugin_statistic(samples, Functional::Mean);
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (samples.len() - 1) as f64;
        return McEstimate { value, std_error: (var / samples.len() as f64).sqrt() };
    }
    let batch_len = samples.len() / MC_BATCHES;
    let mut batch_values = Vec::with_capacity(MC_BATCHES);
    for b in 0..MC_BATCHES {
        let chunk = &samples[b * batch_len..(b + 1) * batch_len];
        batch_values.push(plugin_statistic(chunk, kind));
    }
    let bm = batch_values.iter().sum::<f64>() / MC_BATCHES as f64;
    let bvar = batch_values.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>()
        / (MC_BATCHES - 1) as f64;
    McEstimate { value, std_error: (bvar / MC_BATCHES as f64).sqrt() }
}

fn plugin_statistic(samples: &[f64], kind: Functional) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    match kind {
        Functional::Mean => mean,
        Functional::Mld => samples.iter().map(|&x| (mean / x).ln()).sum::<f64>() / n,
        Functional::Theil => {
            samples.iter().map(|&x| x / mean * (x / mean).ln()).sum::<f64>() / n
        }
        Functional::Ge2 => {
            let second = samples.iter().map(|&x| (x / mean) * (x / mean)).sum::<f64>() / n;
            (second - 1.0) / 2.0
        }
        Functional::Gini => {
            // Mean absolute difference over 2μ, via the sorted-sample identity
            // G = Σ (2i − n − 1)·x_(i) / (n² μ).
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            let mut acc = 0.0;
            for (i, &x) in sorted.iter().enumerate() {
                acc += (2.0 * (i as f64 + 1.0) - n - 1.0) * x;
            }
            acc / (n * n * mean)
        }
    }
}

/// Monte Carlo Lorenz ordinate: the share of the total held by the lowest
/// fraction u of the sorted sample.
pub fn mc_lorenz(samples: &[f64], u: f64) -> McEstimate {
    assert!((0.0..=1.0).contains(&u));
    let lorenz_of = |chunk: &[f64]| -> f64 {
        let mut sorted = chunk.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        let k = (u * sorted.len() as f64).floor() as usize;
        let partial: f64 = sorted[..k].iter().sum();
        let total: f64 = sorted.iter().sum();
        partial / total
    };
    let value = lorenz_of(samples);
    if samples.len() < 2 * MC_BATCHES {
        return McEstimate { value, std_error: f64::NAN };
    }
    let batch_len = samples.len() / MC_BATCHES;
    let batch_values: Vec<f64> = (0..MC_BATCHES)
        .map(|b| lorenz_of(&samples[b * batch_len..(b + 1) * batch_len]))
        .collect();
    let bm = batch_values.iter().sum::<f64>() / MC_BATCHES as f64;
    let bvar = batch_values.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>()
        / (MC_BATCHES - 1) as f64;
    McEstimate { value, std_error: (bvar / MC_BATCHES as f64).sqrt() }
}

/// Tanh-sinh (double exponential) quadrature of f over the finite interval
/// [a, b]. Handles integrable endpoint singularities; nodes whose offset
/// from the endpoint underflows, or where f is not finite, are skipped —
/// their weights are beyond double precision anyway.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b > a, "tanh_sinh needs b > a");
    let half = 0.5 * (b - a);
    const T_MAX: f64 = 6.5;

    // Evaluate the transformed integrand at parameter t (node + weight).
    let eval = |t: f64| -> f64 {
        let sinh_t = t.sinh();
        let y = std::f64::consts::FRAC_PI_2 * sinh_t;
        // tanh(y) via e = exp(-2|y|) to keep the endpoint offset accurate.
        let e = (-2.0 * y.abs()).exp();
        if e == 0.0 {
            return 0.0;
        }
        let offset = half * 2.0 * e / (1.0 + e); // distance from the endpoint
        let x = if y >= 0.0 { b - offset } else { a + offset };
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let weight = half * std::f64::consts::FRAC_PI_2 * t.cosh() * sech2;
        let fx = f(x);
        if fx.is_finite() {
            fx * weight
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut integral = h * sum;

    for _ in 0..12 {
        // Halve the step: add the midpoints of the current grid.
        let h_new = 0.5 * h;
        let mut extra = 0.0;
        let mut j = 1;
        while (j as f64) * h_new <= T_MAX {
            let t = j as f64 * h_new;
            extra += eval(t) + eval(-t);
            j += 2;
        }
        let refined = 0.5 * integral + h_new * extra;
        let change = (refined - integral).abs();
        integral = refined;
        h = h_new;
        if change <= tol * integral.abs().max(1.0) && h < 0.5 {
            break;
        }
    }
    integral
}

/// Which defining integral to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadKind {
    /// ∫ f(x) dx — should be 1.
    Norm,
    Mean,
    Mld,
    Theil,
    Ge2,
    /// 1 − (1/μ)∫ (1 − F(x))² dx.
    Gini,
}

/// Upper cutoff beyond which the GG tail mass is far below any tolerance
/// used here: (x/β)^a = p + 40√p + 50.
fn upper_cutoff(params: &GgParams) -> f64 {
    let g_hi = params.p() + 40.0 * params.p().sqrt() + 50.0;
    params.beta() * g_hi.powf(1.0 / params.a())
}

/// Adaptive quadrature of the defining integral of a functional, to about
/// 1e-9. Independent of the closed forms it is used to check.
pub fn quad_functional(params: &GgParams, kind: QuadKind) -> f64 {
    let hi = upper_cutoff(params);
    let tol = 1e-11;
    let pdf = |x: f64| params.pdf(x).unwrap_or(0.0);
    match kind {
        QuadKind::Norm => tanh_sinh(pdf, 0.0, hi, tol),
        QuadKind::Mean => tanh_sinh(|x| x * pdf(x), 0.0, hi, tol),
        QuadKind::Mld => {
            let mu = tanh_sinh(|x| x * pdf(x), 0.0, hi, tol);
            tanh_sinh(|x| (mu / x).ln() * pdf(x), 0.0, hi, tol)
        }
        QuadKind::Theil => {
            let mu = tanh_sinh(|x| x * pdf(x), 0.0, hi, tol);
            tanh_sinh(|x| x / mu * (x / mu).ln() * pdf(x), 0.0, hi, tol)
        }
        QuadKind::Ge2 => {
            let mu = tanh_sinh(|x| x * pdf(x), 0.0, hi, tol);
            let second = tanh_sinh(|x| (x / mu) * (x / mu) * pdf(x), 0.0, hi, tol);
            (second - 1.0) / 2.0
        }
        QuadKind::Gini => {
            let mu = tanh_sinh(|x| x * pdf(x), 0.0, hi, tol);
            let surv2 = tanh_sinh(
                |x| {
                    let s = params.survival(x).unwrap_or(0.0);
                    s * s
                },
                0.0,
                hi,
                tol,
            );
            1.0 - surv2 / mu
        }
    }
}

// --- High-precision references for the special-function kernel ---

// Bernoulli-number coefficients B_{2n}/(2n(2n−1)) for the Stirling series.
const STIRLING_COEF: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Reference ln Γ by the Stirling series after shifting the argument above
/// 40, where the truncation error is below 1e-25. The shift products are
/// accumulated with compensated summation so the reference stays good to a
/// few 1e-15 even where ln Γ crosses zero.
pub fn ref_ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift_sum = 0.0f64;
    let mut shift_comp = 0.0f64;
    let mut z = x;
    while z < 40.0 {
        // Kahan-compensated accumulation of ln z terms.
        let term = z.ln();
        let t = shift_sum + term;
        if shift_sum.abs() >= term.abs() {
            shift_comp += (shift_sum - t) + term;
        } else {
            shift_comp += (term - t) + shift_sum;
        }
        shift_sum = t;
        z += 1.0;
    }
    let mut series = 0.0;
    let mut power = 1.0 / z;
    let z2 = z * z;
    for &c in &STIRLING_COEF {
        series += c * power;
        power /= z2;
    }
    let stirling = (z - 0.5) * z.ln() - z + 0.918_938_533_204_672_742 + series;
    stirling - (shift_sum + shift_comp)
}

// B_{2n}/(2n) for the digamma asymptotic series.
const DIGAMMA_REF_COEF: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43_867.0 / 14364.0,
    -174_611.0 / 6600.0,
];

/// Reference digamma by the asymptotic series after shifting above 40, with
/// a compensated shift sum.
pub fn ref_digamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0f64;
    let mut comp = 0.0f64;
    let mut z = x;
    while z < 40.0 {
        let term = 1.0 / z;
        let t = shift + term;
        if shift.abs() >= term.abs() {
            comp += (shift - t) + term;
        } else {
            comp += (term - t) + shift;
        }
        shift = t;
        z += 1.0;
    }
    let shift = shift + comp;
    let inv2 = 1.0 / (z * z);
    let mut series = 0.0;
    let mut power = inv2;
    for &c in &DIGAMMA_REF_COEF {
        series += c * power;
        power *= inv2;
    }
    z.ln() - 0.5 / z - series - shift
}

/// Reference P(s, x) by tanh-sinh quadrature of the defining integral.
pub fn ref_reg_lower(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let lg = ref_ln_gamma(s);
    let integrand = |t: f64| ((s - 1.0) * t.ln() - t - lg).exp();
    tanh_sinh(integrand, 0.0, x, 1e-14).clamp(0.0, 1.0)
}
