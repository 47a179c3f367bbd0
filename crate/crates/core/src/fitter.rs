//! Nonlinear least-squares estimation of generalized gamma parameters from
//! grouped, right-censored attainment rates.
//!
//! One attainment record (five category shares plus cycle durations) becomes
//! a set of censor-aware CDF targets; the parameters are then estimated by
//! minimizing the sum of squared deviations between model probabilities and
//! those targets, restarted over a grid of the first shape parameter with
//! moment-based starting values for the other two.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::gg::GgParams;

/// Duration of tertiary education, assumed constant across countries and years.
pub const TERTIARY_DURATION: f64 = 4.0;

/// Years below which a person counts as having no schooling.
pub const ILLITERACY_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitterError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("fit failed: every grid restart produced a non-finite objective")]
    FitFailed,
    #[error("cannot compute quartiles of an empty group")]
    EmptyGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sex {
    Total,
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "total" => Ok(Sex::Total),
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            other => Err(format!("unknown sex '{other}' (expected total|male|female)")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Total => "total",
            Sex::Male => "male",
            Sex::Female => "female",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgeGroup {
    Over15,
    Over25,
}

impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "15plus" => Ok(AgeGroup::Over15),
            "25plus" => Ok(AgeGroup::Over25),
            other => Err(format!("unknown age group '{other}' (expected 15plus|25plus)")),
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgeGroup::Over15 => "15plus",
            AgeGroup::Over25 => "25plus",
        })
    }
}

/// One country/year/sex/age cell of attainment data. Shares are by highest
/// completed level, in order: no schooling, primary, secondary, incomplete
/// tertiary, complete tertiary.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainmentRecord {
    pub country: String,
    pub year: i32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub shares: [f64; 5],
    pub dur_primary: f64,
    pub dur_secondary: f64,
}

impl AttainmentRecord {
    pub fn validate(&self) -> Result<(), FitterError> {
        if self.country.trim().is_empty() {
            return Err(FitterError::InvalidRecord("empty country identifier".into()));
        }
        if !(1970..=2010).contains(&self.year) || self.year % 5 != 0 {
            return Err(FitterError::InvalidRecord(format!(
                "year {} outside 1970..2010 in 5-year steps",
                self.year
            )));
        }
        for (name, d) in [("dur_primary", self.dur_primary), ("dur_secondary", self.dur_secondary)] {
            if !(3.0..=10.0).contains(&d) {
                return Err(FitterError::InvalidRecord(format!(
                    "{name} = {d} outside [3, 10] years"
                )));
            }
        }
        for sh in self.shares {
            if !sh.is_finite() || sh < -1e-6 {
                return Err(FitterError::InvalidRecord(format!("share {sh} below -1e-6")));
            }
        }
        let sum: f64 = self.shares.iter().map(|s| s.max(0.0)).sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(FitterError::InvalidRecord(format!(
                "shares sum to {sum}, more than 1e-3 away from 1"
            )));
        }
        Ok(())
    }
}

/// Diagnostic flags attached to a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitFlags {
    pub renormalized_input: bool,
    pub degenerate_illiterate: bool,
    pub degenerate_tertiary: bool,
}

impl FitFlags {
    pub fn is_empty(&self) -> bool {
        !(self.renormalized_input || self.degenerate_illiterate || self.degenerate_tertiary)
    }
}

impl fmt::Display for FitFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.renormalized_input {
            parts.push("renormalized_input");
        }
        if self.degenerate_illiterate {
            parts.push("degenerate_illiterate");
        }
        if self.degenerate_tertiary {
            parts.push("degenerate_tertiary");
        }
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for FitFlags {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = FitFlags::default();
        for token in s.split(';').filter(|t| !t.is_empty()) {
            match token {
                "renormalized_input" => flags.renormalized_input = true,
                "degenerate_illiterate" => flags.degenerate_illiterate = true,
                "degenerate_tertiary" => flags.degenerate_tertiary = true,
                other => return Err(format!("unknown flag '{other}'")),
            }
        }
        Ok(flags)
    }
}

/// Censor-aware fit targets: four cumulative thresholds in years with their
/// cumulative probabilities, plus the right-censored mass at or beyond the
/// tertiary threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTargets {
    pub thresholds: [f64; 4],
    pub cdf_targets: [f64; 4],
    pub surv_target: f64,
    pub flags: FitFlags,
}

impl FitTargets {
    pub fn new(
        thresholds: [f64; 4],
        cdf_targets: [f64; 4],
        surv_target: f64,
    ) -> Result<Self, FitterError> {
        if thresholds[0] <= 0.0 || !thresholds.iter().all(|t| t.is_finite()) {
            return Err(FitterError::InvalidTargets(format!(
                "thresholds must be positive and finite: {thresholds:?}"
            )));
        }
        for w in thresholds.windows(2) {
            if w[1] <= w[0] {
                return Err(FitterError::InvalidTargets(format!(
                    "thresholds not strictly increasing: {thresholds:?}"
                )));
            }
        }
        let mut prev = 0.0;
        for &c in &cdf_targets {
            if !(0.0..=1.0).contains(&c) || c < prev - 1e-12 {
                return Err(FitterError::InvalidTargets(format!(
                    "cdf targets must be nondecreasing probabilities: {cdf_targets:?}"
                )));
            }
            prev = c;
        }
        if !(0.0..=1.0).contains(&surv_target) {
            return Err(FitterError::InvalidTargets(format!(
                "survival target {surv_target} outside [0, 1]"
            )));
        }
        if (cdf_targets[3] + surv_target - 1.0).abs() > 1e-9 {
            return Err(FitterError::InvalidTargets(format!(
                "cdf_targets[3] + surv_target = {} must equal 1 within 1e-9",
                cdf_targets[3] + surv_target
            )));
        }
        Ok(FitTargets { thresholds, cdf_targets, surv_target, flags: FitFlags::default() })
    }
}

/// Build censor-aware targets from one record: thresholds are cumulative
/// years (1, D_P, D_P + D_S, D_P + D_S + 4) and the category shares become
/// running-sum CDF values, renormalized to sum exactly to 1.
pub fn build_targets(record: &AttainmentRecord) -> Result<FitTargets, FitterError> {
    let mut flags = FitFlags::default();
    let mut shares = record.shares;
    for sh in &mut shares {
        if !sh.is_finite() || *sh < -1e-6 {
            return Err(FitterError::InvalidRecord(format!("share {sh} below -1e-6")));
        }
        if *sh < 0.0 {
            *sh = 0.0;
            flags.renormalized_input = true;
        }
    }
    let sum: f64 = shares.iter().sum();
    if !(0.99..=1.01).contains(&sum) {
        return Err(FitterError::InvalidRecord(format!(
            "shares sum to {sum}, outside [0.99, 1.01]"
        )));
    }
    for (name, d) in [("dur_primary", record.dur_primary), ("dur_secondary", record.dur_secondary)]
    {
        if !(3.0..=10.0).contains(&d) {
            return Err(FitterError::InvalidRecord(format!("{name} = {d} outside [3, 10] years")));
        }
    }
    if (sum - 1.0).abs() > 1e-9 {
        for sh in &mut shares {
            *sh /= sum;
        }
        flags.renormalized_input = true;
    }
    if shares[0] >= 1.0 - 1e-9 {
        flags.degenerate_illiterate = true;
    }
    if shares[4] >= 1.0 - 1e-9 {
        flags.degenerate_tertiary = true;
    }

    let t_p = record.dur_primary;
    let t_s = record.dur_primary + record.dur_secondary;
    let t_t = t_s + TERTIARY_DURATION;
    let thresholds = [ILLITERACY_THRESHOLD, t_p, t_s, t_t];
    let cdf_targets = [
        shares[0],
        shares[0] + shares[1],
        shares[0] + shares[1] + shares[2],
        shares[0] + shares[1] + shares[2] + shares[3],
    ];
    Ok(FitTargets { thresholds, cdf_targets, surv_target: shares[4], flags })
}

/// The fit objective: squared deviations of the model CDF at the four
/// thresholds plus the squared deviation of the survival function at the
/// tertiary threshold (the right-censored category).
pub fn objective(params: &GgParams, targets: &FitTargets) -> f64 {
    let mut total = 0.0;
    for j in 0..4 {
        match params.cdf(targets.thresholds[j]) {
            Ok(f) => {
                let d = f - targets.cdf_targets[j];
                total += d * d;
            }
            Err(_) => return f64::INFINITY,
        }
    }
    match params.survival(targets.thresholds[3]) {
        Ok(s) => {
            let d = s - targets.surv_target;
            total += d * d;
        }
        Err(_) => return f64::INFINITY,
    }
    if total.is_finite() {
        total
    } else {
        f64::INFINITY
    }
}

fn objective_log_params(theta: &[f64; 3], targets: &FitTargets) -> f64 {
    match GgParams::new(theta[0].exp(), theta[1].exp(), theta[2].exp()) {
        Ok(params) => objective(&params, targets),
        Err(_) => f64::INFINITY,
    }
}

/// Moment-based starting values for (p, β) at a fixed shape a.
///
/// If X ~ GG(a, β, p) then X^a ~ Gamma(p, β^a), so method-of-moments on a
/// pseudo-sample of transformed category representatives gives
/// p0 = m²/v and β0 = (v/m)^{1/a}. The representatives are category
/// midpoints in years, with the censored top category placed two years past
/// the tertiary threshold.
pub fn moment_start(a: f64, targets: &FitTargets) -> (f64, f64) {
    let [t_ns, t_p, t_s, t_t] = targets.thresholds;
    let points = [
        t_ns / 2.0,
        (t_ns + t_p) / 2.0,
        (t_p + t_s) / 2.0,
        (t_s + t_t) / 2.0,
        t_t + 2.0,
    ];
    let masses = [
        targets.cdf_targets[0],
        targets.cdf_targets[1] - targets.cdf_targets[0],
        targets.cdf_targets[2] - targets.cdf_targets[1],
        targets.cdf_targets[3] - targets.cdf_targets[2],
        targets.surv_target,
    ];
    let mut m = 0.0;
    let mut m2 = 0.0;
    for (x, w) in points.iter().zip(masses) {
        let y = x.powf(a);
        m += w * y;
        m2 += w * y * y;
    }
    let v = m2 - m * m;
    if v <= 1e-12 {
        return (1.0, m.powf(1.0 / a));
    }
    (m * m / v, (v / m).powf(1.0 / a))
}

/// Optimizer settings: the restart grid for the first shape parameter and
/// the local-minimizer tolerances. Defaults follow the grid 0.2..20 in steps
/// of 0.2 with numerically differenced BFGS.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub obj_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            grid_min: 0.2,
            grid_max: 20.0,
            grid_step: 0.2,
            max_iter: 500,
            grad_tol: 1e-10,
            obj_tol: 1e-14,
        }
    }
}

impl FitConfig {
    /// The restart grid for parameter a.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.grid_max - self.grid_min) / self.grid_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.grid_min + i as f64 * self.grid_step).collect()
    }
}

/// Result of fitting one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: GgParams,
    pub rss: f64,
    pub grid_a_start: f64,
    pub converged: bool,
    pub n_restarts_tried: usize,
    pub flags: FitFlags,
}

struct MinOutcome {
    theta: [f64; 3],
    value: f64,
    converged: bool,
}

fn numerical_gradient<F: Fn(&[f64; 3]) -> f64>(f: &F, x: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else if fp.is_finite() {
            (fp - f(x)) / h
        } else if fm.is_finite() {
            (f(x) - fm) / h
        } else {
            0.0
        };
    }
    g
}

fn norm_inf(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn mat_vec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = dot(&m[i], v);
    }
    out
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// BFGS with numerically differenced gradients and a backtracking Armijo
/// line search. Deterministic for given inputs.
fn minimize<F: Fn(&[f64; 3]) -> f64>(f: F, start: [f64; 3], config: &FitConfig) -> MinOutcome {
    let mut x = start;
    let mut fx = f(&x);
    if !fx.is_finite() {
        return MinOutcome { theta: start, value: f64::INFINITY, converged: false };
    }
    let mut h_inv = IDENTITY;
    let mut g = numerical_gradient(&f, &x);
    let mut converged = false;

    for _ in 0..config.max_iter {
        if norm_inf(&g) < config.grad_tol {
            converged = true;
            break;
        }
        let hg = mat_vec(&h_inv, &g);
        let mut d = [-hg[0], -hg[1], -hg[2]];
        let mut slope = dot(&d, &g);
        if slope >= 0.0 || !slope.is_finite() {
            h_inv = IDENTITY;
            d = [-g[0], -g[1], -g[2]];
            slope = -dot(&g, &g);
            if slope == 0.0 {
                converged = true;
                break;
            }
        }

        // Backtracking Armijo line search.
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = [x[0] + step * d[0], x[1] + step * d[1], x[2] + step * d[2]];
            let fnew = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // No acceptable step along the search direction; the surface is
            // flat at this resolution.
            break;
        };

        let gn = numerical_gradient(&f, &xn);
        let s = [xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]];
        let y = [gn[0] - g[0], gn[1] - g[1], gn[2] - g[2]];
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-14 * s_norm * y_norm && sy.is_finite() {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy = mat_vec(&h_inv, &y);
            let yhy = dot(&y, &hy);
            let mut updated = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    updated[i][j] = h_inv[i][j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
            h_inv = updated;
        }

        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement.abs() < config.obj_tol {
            converged = true;
            break;
        }
    }
    MinOutcome { theta: x, value: fx, converged }
}

/// Grid-restarted nonlinear least squares. For every grid value of a, start
/// from moment estimates of (p, β) and run the local minimizer in
/// log-parameter space; return the restart with the lowest objective, ties
/// broken toward the smallest grid a.
pub fn grid_fit(targets: &FitTargets, config: &FitConfig) -> Result<FitResult, FitterError> {
    let grid = config.grid();
    let mut best: Option<(f64, MinOutcome)> = None;
    let mut any_converged = false;
    for &a in &grid {
        let (p0, beta0) = moment_start(a, targets);
        if !(p0.is_finite() && beta0.is_finite() && p0 > 0.0 && beta0 > 0.0) {
            continue;
        }
        let start = [a.ln(), beta0.ln(), p0.ln()];
        let outcome = minimize(|theta| objective_log_params(theta, targets), start, config);
        if !outcome.value.is_finite() {
            continue;
        }
        any_converged |= outcome.converged;
        let better = match &best {
            None => true,
            Some((_, current)) => outcome.value < current.value,
        };
        if better {
            best = Some((a, outcome));
        }
    }
    let Some((grid_a_start, outcome)) = best else {
        return Err(FitterError::FitFailed);
    };
    let params = GgParams::new(
        outcome.theta[0].exp(),
        outcome.theta[1].exp(),
        outcome.theta[2].exp(),
    )
    .map_err(|_| FitterError::FitFailed)?;
    let rss = objective(&params, targets);
    Ok(FitResult {
        params,
        rss,
        grid_a_start,
        converged: any_converged,
        n_restarts_tried: grid.len(),
        flags: targets.flags,
    })
}

/// Fit a batch of records. One result per record in input order; invalid
/// records yield an error entry without aborting the batch. Fits run in
/// parallel but each is independent and deterministic, so the output does
/// not depend on the thread count.
pub fn fit_all(
    records: &[AttainmentRecord],
    config: &FitConfig,
) -> Vec<Result<FitResult, FitterError>> {
    records
        .par_iter()
        .map(|record| {
            record.validate()?;
            let targets = build_targets(record)?;
            grid_fit(&targets, config)
        })
        .collect()
}

/// Quartile summary of a set of residual sums of squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub n: usize,
}

/// Type-7 (linear interpolation) quartiles.
pub fn quartiles(values: &[f64]) -> Result<Quartiles, FitterError> {
    if values.is_empty() {
        return Err(FitterError::EmptyGroup);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("RSS values are finite"));
    let q = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        }
    };
    Ok(Quartiles { q1: q(0.25), median: q(0.5), q3: q(0.75), n: sorted.len() })
}

/// Group values by key and summarize each group with type-7 quartiles, as in
/// the year-by-sex goodness-of-fit table.
pub fn gof_quartiles<K: Ord + Clone>(
    items: impl IntoIterator<Item = (K, f64)>,
) -> Vec<(K, Quartiles)> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (key, value) in items {
        groups.entry(key).or_default().push(value);
    }
    groups
        .into_iter()
        .map(|(key, values)| {
            let q = quartiles(&values).expect("groups are nonempty by construction");
            (key, q)
        })
        .collect()
}
