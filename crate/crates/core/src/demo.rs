//! Bundled synthetic demo data: 24 cells (4 countries × 2 years × 3 sexes)
//! whose category shares are generated exactly from known generalized gamma
//! parameters, so a default fit recovers them with negligible residual.
//!
//! The real attainment sources are not redistributable; this dataset only
//! exercises the pipeline.

use crate::dataio::GroupRow;
use crate::fitter::{AgeGroup, AttainmentRecord, Sex, TERTIARY_DURATION};
use crate::gg::GgParams;

/// Generating parameters for one demo country.
struct DemoCountry {
    code: &'static str,
    dur_primary: f64,
    dur_secondary: f64,
    /// (year, sex) -> (a, beta, p)
    params: fn(i32, Sex) -> (f64, f64, f64),
}

const COUNTRIES: [DemoCountry; 4] = [
    // Pure exponential with mean 5, constant across cells: the reference
    // case with closed-form targets.
    DemoCountry { code: "EXA", dur_primary: 6.0, dur_secondary: 6.0, params: |_, _| (1.0, 5.0, 1.0) },
    // Gamma-shaped (a = 1), low attainment growing over time.
    DemoCountry {
        code: "GAM",
        dur_primary: 5.0,
        dur_secondary: 6.0,
        params: |year, sex| {
            let growth = if year == 1990 { 1.5 } else { 1.0 };
            let sex_shift = match sex {
                Sex::Total => 1.0,
                Sex::Male => 1.1,
                Sex::Female => 0.9,
            };
            (1.0, 2.2 * growth, 1.6 * sex_shift)
        },
    },
    // Weibull-shaped (p = 1), single mode.
    DemoCountry {
        code: "WEI",
        dur_primary: 6.0,
        dur_secondary: 6.0,
        params: |year, sex| {
            let growth = if year == 1990 { 1.25 } else { 1.0 };
            let sex_shift = match sex {
                Sex::Total => 1.0,
                Sex::Male => 1.05,
                Sex::Female => 0.95,
            };
            (1.8, 7.5 * growth * sex_shift, 1.0)
        },
    },
    // General three-parameter shape, high attainment.
    DemoCountry {
        code: "GGX",
        dur_primary: 6.0,
        dur_secondary: 7.0,
        params: |year, sex| {
            let growth = if year == 1990 { 1.2 } else { 1.0 };
            let sex_shift = match sex {
                Sex::Total => 1.0,
                Sex::Male => 1.08,
                Sex::Female => 0.92,
            };
            (2.4, 10.0 * growth, 0.9 * sex_shift)
        },
    },
];

/// The 24 synthetic demo records, shares computed from the generating CDFs.
pub fn demo_records() -> Vec<AttainmentRecord> {
    let mut records = Vec::with_capacity(24);
    for country in &COUNTRIES {
        for year in [1970, 1990] {
            for sex in [Sex::Total, Sex::Male, Sex::Female] {
                let (a, beta, p) = (country.params)(year, sex);
                let params = GgParams::new(a, beta, p).expect("demo parameters are valid");
                let t_p = country.dur_primary;
                let t_s = t_p + country.dur_secondary;
                let t_t = t_s + TERTIARY_DURATION;
                let f = |x: f64| params.cdf(x).expect("demo thresholds are nonnegative");
                let shares = [
                    f(1.0),
                    f(t_p) - f(1.0),
                    f(t_s) - f(t_p),
                    f(t_t) - f(t_s),
                    params.survival(t_t).expect("demo thresholds are nonnegative"),
                ];
                records.push(AttainmentRecord {
                    country: country.code.to_string(),
                    year,
                    sex,
                    age_group: AgeGroup::Over15,
                    shares,
                    dur_primary: country.dur_primary,
                    dur_secondary: country.dur_secondary,
                });
            }
        }
    }
    records
}

/// Demo region definitions: one global group plus a two-way split.
pub fn demo_groups() -> Vec<GroupRow> {
    let assign = |cell: &str, group: &str, weight: f64| GroupRow {
        cell_id: cell.to_string(),
        group_id: group.to_string(),
        weight,
    };
    vec![
        assign("EXA", "world", 0.4),
        assign("GAM", "world", 0.3),
        assign("WEI", "world", 0.2),
        assign("GGX", "world", 0.1),
        assign("EXA", "north", 0.55),
        assign("GAM", "north", 0.45),
        assign("WEI", "south", 0.65),
        assign("GGX", "south", 0.35),
    ]
}
