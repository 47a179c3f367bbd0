//! Ingestion and emission of all file artifacts: attainment input tables,
//! per-cell results, goodness-of-fit summaries, regional aggregates, and the
//! curve/Lorenz grids behind the global figures.
//!
//! All files are UTF-8 CSV with '.' decimals and LF line endings. Reals are
//! serialized with 10 significant digits, which makes write-then-reparse
//! idempotent. Output rows are always sorted by (country, year, sex,
//! age_group) regardless of input order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fitter::{AgeGroup, AttainmentRecord, FitFlags, Quartiles, Sex};
use crate::gg::GgParams;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: no usable rows ({n_errors} rows rejected)")]
    NoUsableRows { path: String, n_errors: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> DataIoError {
    DataIoError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> DataIoError {
    DataIoError::Format { path: path.display().to_string(), message: message.into() }
}

/// Format a real with 10 significant digits, printf %g style: positional
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed.
pub fn fmt_sig(x: f64) -> String {
    const SIG: usize = 10;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= SIG as i32 {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (SIG as i32 - 1 - exp).max(0) as usize;
    let fixed = format!("{:.*}", decimals, x);
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

/// A parsing problem tied to a file line (1-based, header is line 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub path: String,
    pub sha256: String,
    pub n_rows: usize,
}

/// A validated set of attainment records with source provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<AttainmentRecord>,
    pub provenance: Provenance,
}

/// Result of parsing an attainment file: the usable records, per-row errors,
/// and whether the whole file was interpreted as percentages.
#[derive(Debug)]
pub struct ParseOutcome {
    pub dataset: Dataset,
    /// Source line of each record in `dataset.records`, parallel by index.
    pub record_lines: Vec<usize>,
    pub row_errors: Vec<RowError>,
    pub percent_mode: bool,
}

pub const ATTAINMENT_HEADER: [&str; 11] = [
    "country",
    "year",
    "sex",
    "age_group",
    "share_ns",
    "share_p",
    "share_s",
    "share_ti",
    "share_tc",
    "dur_primary",
    "dur_secondary",
];

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<(), DataIoError> {
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want {
        return Err(format_err(
            path,
            format!("malformed header: expected '{}', got '{}'", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Parse and validate an attainment CSV.
///
/// Shares are decimals in [0, 1]; if any share in the file exceeds 1.5 the
/// whole file is treated as percentages and divided by 100 (reported via
/// `percent_mode`). Rows that fail validation are collected with their line
/// numbers; they do not abort the parse unless nothing remains.
pub fn parse_attainment_csv(path: &Path) -> Result<ParseOutcome, DataIoError> {
    let raw = fs::read(path).map_err(|e| io_err(path, e))?;
    let sha256 = hex_digest(&raw);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_slice());
    check_header(path, reader.headers().map_err(|e| format_err(path, e.to_string()))?, &ATTAINMENT_HEADER)?;

    struct RawRow {
        line: usize,
        country: String,
        year_s: String,
        sex_s: String,
        age_s: String,
        numbers: Vec<Result<f64, String>>,
    }

    let mut raw_rows = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                raw_rows.push(RawRow {
                    line,
                    country: String::new(),
                    year_s: String::new(),
                    sex_s: String::new(),
                    age_s: String::new(),
                    numbers: vec![Err(format!("unreadable row: {e}"))],
                });
                continue;
            }
        };
        if row.len() != ATTAINMENT_HEADER.len() {
            raw_rows.push(RawRow {
                line,
                country: String::new(),
                year_s: String::new(),
                sex_s: String::new(),
                age_s: String::new(),
                numbers: vec![Err(format!(
                    "expected {} fields, got {}",
                    ATTAINMENT_HEADER.len(),
                    row.len()
                ))],
            });
            continue;
        }
        let numbers = (4..11)
            .map(|i| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| format!("field '{}' is not a number: '{}'", ATTAINMENT_HEADER[i], &row[i]))
            })
            .collect();
        raw_rows.push(RawRow {
            line,
            country: row[0].to_string(),
            year_s: row[1].to_string(),
            sex_s: row[2].to_string(),
            age_s: row[3].to_string(),
            numbers,
        });
    }

    // Percent-mode detection needs the whole file before building records.
    let percent_mode = raw_rows.iter().any(|r| {
        r.numbers.iter().take(5).any(|n| matches!(n, Ok(v) if *v > 1.5))
    });

    let mut records = Vec::new();
    let mut record_lines = Vec::new();
    let mut row_errors = Vec::new();
    let mut seen: BTreeMap<(String, i32, Sex, AgeGroup), usize> = BTreeMap::new();
    for raw_row in raw_rows {
        if let Some(Err(msg)) = raw_row.numbers.iter().find(|n| n.is_err()) {
            row_errors.push(RowError { line: raw_row.line, message: msg.clone() });
            continue;
        }
        let year: i32 = match raw_row.year_s.parse() {
            Ok(y) => y,
            Err(_) => {
                row_errors.push(RowError {
                    line: raw_row.line,
                    message: format!("year is not an integer: '{}'", raw_row.year_s),
                });
                continue;
            }
        };
        let sex: Sex = match raw_row.sex_s.parse() {
            Ok(s) => s,
            Err(msg) => {
                row_errors.push(RowError { line: raw_row.line, message: msg });
                continue;
            }
        };
        let age_group: AgeGroup = match raw_row.age_s.parse() {
            Ok(a) => a,
            Err(msg) => {
                row_errors.push(RowError { line: raw_row.line, message: msg });
                continue;
            }
        };
        let nums: Vec<f64> = raw_row.numbers.iter().map(|n| *n.as_ref().unwrap()).collect();
        let scale = if percent_mode { 0.01 } else { 1.0 };
        let record = AttainmentRecord {
            country: raw_row.country,
            year,
            sex,
            age_group,
            shares: [
                nums[0] * scale,
                nums[1] * scale,
                nums[2] * scale,
                nums[3] * scale,
                nums[4] * scale,
            ],
            dur_primary: nums[5],
            dur_secondary: nums[6],
        };
        if let Err(e) = record.validate() {
            row_errors.push(RowError { line: raw_row.line, message: e.to_string() });
            continue;
        }
        let key = (record.country.clone(), record.year, record.sex, record.age_group);
        if let Some(&first_line) = seen.get(&key) {
            row_errors.push(RowError {
                line: raw_row.line,
                message: format!(
                    "duplicate cell ({}, {}, {}, {}): first seen at line {first_line}",
                    key.0, key.1, key.2, key.3
                ),
            });
            continue;
        }
        seen.insert(key, raw_row.line);
        records.push(record);
        record_lines.push(raw_row.line);
    }

    let n_rows = records.len();
    Ok(ParseOutcome {
        dataset: Dataset {
            records,
            provenance: Provenance { path: path.display().to_string(), sha256, n_rows },
        },
        record_lines,
        row_errors,
        percent_mode,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("hex digest");
    }
    out
}

/// One row of the per-cell results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub country: String,
    pub year: i32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub params: GgParams,
    pub rss: f64,
    pub converged: bool,
    pub flags: FitFlags,
    pub mys: f64,
    pub gini: f64,
    pub mld: f64,
    pub theil: f64,
    pub ge2: f64,
}

impl ResultRow {
    pub fn key(&self) -> (String, i32, Sex, AgeGroup) {
        (self.country.clone(), self.year, self.sex, self.age_group)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

pub const RESULTS_HEADER: [&str; 15] = [
    "country",
    "year",
    "sex",
    "age_group",
    "a",
    "beta",
    "p",
    "rss",
    "converged",
    "flags",
    "mys",
    "gini",
    "mld",
    "theil",
    "ge2",
];

/// Write the results table, sorted by cell key, reals at 10 significant
/// digits.
pub fn write_results_csv(table: &ResultsTable, path: &Path) -> Result<(), DataIoError> {
    let mut rows: Vec<&ResultRow> = table.rows.iter().collect();
    rows.sort_by_key(|r| r.key());
    let mut out = String::new();
    out.push_str(&RESULTS_HEADER.join(","));
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.country,
            r.year,
            r.sex,
            r.age_group,
            fmt_sig(r.params.a()),
            fmt_sig(r.params.beta()),
            fmt_sig(r.params.p()),
            fmt_sig(r.rss),
            r.converged,
            r.flags,
            fmt_sig(r.mys),
            fmt_sig(r.gini),
            fmt_sig(r.mld),
            fmt_sig(r.theil),
            fmt_sig(r.ge2),
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// Read a results table back, rebuilding parameters and checking that the
/// stored mean is consistent with them (within serialization precision).
pub fn read_results_csv(path: &Path) -> Result<ResultsTable, DataIoError> {
    let raw = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_slice());
    check_header(path, reader.headers().map_err(|e| format_err(path, e.to_string()))?, &RESULTS_HEADER)?;
    let mut rows = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        if row.len() != RESULTS_HEADER.len() {
            return Err(format_err(path, format!("line {line}: expected 15 fields, got {}", row.len())));
        }
        let num = |i: usize| -> Result<f64, DataIoError> {
            row[i].parse::<f64>().map_err(|_| {
                format_err(path, format!("line {line}: field '{}' is not a number", RESULTS_HEADER[i]))
            })
        };
        let params = GgParams::new(num(4)?, num(5)?, num(6)?)
            .map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        let mys = num(10)?;
        let recomputed = params.mean();
        if (mys - recomputed).abs() > 1e-6 * recomputed.abs().max(1.0) {
            return Err(format_err(
                path,
                format!("line {line}: mys = {mys} inconsistent with parameters (mean = {recomputed})"),
            ));
        }
        rows.push(ResultRow {
            country: row[0].to_string(),
            year: row[1].parse().map_err(|_| format_err(path, format!("line {line}: bad year")))?,
            sex: row[2].parse().map_err(|e| format_err(path, format!("line {line}: {e}")))?,
            age_group: row[3]
                .parse()
                .map_err(|e| format_err(path, format!("line {line}: {e}")))?,
            params,
            rss: num(7)?,
            converged: row[8]
                .parse()
                .map_err(|_| format_err(path, format!("line {line}: bad converged flag")))?,
            flags: row[9].parse().map_err(|e| format_err(path, format!("line {line}: {e}")))?,
            mys,
            gini: num(11)?,
            mld: num(12)?,
            theil: num(13)?,
            ge2: num(14)?,
        });
    }
    Ok(ResultsTable { rows })
}

/// Region definition file: which cells belong to which group, with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub cell_id: String,
    pub group_id: String,
    pub weight: f64,
}

pub const GROUPS_HEADER: [&str; 3] = ["cell_id", "group_id", "weight"];

pub fn read_groups_csv(path: &Path) -> Result<Vec<GroupRow>, DataIoError> {
    let raw = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_slice());
    check_header(path, reader.headers().map_err(|e| format_err(path, e.to_string()))?, &GROUPS_HEADER)?;
    let mut rows = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        let weight: f64 = row[2]
            .parse()
            .map_err(|_| format_err(path, format!("line {line}: weight is not a number")))?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(format_err(path, format!("line {line}: weight {weight} must be nonnegative")));
        }
        rows.push(GroupRow { cell_id: row[0].to_string(), group_id: row[1].to_string(), weight });
    }
    if rows.is_empty() {
        return Err(format_err(path, "group file has no rows"));
    }
    Ok(rows)
}

/// One row of a goodness-of-fit quartile table (year-by-sex grouping).
#[derive(Debug, Clone, PartialEq)]
pub struct GofRow {
    pub sex: Sex,
    pub year: i32,
    pub quartiles: Quartiles,
}

pub fn write_gof_csv(rows: &[GofRow], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::from("sex,year,q1,median,q3,n\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.sex,
            r.year,
            fmt_sig(r.quartiles.q1),
            fmt_sig(r.quartiles.median),
            fmt_sig(r.quartiles.q3),
            r.quartiles.n
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// One point of a CDF/PDF curve grid. `pdf` is absent where the density is
/// singular (x = 0 with ap < 1), so emitted grids stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub series: String,
    pub year: i32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub x: f64,
    pub cdf: f64,
    pub pdf: Option<f64>,
}

pub fn write_curves_csv(rows: &[CurveRow], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::from("series,year,sex,age_group,x,cdf,pdf\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.series,
            r.year,
            r.sex,
            r.age_group,
            fmt_sig(r.x),
            fmt_sig(r.cdf),
            r.pdf.map(fmt_sig).unwrap_or_default()
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// One point of a Lorenz curve grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzRow {
    pub series: String,
    pub year: i32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub u: f64,
    pub lorenz: f64,
}

pub fn write_lorenz_csv(rows: &[LorenzRow], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::from("series,year,sex,age_group,u,lorenz\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.series,
            r.year,
            r.sex,
            r.age_group,
            fmt_sig(r.u),
            fmt_sig(r.lorenz)
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// One row of the regional aggregation table (one GE sensitivity per row).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub group: String,
    pub year: i32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub n_members: usize,
    pub mys: f64,
    pub gini: f64,
    pub theta: f64,
    pub ge_total: f64,
    pub ge_between: f64,
    pub ge_within: f64,
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), DataIoError> {
    let mut out =
        String::from("group,year,sex,age_group,n_members,mys,gini,theta,ge_total,ge_between,ge_within\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.group,
            r.year,
            r.sex,
            r.age_group,
            r.n_members,
            fmt_sig(r.mys),
            fmt_sig(r.gini),
            fmt_sig(r.theta),
            fmt_sig(r.ge_total),
            fmt_sig(r.ge_between),
            fmt_sig(r.ge_within)
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// One row of the year-over-year dominance report.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow {
    pub group: String,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub year: i32,
    pub prev_year: i32,
    pub dominates: bool,
    pub max_excess: f64,
}

pub fn write_dominance_csv(rows: &[DominanceRow], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::from("group,sex,age_group,year,prev_year,dominates,max_excess\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.group,
            r.sex,
            r.age_group,
            r.year,
            r.prev_year,
            r.dominates,
            fmt_sig(r.max_excess)
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_row_errors_csv(rows: &[RowError], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::from("line,message\n");
    for r in rows {
        let needs_quotes = r.message.contains(',') || r.message.contains('"');
        if needs_quotes {
            writeln!(out, "{},\"{}\"", r.line, r.message.replace('"', "\"\"")).expect("write");
        } else {
            writeln!(out, "{},{}", r.line, r.message).expect("write");
        }
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataIoError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(bytes).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Merge a durations file (country,year,dur_primary,dur_secondary) into an
/// attainment file that lacks the two duration columns. Rows without a
/// matching (country, year) are reported as errors; the merged file is
/// sorted by cell key.
pub fn join_durations(
    attainment_path: &Path,
    durations_path: &Path,
    out_path: &Path,
) -> Result<Vec<RowError>, DataIoError> {
    const BARE_HEADER: [&str; 9] = [
        "country",
        "year",
        "sex",
        "age_group",
        "share_ns",
        "share_p",
        "share_s",
        "share_ti",
        "share_tc",
    ];
    const DUR_HEADER: [&str; 4] = ["country", "year", "dur_primary", "dur_secondary"];

    let raw = fs::read(durations_path).map_err(|e| io_err(durations_path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_slice());
    check_header(
        durations_path,
        reader.headers().map_err(|e| format_err(durations_path, e.to_string()))?,
        &DUR_HEADER,
    )?;
    let mut durations: BTreeMap<(String, i32), (f64, f64)> = BTreeMap::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(durations_path, format!("line {line}: {e}")))?;
        let year: i32 = row[1]
            .parse()
            .map_err(|_| format_err(durations_path, format!("line {line}: bad year")))?;
        let dp: f64 = row[2]
            .parse()
            .map_err(|_| format_err(durations_path, format!("line {line}: bad dur_primary")))?;
        let ds: f64 = row[3]
            .parse()
            .map_err(|_| format_err(durations_path, format!("line {line}: bad dur_secondary")))?;
        durations.insert((row[0].to_string(), year), (dp, ds));
    }

    let raw = fs::read(attainment_path).map_err(|e| io_err(attainment_path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_slice());
    check_header(
        attainment_path,
        reader.headers().map_err(|e| format_err(attainment_path, e.to_string()))?,
        &BARE_HEADER,
    )?;
    // (country, year, sex, age_group, share fields, dur_primary, dur_secondary)
    type MergedRow = (String, i32, String, String, Vec<String>, f64, f64);
    let mut merged: Vec<MergedRow> = Vec::new();
    let mut errors = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| format_err(attainment_path, format!("line {line}: {e}")))?;
        let year: i32 = match row[1].parse() {
            Ok(y) => y,
            Err(_) => {
                errors.push(RowError { line, message: format!("bad year '{}'", &row[1]) });
                continue;
            }
        };
        let key = (row[0].to_string(), year);
        let Some(&(dp, ds)) = durations.get(&key) else {
            errors.push(RowError {
                line,
                message: format!("no durations for ({}, {})", key.0, key.1),
            });
            continue;
        };
        merged.push((
            row[0].to_string(),
            year,
            row[2].to_string(),
            row[3].to_string(),
            (4..9).map(|i| row[i].to_string()).collect(),
            dp,
            ds,
        ));
    }
    merged.sort_by(|a, b| (&a.0, a.1, &a.2, &a.3).cmp(&(&b.0, b.1, &b.2, &b.3)));

    let mut out = String::new();
    out.push_str(&ATTAINMENT_HEADER.join(","));
    out.push('\n');
    for (country, year, sex, age, shares, dp, ds) in merged {
        writeln!(
            out,
            "{country},{year},{sex},{age},{},{},{}",
            shares.join(","),
            fmt_sig(dp),
            fmt_sig(ds)
        )
        .expect("write to string");
    }
    write_atomic(out_path, out.as_bytes())?;
    Ok(errors)
}

/// Write an attainment dataset in the standard column order, sorted by key.
pub fn write_attainment_csv(records: &[AttainmentRecord], path: &Path) -> Result<(), DataIoError> {
    let mut sorted: Vec<&AttainmentRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.country.clone(), r.year, r.sex, r.age_group));
    let mut out = String::new();
    out.push_str(&ATTAINMENT_HEADER.join(","));
    out.push('\n');
    for r in sorted {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.country,
            r.year,
            r.sex,
            r.age_group,
            fmt_sig(r.shares[0]),
            fmt_sig(r.shares[1]),
            fmt_sig(r.shares[2]),
            fmt_sig(r.shares[3]),
            fmt_sig(r.shares[4]),
            fmt_sig(r.dur_primary),
            fmt_sig(r.dur_secondary)
        )
        .expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_groups_csv(rows: &[GroupRow], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::new();
    out.push_str(&GROUPS_HEADER.join(","));
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{}", r.cell_id, r.group_id, fmt_sig(r.weight)).expect("write");
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitter::FitFlags;
    use std::io::Write;

    fn tmpfile(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn fmt_sig_shapes() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(5.0), "5");
        assert_eq!(fmt_sig(0.04), "0.04");
        assert_eq!(fmt_sig(123.456), "123.456");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig(1.23456789012e-7), "1.23456789e-7");
        assert_eq!(fmt_sig(9.87654321e12), "9.87654321e12");
        assert_eq!(fmt_sig(-0.5), "-0.5");
    }

    #[test]
    fn fmt_sig_reparse_is_idempotent() {
        for &x in &[std::f64::consts::PI, 1e-15, 123456.789, 0.000123456789123, 2.0f64.sqrt() * 1e8]
        {
            let s1 = fmt_sig(x);
            let back: f64 = s1.parse().unwrap();
            let s2 = fmt_sig(back);
            assert_eq!(s1, s2, "not idempotent for {x}");
        }
    }

    #[test]
    fn parse_valid_row() {
        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,0.3,0.4,0.2,0.06,0.04,6,6\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert_eq!(outcome.dataset.records.len(), 1);
        assert!(outcome.row_errors.is_empty());
        assert!(!outcome.percent_mode);
        let r = &outcome.dataset.records[0];
        assert_eq!(r.country, "AAA");
        assert_eq!(r.shares[0], 0.3);
        assert_eq!(outcome.dataset.provenance.n_rows, 1);
        assert_eq!(outcome.dataset.provenance.sha256.len(), 64);
    }

    #[test]
    fn parse_detects_duplicates_naming_both_rows() {
        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,0.3,0.4,0.2,0.06,0.04,6,6\n\
             AAA,1970,total,15plus,0.3,0.4,0.2,0.06,0.04,6,6\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert_eq!(outcome.dataset.records.len(), 1);
        assert_eq!(outcome.row_errors.len(), 1);
        assert_eq!(outcome.row_errors[0].line, 3);
        assert!(outcome.row_errors[0].message.contains("line 2"));
    }

    #[test]
    fn parse_share_sum_rules() {
        // 0.5% deficit: rejected (exceeds the 1e-3 record invariant)
        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,0.2985,0.398,0.199,0.0597,0.0398,6,6\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert!(outcome.dataset.records.is_empty());
        assert_eq!(outcome.row_errors.len(), 1);

        // 0.05% deficit: accepted; renormalization happens in build_targets
        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,0.29985,0.3998,0.1999,0.05997,0.03998,6,6\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert_eq!(outcome.dataset.records.len(), 1);
        let targets = crate::fitter::build_targets(&outcome.dataset.records[0]).unwrap();
        assert!(targets.flags.renormalized_input);
    }

    #[test]
    fn parse_percent_mode() {
        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,30,40,20,6,4,6,6\n\
             BBB,1970,total,15plus,10,50,30,6,4,5,7\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert!(outcome.percent_mode);
        assert_eq!(outcome.dataset.records.len(), 2);
        assert!((outcome.dataset.records[0].shares[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn parse_rejects_bad_header_and_durations() {
        let f = tmpfile("country,year\nAAA,1970\n");
        assert!(matches!(parse_attainment_csv(f.path()), Err(DataIoError::Format { .. })));

        let f = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc,dur_primary,dur_secondary\n\
             AAA,1970,total,15plus,0.3,0.4,0.2,0.06,0.04,2,6\n",
        );
        let outcome = parse_attainment_csv(f.path()).unwrap();
        assert_eq!(outcome.row_errors.len(), 1);
        assert!(outcome.row_errors[0].message.contains("dur_primary"));
    }

    #[test]
    fn results_round_trip() {
        let params = GgParams::new(1.3, 5.5, 2.1).unwrap();
        let table = ResultsTable {
            rows: vec![
                ResultRow {
                    country: "BBB".into(),
                    year: 1980,
                    sex: Sex::Male,
                    age_group: AgeGroup::Over15,
                    params,
                    rss: 1.5e-9,
                    converged: true,
                    flags: FitFlags { renormalized_input: true, ..Default::default() },
                    mys: params.mean(),
                    gini: params.gini(),
                    mld: params.mld(),
                    theil: params.theil(),
                    ge2: params.ge2(),
                },
                ResultRow {
                    country: "AAA".into(),
                    year: 1970,
                    sex: Sex::Total,
                    age_group: AgeGroup::Over15,
                    params,
                    rss: 0.0,
                    converged: true,
                    flags: FitFlags::default(),
                    mys: params.mean(),
                    gini: params.gini(),
                    mld: params.mld(),
                    theil: params.theil(),
                    ge2: params.ge2(),
                },
            ],
        };
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_results_csv(&table, tmp.path()).unwrap();
        let text = std::fs::read_to_string(tmp.path()).unwrap();
        // Sorted: AAA before BBB
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("AAA,1970"));
        assert!(lines[2].starts_with("BBB,1980"));
        assert!(lines[2].contains("renormalized_input"));
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));

        let back = read_results_csv(tmp.path()).unwrap();
        assert_eq!(back.rows.len(), 2);
        // Write → parse → write reproduces values to 10 significant digits
        let tmp2 = tempfile::NamedTempFile::new().unwrap();
        write_results_csv(&back, tmp2.path()).unwrap();
        assert_eq!(std::fs::read(tmp.path()).unwrap(), std::fs::read(tmp2.path()).unwrap());
    }

    #[test]
    fn read_results_rejects_inconsistent_mys() {
        let f = tmpfile(
            "country,year,sex,age_group,a,beta,p,rss,converged,flags,mys,gini,mld,theil,ge2\n\
             AAA,1970,total,15plus,1,5,1,0,true,,9.9,0.5,0.577,0.423,0.5\n",
        );
        assert!(read_results_csv(f.path()).is_err());
    }

    #[test]
    fn empty_results_table_writes_header_only() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_results_csv(&ResultsTable::default(), tmp.path()).unwrap();
        let text = std::fs::read_to_string(tmp.path()).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn groups_round_trip_and_validation() {
        let f = tmpfile("cell_id,group_id,weight\nAAA,world,0.6\nBBB,world,0.4\n");
        let rows = read_groups_csv(f.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].group_id, "world");

        let f = tmpfile("cell_id,group_id,weight\nAAA,world,-1\n");
        assert!(read_groups_csv(f.path()).is_err());
    }

    #[test]
    fn join_durations_merges_and_reports_missing() {
        let attainment = tmpfile(
            "country,year,sex,age_group,share_ns,share_p,share_s,share_ti,share_tc\n\
             BBB,1970,total,15plus,0.1,0.5,0.3,0.06,0.04\n\
             AAA,1970,total,15plus,0.3,0.4,0.2,0.06,0.04\n\
             CCC,1970,total,15plus,0.3,0.4,0.2,0.06,0.04\n",
        );
        let durations = tmpfile(
            "country,year,dur_primary,dur_secondary\nAAA,1970,6,6\nBBB,1970,5,7\n",
        );
        let out = tempfile::NamedTempFile::new().unwrap();
        let errors = join_durations(attainment.path(), durations.path(), out.path()).unwrap();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].message.contains("CCC"));
        let outcome = parse_attainment_csv(out.path()).unwrap();
        assert_eq!(outcome.dataset.records.len(), 2);
        assert_eq!(outcome.dataset.records[0].country, "AAA");
        assert_eq!(outcome.dataset.records[1].dur_primary, 5.0);
    }
}
