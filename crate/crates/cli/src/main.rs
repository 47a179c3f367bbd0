//! Batch front door for the continuous attainment pipeline: fit cells,
//! summarize goodness of fit, aggregate regions, and emit the CDF/PDF and
//! Lorenz grids behind the global figures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use edugamma::dataio::{
    self, AggregateRow, CurveRow, DominanceRow, GofRow, GroupRow, LorenzRow, ResultRow,
    ResultsTable, RowError,
};
use edugamma::demo;
use edugamma::fitter::{self, AgeGroup, Sex};
use edugamma::mixture::Region;

mod config;

use config::CliConfig;

/// Exit with this code when some rows were rejected but the run produced
/// usable output.
const EXIT_PARTIAL: u8 = 1;
/// Exit with this code when the input was unusable.
const EXIT_UNUSABLE: u8 = 2;

#[derive(Parser)]
#[command(name = "edugamma", version, about = "Continuous educational attainment estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a generalized gamma distribution to every cell of an attainment CSV.
    Fit(FitArgs),
    /// Quartiles of residual sum of squares by year and sex.
    Gof(GofArgs),
    /// Population-weighted regional aggregates with GE decomposition.
    Aggregate(AggregateArgs),
    /// Mixture CDF/PDF grids and the year-over-year dominance report.
    Curves(CurvesArgs),
    /// Lorenz curve grids for cells or groups.
    Lorenz(LorenzArgs),
    /// Merge a durations file into an attainment file that lacks durations.
    JoinDurations(JoinDurationsArgs),
    /// Write the bundled synthetic demo dataset.
    Demo(DemoArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Attainment CSV (country,year,sex,age_group,share_*,dur_*).
    input: PathBuf,
    /// Output results CSV.
    #[arg(short, long)]
    out: PathBuf,
    /// key=value config file overriding fit settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for the batch (overrides EDUGAMMA_THREADS and config).
    #[arg(long)]
    threads: Option<usize>,
    /// Where to write the per-row error report (default: <out>.errors.csv).
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Args)]
struct GofArgs {
    /// Results CSV produced by `fit`.
    results: PathBuf,
    /// Optional output CSV; the table is always printed.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Results CSV produced by `fit`.
    results: PathBuf,
    /// Group definitions (cell_id,group_id,weight).
    groups: PathBuf,
    /// Output CSV.
    #[arg(short, long)]
    out: PathBuf,
    /// Comma-separated GE sensitivities.
    #[arg(long, default_value = "0,1,2")]
    theta: String,
}

#[derive(Args)]
struct CurvesArgs {
    /// Results CSV produced by `fit`.
    results: PathBuf,
    /// Group definitions (cell_id,group_id,weight).
    groups: PathBuf,
    /// Output CSV for the CDF/PDF grid.
    #[arg(short, long)]
    out: PathBuf,
    /// key=value config file overriding grid settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Upper end of the years-of-schooling grid.
    #[arg(long)]
    x_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Where to write the dominance report (default: <out stem>_dominance.csv).
    #[arg(long)]
    dominance_out: Option<PathBuf>,
}

#[derive(Args)]
struct LorenzArgs {
    /// Results CSV produced by `fit`.
    results: PathBuf,
    /// Optional group definitions; without them, one curve per cell.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Output CSV.
    #[arg(short, long)]
    out: PathBuf,
    /// key=value config file overriding grid settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of grid points on [0, 1].
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct JoinDurationsArgs {
    /// Attainment CSV without duration columns.
    attainment: PathBuf,
    /// Durations CSV (country,year,dur_primary,dur_secondary).
    durations: PathBuf,
    /// Merged output CSV.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    /// Directory for demo_attainment.csv and demo_groups.csv.
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Gof(args) => cmd_gof(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Curves(args) => cmd_curves(args),
        Command::Lorenz(args) => cmd_lorenz(args),
        Command::JoinDurations(args) => cmd_join_durations(args),
        Command::Demo(args) => cmd_demo(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_UNUSABLE)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<CliConfig> {
    match path {
        Some(p) => CliConfig::from_file(p),
        None => Ok(CliConfig::default()),
    }
}

/// Thread-count resolution: flag, then EDUGAMMA_THREADS, then config file.
fn resolve_threads(flag: Option<usize>, config: &CliConfig) -> Result<Option<usize>> {
    if let Some(n) = flag {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        return Ok(Some(n));
    }
    if let Ok(raw) = std::env::var("EDUGAMMA_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .with_context(|| format!("EDUGAMMA_THREADS must be an integer >= 1, got '{raw}'"))?;
        if n == 0 {
            bail!("EDUGAMMA_THREADS must be at least 1");
        }
        return Ok(Some(n));
    }
    Ok(config.threads)
}

fn cmd_fit(args: FitArgs) -> Result<u8> {
    let config = load_config(args.config.as_deref())?;
    let threads = resolve_threads(args.threads, &config)?;
    let fit_config = config.fit_config();

    let parsed = dataio::parse_attainment_csv(&args.input)?;
    if parsed.percent_mode {
        eprintln!("warning: shares above 1.5 found; interpreting the whole file as percentages");
    }
    let records = parsed.dataset.records;
    let record_lines = parsed.record_lines;
    let mut row_errors = parsed.row_errors;
    let n_input_rows = records.len() + row_errors.len();
    if records.is_empty() {
        if !row_errors.is_empty() {
            write_error_report(&args.out, args.errors.as_deref(), &row_errors)?;
        }
        eprintln!("error: no usable records in {} ({} rows rejected)", args.input.display(), row_errors.len());
        return Ok(EXIT_UNUSABLE);
    }

    let outcomes = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            pool.install(|| fitter::fit_all(&records, &fit_config))
        }
        None => fitter::fit_all(&records, &fit_config),
    };

    let mut table = ResultsTable::default();
    let mut n_flagged = 0usize;
    let mut rss_values = Vec::new();
    for ((record, outcome), line) in records.iter().zip(outcomes).zip(&record_lines) {
        match outcome {
            Ok(fit) => {
                if !fit.flags.is_empty() {
                    n_flagged += 1;
                }
                rss_values.push(fit.rss);
                table.rows.push(ResultRow {
                    country: record.country.clone(),
                    year: record.year,
                    sex: record.sex,
                    age_group: record.age_group,
                    params: fit.params,
                    rss: fit.rss,
                    converged: fit.converged,
                    flags: fit.flags,
                    mys: fit.params.mean(),
                    gini: fit.params.gini(),
                    mld: fit.params.mld(),
                    theil: fit.params.theil(),
                    ge2: fit.params.ge2(),
                });
            }
            Err(e) => row_errors.push(RowError { line: *line, message: e.to_string() }),
        }
    }

    if table.rows.is_empty() {
        write_error_report(&args.out, args.errors.as_deref(), &row_errors)?;
        eprintln!("error: every record failed; see the error report");
        return Ok(EXIT_UNUSABLE);
    }
    dataio::write_results_csv(&table, &args.out)?;

    println!("input rows:  {n_input_rows}");
    println!("fitted:      {}", table.rows.len());
    println!("flagged:     {n_flagged}");
    println!("rejected:    {}", row_errors.len());
    if let Ok(q) = fitter::quartiles(&rss_values) {
        println!(
            "rss quartiles: q1={} median={} q3={}",
            dataio::fmt_sig(q.q1),
            dataio::fmt_sig(q.median),
            dataio::fmt_sig(q.q3)
        );
    }
    println!("results written to {}", args.out.display());

    if row_errors.is_empty() {
        Ok(0)
    } else {
        let report = write_error_report(&args.out, args.errors.as_deref(), &row_errors)?;
        println!("error report written to {}", report.display());
        Ok(EXIT_PARTIAL)
    }
}

fn write_error_report(
    out: &Path,
    explicit: Option<&Path>,
    errors: &[RowError],
) -> Result<PathBuf> {
    let mut sorted = errors.to_vec();
    sorted.sort_by_key(|e| e.line);
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let mut s = out.as_os_str().to_owned();
            s.push(".errors.csv");
            PathBuf::from(s)
        }
    };
    dataio::write_row_errors_csv(&sorted, &path)?;
    Ok(path)
}

fn cmd_gof(args: GofArgs) -> Result<u8> {
    let table = dataio::read_results_csv(&args.results)?;
    if table.rows.is_empty() {
        eprintln!("error: results file has no rows");
        return Ok(EXIT_UNUSABLE);
    }
    let grouped =
        fitter::gof_quartiles(table.rows.iter().map(|r| ((r.sex, r.year), r.rss)));
    let rows: Vec<GofRow> = grouped
        .into_iter()
        .map(|((sex, year), quartiles)| GofRow { sex, year, quartiles })
        .collect();
    println!("sex      year  q1            median        q3            n");
    for r in &rows {
        println!(
            "{:<8} {:<5} {:<13} {:<13} {:<13} {}",
            r.sex.to_string(),
            r.year,
            dataio::fmt_sig(r.quartiles.q1),
            dataio::fmt_sig(r.quartiles.median),
            dataio::fmt_sig(r.quartiles.q3),
            r.quartiles.n
        );
    }
    if let Some(out) = &args.out {
        dataio::write_gof_csv(&rows, out)?;
        println!("table written to {}", out.display());
    }
    Ok(0)
}

type SliceKey = (String, i32, Sex, AgeGroup);

/// Build one region per (group, year, sex, age_group) slice from the fitted
/// cells of the member countries. Weights are renormalized within each
/// slice over the members actually present.
fn build_regions(table: &ResultsTable, groups: &[GroupRow]) -> BTreeMap<SliceKey, Region> {
    let mut group_members: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for g in groups {
        group_members
            .entry(g.group_id.clone())
            .or_default()
            .insert(g.cell_id.clone(), g.weight);
    }
    let mut collected: BTreeMap<SliceKey, Vec<(String, edugamma::GgParams, f64)>> =
        BTreeMap::new();
    for row in &table.rows {
        for (group_id, members) in &group_members {
            if let Some(&weight) = members.get(&row.country) {
                collected
                    .entry((group_id.clone(), row.year, row.sex, row.age_group))
                    .or_default()
                    .push((row.country.clone(), row.params, weight));
            }
        }
    }
    collected
        .into_iter()
        .filter_map(|(key, mut members)| {
            members.sort_by(|a, b| a.0.cmp(&b.0));
            Region::new(members).ok().map(|region| (key, region))
        })
        .collect()
}

fn parse_theta_list(raw: &str) -> Result<Vec<f64>> {
    let thetas: Result<Vec<f64>, _> =
        raw.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let thetas = thetas.with_context(|| format!("bad theta list '{raw}'"))?;
    if thetas.is_empty() {
        bail!("theta list is empty");
    }
    Ok(thetas)
}

fn cmd_aggregate(args: AggregateArgs) -> Result<u8> {
    let table = dataio::read_results_csv(&args.results)?;
    let groups = dataio::read_groups_csv(&args.groups)?;
    let thetas = parse_theta_list(&args.theta)?;
    let regions = build_regions(&table, &groups);
    if regions.is_empty() {
        eprintln!("error: no group slice matched any fitted cell");
        return Ok(EXIT_UNUSABLE);
    }
    let mut rows = Vec::new();
    for ((group, year, sex, age_group), region) in &regions {
        let mys = region.mean();
        let gini = region.gini().context("regional Gini")?;
        for &theta in &thetas {
            let d = region.ge_decompose(theta).with_context(|| {
                format!("GE({theta}) for group {group}, {year}, {sex}, {age_group}")
            })?;
            rows.push(AggregateRow {
                group: group.clone(),
                year: *year,
                sex: *sex,
                age_group: *age_group,
                n_members: region.members().len(),
                mys,
                gini,
                theta,
                ge_total: d.total,
                ge_between: d.between,
                ge_within: d.within,
            });
        }
    }
    dataio::write_aggregate_csv(&rows, &args.out)?;
    println!("{} aggregate rows written to {}", rows.len(), args.out.display());
    Ok(0)
}

fn cmd_curves(args: CurvesArgs) -> Result<u8> {
    let config = load_config(args.config.as_deref())?;
    let x_max = args.x_max.unwrap_or(config.curves_x_max);
    let points = args.points.unwrap_or(config.curves_points);
    if !x_max.is_finite() || x_max <= 0.0 || points < 2 {
        bail!("curve grid needs a positive finite x_max and at least 2 points");
    }
    let table = dataio::read_results_csv(&args.results)?;
    let groups = dataio::read_groups_csv(&args.groups)?;
    let regions = build_regions(&table, &groups);
    if regions.is_empty() {
        eprintln!("error: no group slice matched any fitted cell");
        return Ok(EXIT_UNUSABLE);
    }

    let mut rows = Vec::new();
    for ((group, year, sex, age_group), region) in &regions {
        for i in 0..points {
            let x = x_max * i as f64 / (points - 1) as f64;
            let cdf = region.cdf(x).context("mixture CDF")?;
            let pdf = region.pdf(x).ok();
            rows.push(CurveRow {
                series: group.clone(),
                year: *year,
                sex: *sex,
                age_group: *age_group,
                x,
                cdf,
                pdf,
            });
        }
    }
    dataio::write_curves_csv(&rows, &args.out)?;

    // Dominance of each year over the preceding one, per group/sex/age.
    type YearSeries<'a> = Vec<(i32, &'a Region)>;
    let mut by_series: BTreeMap<(String, Sex, AgeGroup), YearSeries> = BTreeMap::new();
    for ((group, year, sex, age_group), region) in &regions {
        by_series.entry((group.clone(), *sex, *age_group)).or_default().push((*year, region));
    }
    let mut dominance = Vec::new();
    for ((group, sex, age_group), mut series) in by_series {
        series.sort_by_key(|(year, _)| *year);
        for pair in series.windows(2) {
            let (prev_year, earlier) = pair[0];
            let (year, later) = pair[1];
            let report = later.first_order_dominates(earlier, x_max, 2001)?;
            dominance.push(DominanceRow {
                group: group.clone(),
                sex,
                age_group,
                year,
                prev_year,
                dominates: report.dominates,
                max_excess: report.max_excess.max(0.0),
            });
        }
    }
    let dominance_path = match &args.dominance_out {
        Some(p) => p.clone(),
        None => args.out.with_file_name(format!(
            "{}_dominance.csv",
            args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        )),
    };
    dataio::write_dominance_csv(&dominance, &dominance_path)?;
    for d in &dominance {
        println!(
            "{} {} {}: {} over {}: {}",
            d.group,
            d.sex,
            d.age_group,
            d.year,
            d.prev_year,
            if d.dominates { "dominates" } else { "no dominance" }
        );
    }
    println!("curve grid written to {}", args.out.display());
    println!("dominance report written to {}", dominance_path.display());
    Ok(0)
}

fn cmd_lorenz(args: LorenzArgs) -> Result<u8> {
    let config = load_config(args.config.as_deref())?;
    let points = args.points.unwrap_or(config.lorenz_points);
    if points < 2 {
        bail!("lorenz grid needs at least 2 points");
    }
    let table = dataio::read_results_csv(&args.results)?;
    if table.rows.is_empty() {
        eprintln!("error: results file has no rows");
        return Ok(EXIT_UNUSABLE);
    }
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut rows = Vec::new();
    match &args.groups {
        Some(groups_path) => {
            let groups = dataio::read_groups_csv(groups_path)?;
            let regions = build_regions(&table, &groups);
            if regions.is_empty() {
                eprintln!("error: no group slice matched any fitted cell");
                return Ok(EXIT_UNUSABLE);
            }
            for ((group, year, sex, age_group), region) in &regions {
                for &u in &grid {
                    rows.push(LorenzRow {
                        series: group.clone(),
                        year: *year,
                        sex: *sex,
                        age_group: *age_group,
                        u,
                        lorenz: region.lorenz(u).context("mixture Lorenz")?,
                    });
                }
            }
        }
        None => {
            for row in &table.rows {
                for &u in &grid {
                    rows.push(LorenzRow {
                        series: row.country.clone(),
                        year: row.year,
                        sex: row.sex,
                        age_group: row.age_group,
                        u,
                        lorenz: row.params.lorenz(u).context("cell Lorenz")?,
                    });
                }
            }
        }
    }
    dataio::write_lorenz_csv(&rows, &args.out)?;
    println!("{} lorenz rows written to {}", rows.len(), args.out.display());
    Ok(0)
}

fn cmd_join_durations(args: JoinDurationsArgs) -> Result<u8> {
    let errors = dataio::join_durations(&args.attainment, &args.durations, &args.out)?;
    println!("merged file written to {}", args.out.display());
    if errors.is_empty() {
        return Ok(0);
    }
    for e in &errors {
        eprintln!("line {}: {}", e.line, e.message);
    }
    eprintln!("{} rows could not be merged", errors.len());
    Ok(EXIT_PARTIAL)
}

fn cmd_demo(args: DemoArgs) -> Result<u8> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let attainment = args.out_dir.join("demo_attainment.csv");
    let groups = args.out_dir.join("demo_groups.csv");
    dataio::write_attainment_csv(&demo::demo_records(), &attainment)?;
    dataio::write_groups_csv(&demo::demo_groups(), &groups)?;
    println!("demo attainment written to {}", attainment.display());
    println!("demo groups written to {}", groups.display());
    Ok(0)
}
