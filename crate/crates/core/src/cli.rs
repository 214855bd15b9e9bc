//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::runner::{compare, run_scenario, ScenarioConfig, ScenarioResult};
use crate::stats::FiveNumber;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Log verbosity, e.g. `EDGETRAIN_LOG=debug`.
pub const LOG_ENV: &str = "EDGETRAIN_LOG";

#[derive(Debug, Parser)]
#[command(name = "edgetrain", version, about = "Edge vs cloud serverless training benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a scenario and write result.json and result.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces both the scenario seed and the split seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a proposed scenario result (first) against a baseline (second).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "comparison.json")]
        out: PathBuf,
    },
    /// Emit box-plot quantiles for one or more results.
    Plotdata {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG box plot next to the CSV.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
        } => cmd_run(&config, seed, reps, &out),
        Command::Compare { a, b, out } => cmd_compare(&a, &b, &out),
        Command::Plotdata { results, out, svg } => cmd_plotdata(&results, &out, svg),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn read_result(path: &Path) -> CliResult<ScenarioResult> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    ScenarioResult::from_json(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn cmd_run(config_path: &Path, seed: Option<u64>, reps: Option<usize>, out_dir: &Path) -> CliResult<()> {
    let mut config = ScenarioConfig::load(config_path).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = seed {
        config.seed = seed;
        config.split.seed = seed;
    }
    if let Some(reps) = reps {
        config.repetitions = reps;
    }
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let result = run_scenario(&config).map_err(|e| CliError::Runtime(e.to_string()))?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("creating {}: {e}", out_dir.display())))?;
    write_file(&out_dir.join("result.json"), &result.to_json())?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out_dir.join("result.csv"), &csv)?;
    print!("{}", summary_block(&result));
    Ok(())
}

pub fn summary_block(result: &ScenarioResult) -> String {
    let s = &result.summary;
    let e = &s.elapsed_seconds;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", result.config.name);
    let _ = writeln!(out, "repetitions: {} ({} failed)", result.repetitions.len(), s.failed_repetitions);
    let _ = writeln!(
        out,
        "response time [s]: median {:.4}  mean {:.4}  min {:.4}  max {:.4}  iqr {:.4}",
        e.median, e.mean, e.min, e.max, e.iqr
    );
    match &s.final_accuracy {
        Some(a) => {
            let _ = writeln!(
                out,
                "final accuracy: median {:.4}  mean {:.4}  min {:.4}  max {:.4}",
                a.median, a.mean, a.min, a.max
            );
        }
        None => {
            let _ = writeln!(out, "final accuracy: n/a");
        }
    }
    out
}

pub fn cmd_compare(a: &Path, b: &Path, out: &Path) -> CliResult<()> {
    let ra = read_result(a)?;
    let rb = read_result(b)?;
    let report = compare(&ra, &rb).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(out, &serde_json::to_vec_pretty(&report).expect("report serializes"))?;
    println!("{} vs {}", report.scenario_a, report.scenario_b);
    println!("response time reduction: {:.1}%", report.median_response_reduction_pct);
    println!("accuracy delta: {:+.2} pp", report.median_accuracy_delta_pp);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantileRow {
    pub scenario: String,
    pub metric: &'static str,
    pub stats: FiveNumber,
}

pub fn quantile_rows(results: &[ScenarioResult]) -> Vec<QuantileRow> {
    let mut rows = Vec::new();
    for r in results {
        for (metric, values) in [("response_time_s", r.elapsed()), ("accuracy", r.accuracies())] {
            if let Some(stats) = FiveNumber::of(&values) {
                rows.push(QuantileRow {
                    scenario: r.config.name.clone(),
                    metric,
                    stats,
                });
            }
        }
    }
    rows
}

pub fn cmd_plotdata(paths: &[PathBuf], out: &Path, svg: bool) -> CliResult<()> {
    let results = paths.iter().map(|p| read_result(p)).collect::<CliResult<Vec<_>>>()?;
    let rows = quantile_rows(&results);

    let mut w = csv::Writer::from_writer(Vec::new());
    let runtime = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["scenario", "metric", "min", "q1", "median", "q3", "max"])
        .map_err(runtime)?;
    for row in &rows {
        let s = row.stats;
        w.write_record([
            row.scenario.clone(),
            row.metric.to_owned(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])
        .map_err(runtime)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(out, &bytes)?;
    if svg {
        write_file(&out.with_extension("svg"), render_svg(&rows).as_bytes())?;
    }
    Ok(())
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 40.0;

/// Box plots, one panel per metric, one box per scenario.
pub fn render_svg(rows: &[QuantileRow]) -> String {
    let metrics: Vec<&str> = ["response_time_s", "accuracy"]
        .into_iter()
        .filter(|m| rows.iter().any(|r| r.metric == *m))
        .collect();
    let width = PANEL_W * metrics.len().max(1) as f64;
    let height = PANEL_H + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (p, metric) in metrics.iter().enumerate() {
        let panel: Vec<&QuantileRow> = rows.iter().filter(|r| r.metric == *metric).collect();
        let lo = panel.iter().map(|r| r.stats.min).fold(f64::INFINITY, f64::min);
        let hi = panel.iter().map(|r| r.stats.max).fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { (hi - lo) * 0.05 } else { lo.abs().max(1e-3) * 0.05 };
        let (lo, hi) = (lo - pad, hi + pad);
        let y = |v: f64| MARGIN + (hi - v) / (hi - lo) * PANEL_H;
        let x0 = p as f64 * PANEL_W + MARGIN;
        let slot = (PANEL_W - 1.5 * MARGIN) / panel.len() as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{metric}</text>"#,
            x0 + (PANEL_W - 1.5 * MARGIN) / 2.0,
            MARGIN / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.4}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{:.4}</text>"#,
            x0 - 4.0,
            y(hi) + 4.0,
            hi,
            x0 - 4.0,
            y(lo),
            lo
        );
        for (i, row) in panel.iter().enumerate() {
            let s = row.stats;
            let cx = x0 + slot * (i as f64 + 0.5);
            let half = slot * 0.25;
            let _ = writeln!(
                svg,
                concat!(
                    r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                    r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
                    r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#
                ),
                y(s.max),
                y(s.min),
                cx - half,
                y(s.q3),
                2.0 * half,
                (y(s.q1) - y(s.q3)).max(0.5),
                cx - half,
                y(s.median),
                cx + half,
                y(s.median),
                MARGIN + PANEL_H + 16.0,
                escape(&row.scenario),
                cx = cx,
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
