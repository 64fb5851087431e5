//! Command-line front end: thin shims over the library pipeline.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical failure,
//! 4 selfcheck failure. Errors are written to stderr as single-line JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use npjive::error::{Error, Result};
use npjive::grouped::{CsvOptions, GroupedSample};
use npjive::oracle::{identity_report, OracleModel};
use npjive::selfcheck::selfcheck;
use npjive::study::{run_figure, run_study, EstimateConfig, FigureConfig, StudyConfig};
use npjive::svg::line_chart;

#[derive(Parser)]
#[command(name = "npjive", version, about = "Debiased IV estimation with many weak discrete instruments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo study from a JSON config and emit the summary.
    Simulate {
        config: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Directory for metric-vs-K SVG charts.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also write the per-replication table to this path.
        #[arg(long)]
        reps_out: Option<PathBuf>,
    },
    /// Estimate the functional on a grouped CSV dataset.
    Estimate {
        /// Grouped observations: columns z,x1..xd,y.
        #[arg(long)]
        data: PathBuf,
        /// Target treatment sample: columns x1..xd.
        #[arg(long)]
        target: PathBuf,
        /// Estimation config JSON (basis, lambda policy, estimators, ...).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Solve a discrete oracle model and report its identity checks.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Sweep (K, n) pairs and emit a combined metrics table.
    Figure {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the invariant battery; exits 4 on any failure.
    Selfcheck,
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&raw)?)
}

fn load_target_csv(path: &Path) -> Result<(Vec<f64>, usize)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut x_idx = Vec::new();
    loop {
        let name = format!("x{}", x_idx.len() + 1);
        match headers.iter().position(|h| h == name) {
            Some(i) => x_idx.push(i),
            None => break,
        }
    }
    if x_idx.is_empty() {
        return Err(Error::MissingColumn("x1".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record?;
        rows += 1;
        for (j, &idx) in x_idx.iter().enumerate() {
            let raw = record.get(idx).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::NonNumericValue {
                row: rows,
                column: format!("x{}", j + 1),
            })?;
            values.push(v);
        }
    }
    if rows == 0 {
        return Err(Error::EmptyFile);
    }
    Ok((values, x_idx.len()))
}

fn emit_study_svgs(dir: &Path, output: &npjive::study::FigureOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sizes: Vec<usize> = output
        .cells
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.n))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    for metric in ["abs_bias", "se", "rmse", "coverage"] {
        for &n in &sizes {
            let series = output.chart_series(metric, n);
            if series.is_empty() {
                continue;
            }
            let svg = line_chart(&format!("{metric} (n = {n})"), "K", metric, &series);
            fs::write(dir.join(format!("{metric}_n{n}.svg")), svg)?;
        }
    }
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    out: &Option<PathBuf>,
    format: Format,
    svg: &Option<PathBuf>,
    reps_out: &Option<PathBuf>,
) -> Result<()> {
    let mut cfg: StudyConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let output = run_study(&cfg)?;
    let rendered = match format {
        Format::Csv => output.summary.to_csv(),
        Format::Json => serde_json::to_string_pretty(&output.summary)? + "\n",
    };
    write_output(out, &rendered)?;
    if let Some(path) = reps_out {
        fs::write(path, output.rep_table_csv())?;
    }
    if let Some(dir) = svg {
        let fig = npjive::study::FigureOutput { cells: vec![output.summary.clone()] };
        emit_study_svgs(dir, &fig)?;
    }
    Ok(())
}

fn cmd_estimate(
    data: &Path,
    target: &Path,
    config: &Path,
    seed: Option<u64>,
    out: &Option<PathBuf>,
    format: Format,
) -> Result<()> {
    let mut cfg: EstimateConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sample = GroupedSample::load_csv(data, &CsvOptions::default())?;
    let label_map = sample.label_map_json();
    let (target_x, d) = load_target_csv(target)?;
    if d != sample.d {
        return Err(Error::DimensionMismatch(format!(
            "data has {} treatment columns, target has {d}",
            sample.d
        )));
    }
    let results = npjive::study::estimate_dataset(sample, &target_x, d, &cfg)?;
    let any_ok = results.iter().any(|(_, r)| r.is_ok());
    let rendered = match format {
        Format::Json => {
            let entries: Vec<serde_json::Value> = results
                .iter()
                .map(|(est, res)| match res {
                    Ok(report) => serde_json::json!({
                        "estimator": est.label(),
                        "report": report,
                    }),
                    Err(e) => serde_json::json!({"estimator": est.label(), "error": e}),
                })
                .collect();
            let doc = serde_json::json!({
                "reports": entries,
                "label_map": serde_json::from_str::<serde_json::Value>(&label_map)?,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut s =
                String::from(npjive::estimators::EstimateReport::csv_header().to_string() + "\n");
            for (est, res) in &results {
                match res {
                    Ok(r) => {
                        let mut line = r.to_csv_line();
                        // Replace the kind with the mode-qualified label.
                        line = line.replacen(r.estimator.as_str(), &est.label(), 1);
                        s.push_str(&line);
                        s.push('\n');
                    }
                    Err(e) => s.push_str(&format!("{},,,,,,\"{}\"\n", est.label(), e.replace('"', "'"))),
                }
            }
            s
        }
    };
    write_output(out, &rendered)?;
    if !any_ok {
        return Err(Error::InsufficientData("every estimator arm failed".into()));
    }
    Ok(())
}

fn cmd_oracle(model: &Path, out: &Option<PathBuf>, format: Format) -> Result<()> {
    let model: OracleModel = read_json(model)?;
    let solution = model.solve()?;
    let identities = identity_report(&model)?;
    let rendered = match format {
        Format::Json => {
            let doc = serde_json::json!({"solution": solution, "identities": identities});
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("key,value\n");
            let doc = serde_json::json!({"solution": solution, "identities": identities});
            flatten_json("", &doc, &mut s);
            s
        }
    };
    write_output(out, &rendered)
}

fn flatten_json(prefix: &str, value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_json(&format!("{prefix}[{i}]"), v, out);
            }
        }
        other => {
            out.push_str(&format!("{prefix},{other}\n"));
        }
    }
}

fn cmd_figure(
    config: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    out: &Option<PathBuf>,
    format: Format,
    svg: &Option<PathBuf>,
) -> Result<()> {
    let mut cfg: FigureConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.base.base_seed = s;
    }
    if let Some(w) = workers {
        cfg.base.workers = w;
    }
    let output = run_figure(&cfg)?;
    let rendered = match format {
        Format::Csv => output.to_csv(),
        Format::Json => serde_json::to_string_pretty(&output)? + "\n",
    };
    write_output(out, &rendered)?;
    if let Some(dir) = svg {
        emit_study_svgs(dir, &output)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { config, seed, workers, out, format, svg, reps_out } => {
            cmd_simulate(&config, seed, workers, &out, format, &svg, &reps_out)?;
            Ok(0)
        }
        Command::Estimate { data, target, config, seed, out, format } => {
            cmd_estimate(&data, &target, &config, seed, &out, format)?;
            Ok(0)
        }
        Command::Oracle { model, out, format } => {
            cmd_oracle(&model, &out, format)?;
            Ok(0)
        }
        Command::Figure { config, seed, workers, out, format, svg } => {
            cmd_figure(&config, seed, workers, &out, format, &svg)?;
            Ok(0)
        }
        Command::Selfcheck => {
            let results = selfcheck();
            let mut failed = false;
            for r in &results {
                println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed |= !r.passed;
            }
            Ok(if failed { 4 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let line = serde_json::json!({"error": e.to_string(), "kind": e.kind()});
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
