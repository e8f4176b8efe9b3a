//! `amcsim`: runs cache/prefetcher experiments from JSON configs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use amc_core::experiment::{compare, run_experiment, sweep_miss_size, ExperimentSpec, OutputFormat};
use amc_core::report::{write_iterations_csv, write_rows_csv, write_rows_json, ReportRow};
use amc_core::trace;
use amc_core::workload::{generate, worked_example_fixture, Kernel, WorkloadSpec};
use amc_core::{ConfigError, SimError};

#[derive(Parser)]
#[command(name = "amcsim", version, about = "Trace-driven simulator for the AMC prefetcher")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and print its report row.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Exit with status 3 if a bound under "assert" is violated.
        #[arg(long)]
        assert: bool,
    },
    /// Distribution of AMC window miss counts against caps.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        caps: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
    /// One row per prefetcher on a shared workload, plus deltas.
    Compare {
        /// A config listing "prefetchers", or several configs.
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        assert: bool,
    },
    /// Write a synthetic trace (JSON lines for .jsonl, binary otherwise).
    GenTrace {
        #[arg(long)]
        kernel: String,
        #[arg(long, default_value_t = 1000)]
        vertices: usize,
        #[arg(long, default_value_t = 9.0)]
        degree: f64,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in fixture.
    Fixture {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Assertion(Vec<String>),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let config = e.chain().any(|c| {
            c.is::<ConfigError>() || matches!(c.downcast_ref::<SimError>(), Some(SimError::Config(_)))
        });
        if config {
            Failure::Config(format!("{e:#}"))
        } else {
            Failure::Other(e)
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn load(path: &Path) -> Result<ExperimentSpec, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = ExperimentSpec::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

fn format_of(flag: Option<Format>, spec: &ExperimentSpec) -> OutputFormat {
    match flag {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => spec.output.format,
    }
}

fn emit_rows(rows: &[ReportRow], format: OutputFormat, out: Option<&Path>) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match format {
        OutputFormat::Csv => write_rows_csv(&mut stdout, rows)?,
        OutputFormat::Json => {
            write_rows_json(&mut stdout, rows)?;
            writeln!(stdout)?;
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        match format {
            OutputFormat::Csv => {
                write_rows_csv(fs::File::create(dir.join("report.csv"))?, rows)?;
                write_iterations_csv(fs::File::create(dir.join("iterations.csv"))?, rows)?;
            }
            OutputFormat::Json => write_rows_json(fs::File::create(dir.join("report.json"))?, rows)?,
        }
    }
    Ok(())
}

fn verdict(failures: Vec<String>, enabled: bool) -> Result<(), Failure> {
    if enabled && !failures.is_empty() {
        return Err(Failure::Assertion(failures));
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { config, out, format, assert } => {
            let spec = load(&config)?;
            let row = run_experiment(&spec)?;
            let out = out.or(spec.output.dir.clone());
            emit_rows(std::slice::from_ref(&row), format_of(format, &spec), out.as_deref())?;
            verdict(spec.assertions.check_row(&row), assert)
        }
        Cmd::Sweep { config, caps, out, assert } => {
            let spec = load(&config)?;
            let report = sweep_miss_size(&spec, &caps)?;
            report.write_csv(std::io::stdout().lock()).map_err(anyhow::Error::from)?;
            if let Some(dir) = out.or(spec.output.dir.clone()) {
                fs::create_dir_all(&dir).map_err(anyhow::Error::from)?;
                let w = |name: &str| fs::File::create(dir.join(name)).map_err(anyhow::Error::from);
                report.write_csv(w("sweep.csv")?).map_err(anyhow::Error::from)?;
                report.write_histogram_csv(w("window_histogram.csv")?).map_err(anyhow::Error::from)?;
            }
            verdict(spec.assertions.check_sweep(&report), assert)
        }
        Cmd::Compare { config, out, format, assert } => {
            let specs = config.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
            let report = compare(&specs)?;
            let out = out.or(specs[0].output.dir.clone());
            emit_rows(&report.rows, format_of(format, &specs[0]), out.as_deref())?;
            if let Some(dir) = &out {
                report.write_deltas_csv(fs::File::create(dir.join("deltas.csv")).map_err(anyhow::Error::from)?)
                    .map_err(anyhow::Error::from)?;
            }
            let failures = report.rows.iter().flat_map(|r| specs[0].assertions.check_row(r)).collect();
            verdict(failures, assert)
        }
        Cmd::GenTrace { kernel, vertices, degree, iterations, seed, out } => {
            let kernel: Kernel = kernel.parse().map_err(|e: ConfigError| Failure::Config(e.to_string()))?;
            if matches!(kernel, Kernel::Trace | Kernel::WorkedExample) {
                return Err(Failure::Config("gen-trace: kernel must be pgd, bfs, cc or bellmanford".into()));
            }
            let spec = WorkloadSpec { vertices, avg_degree: degree, iterations, ..WorkloadSpec::new(kernel) };
            let w = generate(&spec, seed)?;
            trace::write_file(&out, &w.events).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} events to {}", w.events.len(), out.display());
            Ok(())
        }
        Cmd::Fixture { name, out } => {
            if name != "worked-example" {
                return Err(Failure::Config(format!("unknown fixture `{name}` (known: worked-example)")));
            }
            worked_example_fixture().write_dir(&out)?;
            eprintln!("wrote worked-example fixture to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Assertion(fails)) => {
            for f in fails {
                eprintln!("assertion failed: {f}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
