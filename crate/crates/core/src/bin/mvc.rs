use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use mvc_core::bench::{run_bench, BenchConfig};
use mvc_core::engine::{decide_with_faces, DecisionConfig, DEFAULT_MAX_CELLS};
use mvc_core::geometry::DEFAULT_SLACK;
use mvc_core::grid::{grid_rows, rows_to_csv, rows_to_svg, GridMethod};
use mvc_core::multinomial::{exact_p_value, CountVector, OutcomeTable, SimplexPoint};
use mvc_core::report::{trace_to_jsonl, RunReport};

/// Writes to stdout, ignoring a closed pipe (`mvc ... | head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

/// Exit code for usage and runtime errors (0–2 are verdicts).
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "mvc", version, about = "Certified intersection tests for exact multinomial confidence sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mvc,
    Chisq,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the two exact confidence sets intersect.
    ///
    /// Exit code 0 = INTERSECT, 1 = DISJOINT, 2 = UNCERTAIN, 3 = error.
    Decide {
        #[arg(long, value_name = "COUNTS")]
        a: CountVector,
        #[arg(long, value_name = "COUNTS")]
        b: CountVector,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_CELLS)]
        max_cells: usize,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the refinement trace as JSON lines.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Exact p-value of an outcome under a parameter.
    Pvalue {
        #[arg(long, value_name = "COUNTS")]
        outcome: CountVector,
        #[arg(long, value_name = "PROBS", value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Membership of both regions on a barycentric grid, as CSV.
    Grid {
        #[arg(long, value_name = "COUNTS")]
        a: CountVector,
        #[arg(long, value_name = "COUNTS")]
        b: CountVector,
        #[arg(long)]
        alpha: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: u32,
        #[arg(long, value_enum, default_value_t = Method::Mvc)]
        method: Method,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Also write a ternary plot (k = 3 only).
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
    },
    /// Random instances cross-checked against the grid oracle.
    Bench {
        #[arg(long, value_enum, default_value_t = Suite::Random)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        n_max: u32,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 200_000)]
        max_cells: usize,
        /// Oracle grid resolution.
        #[arg(long, default_value_t = 300)]
        resolution: u32,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8, String> {
    match command {
        Command::Decide {
            a,
            b,
            alpha,
            tau,
            eps,
            max_cells,
            slack,
            format,
            trace,
            workers,
        } => {
            let config = DecisionConfig {
                alpha,
                tau,
                epsilon: eps,
                max_cells,
                slack,
                workers,
                record_trace: trace.is_some(),
            };
            let start = Instant::now();
            let decision = decide_with_faces(&a, &b, &config).map_err(|e| e.to_string())?;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            if let (Some(path), Some(events)) = (&trace, &decision.trace) {
                fs::write(path, trace_to_jsonl(events)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let report = RunReport::new(&a, &b, &config, &decision, wall);
            match format {
                Format::Json => emit(&format!("{}\n", report.to_json())),
                Format::Text => emit(&report.to_text()),
            }
            Ok(decision.verdict.exit_code() as u8)
        }
        Command::Pvalue { outcome, p } => {
            let p = SimplexPoint::new(p).map_err(|e| e.to_string())?;
            let table = OutcomeTable::new(outcome.n(), outcome.k()).map_err(|e| e.to_string())?;
            let value = exact_p_value(&outcome, &p, &table).map_err(|e| e.to_string())?;
            emit(&format!("{value:.12}\n"));
            Ok(0)
        }
        Command::Grid {
            a,
            b,
            alpha,
            resolution,
            method,
            out,
            svg,
        } => {
            let method = match method {
                Method::Mvc => GridMethod::Mvc,
                Method::Chisq => GridMethod::Chisq,
            };
            let rows = grid_rows(&a, &b, alpha, resolution, method).map_err(|e| e.to_string())?;
            fs::write(&out, rows_to_csv(&rows, a.k())).map_err(|e| format!("{}: {e}", out.display()))?;
            if let Some(path) = svg {
                let label = match method {
                    GridMethod::Mvc => "exact",
                    GridMethod::Chisq => "likelihood ratio",
                };
                let title = format!("A = [{a}], B = [{b}], alpha = {alpha} ({label})");
                let doc = rows_to_svg(&rows, &title).map_err(|e| e.to_string())?;
                fs::write(&path, doc).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let both = rows.iter().filter(|r| r.in_a && r.in_b).count();
            eprintln!("{} grid points, {} in both regions", rows.len(), both);
            Ok(0)
        }
        Command::Bench {
            suite: Suite::Random,
            count,
            n_max,
            k,
            seed,
            tau,
            eps,
            max_cells,
            resolution,
            workers,
            format,
        } => {
            let config = BenchConfig {
                count,
                n_max,
                k,
                seed,
                tau,
                epsilon: eps,
                max_cells,
                oracle_resolution: resolution,
                workers,
            };
            let report = run_bench(&config).map_err(|e| e.to_string())?;
            match format {
                Format::Json => emit(&format!("{}\n", serde_json::to_string_pretty(&report).expect("serializable"))),
                Format::Text => emit(&report.to_table()),
            }
            eprintln!("wall time: {:.1} ms", report.wall_time_ms);
            Ok(0)
        }
    }
}
