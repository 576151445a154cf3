//! Command-line interface: run the mean tests on user data, drive Monte
//! Carlo studies from a JSON config, rerun the reference tables, and
//! export QQ-plot data.
//!
//! Exit codes: 0 success; 2 configuration error (bad flags, config file,
//! or generator parameters); 3 data error (unreadable or malformed input);
//! 4 degenerate statistic on user data (variance estimate not positive).

use clap::{Parser, Subcommand};
use hdmean::io::{load_matrix, load_results, save_results};
use hdmean::stat::{test_one_sample, test_two_sample, TestResult, TwoSampleInput};
use hdmean::{Error, Result};
use hdmean_cli::config::load_config;
use hdmean_cli::engine::{run_experiment, summary_csv};
use hdmean_cli::qq::qq_export;
use hdmean_cli::tables::{reproduce_table, table_csv};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hdmean",
    version,
    about = "High-dimensional mean tests for temporally dependent observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mean test on a data matrix (rows = time points, columns = coordinates).
    Test {
        #[command(subcommand)]
        test: TestCommand,
    },
    /// Run the Monte Carlo scenarios of a JSON experiment config.
    Simulate {
        /// Experiment config (JSON, schema_version 1).
        #[arg(long)]
        config: PathBuf,
        /// Summary CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 = one per logical CPU. Any value yields the
        /// same summary.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Rerun a built-in reference simulation table and report deviations.
    ReproduceTable {
        /// Table number: 1 (one-sample), 2 (two-sample) or 3 (misspecified order).
        #[arg(long)]
        table: u8,
        /// Replicates per cell (the reference tables use 10000).
        #[arg(long)]
        reps: u64,
        #[arg(long)]
        seed: u64,
        /// Cell-level CSV destination.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Export QQ-plot data (uniform quantiles vs sorted p-values).
    Qq {
        /// A per-replicate results CSV or a single-column p-value CSV.
        #[arg(long)]
        pvalues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TestCommand {
    /// Test H0: the process mean is zero.
    OneSample {
        #[arg(long)]
        input: PathBuf,
        /// Dependence order M the statistic accounts for.
        #[arg(long, value_name = "K")]
        m_order: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Emit the result as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Test H0: the two process means are equal.
    TwoSample {
        #[arg(long)]
        input1: PathBuf,
        #[arg(long)]
        input2: PathBuf,
        #[arg(long, value_name = "K")]
        m_order: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        json: bool,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Domain { .. }
        | Error::SingularSystem { .. }
        | Error::NotPositiveDefinite { .. } => 2,
        Error::Parse { .. } | Error::Io { .. } | Error::Dimension { .. } => 3,
        Error::DegenerateVariance { .. } | Error::EmptyIndexSet { .. } => 4,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn result_json(result: &TestResult, sizes: (usize, Option<usize>), p: usize, m: usize) -> String {
    let d = &result.diagnostics;
    let value = serde_json::json!({
        "n": sizes.0,
        "n2": sizes.1,
        "p": p,
        "m_order": m,
        "alpha": result.alpha,
        "numerator": result.numerator,
        "variance": result.variance,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "reject": result.reject,
        "diagnostics": {
            "tr_omega_hat": d.tr_omega_hat,
            "tr_omega_hat_2": d.tr_omega_hat_2,
            "chi_n": d.chi_n,
            "chi_n_2": d.chi_n_2,
            "min_pair_count": d.min_pair_count,
            "clamp_events": d.clamp_events,
        },
    });
    serde_json::to_string_pretty(&value).expect("plain JSON value")
}

fn print_result(result: &TestResult, sizes: (usize, Option<usize>), p: usize, m: usize, json: bool) {
    if json {
        println!("{}", result_json(result, sizes, p, m));
        return;
    }
    match sizes.1 {
        Some(n2) => println!("n1 = {}, n2 = {n2}, p = {}, M = {m}", sizes.0, p),
        None => println!("n = {}, p = {}, M = {m}", sizes.0, p),
    }
    println!("statistic   {:.6}", result.statistic);
    println!("p-value     {:.6}", result.p_value);
    println!(
        "decision    {} H0 at level {}",
        if result.reject { "reject" } else { "do not reject" },
        result.alpha
    );
}

/// Reads p-values either from a per-replicate results CSV or from a plain
/// single-column file (optional `p_value` header).
fn read_pvalues(path: &Path) -> Result<Vec<f64>> {
    match load_results(path) {
        Ok(records) => Ok(records.iter().map(|r| r.p_value).collect()),
        Err(Error::Parse { .. }) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            let mut values = Vec::new();
            for (idx, raw_line) in text.split('\n').enumerate() {
                let line = raw_line.trim_end_matches('\r').trim();
                if line.is_empty() || (idx == 0 && line.eq_ignore_ascii_case("p_value")) {
                    continue;
                }
                let value: f64 = line.parse().map_err(|_| {
                    Error::parse(format!("line {}: '{line}' is not a number", idx + 1))
                })?;
                values.push(value);
            }
            Ok(values)
        }
        Err(other) => Err(other),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test { test } => match test {
            TestCommand::OneSample { input, m_order, alpha, json } => {
                let x = load_matrix(&input)?;
                let (n, p) = (x.n(), x.p());
                let result = test_one_sample(&x, m_order, alpha)?;
                print_result(&result, (n, None), p, m_order, json);
            }
            TestCommand::TwoSample { input1, input2, m_order, alpha, json } => {
                let x1 = load_matrix(&input1)?;
                let x2 = load_matrix(&input2)?;
                let (n1, n2, p) = (x1.n(), x2.n(), x1.p());
                let input = TwoSampleInput::new(x1, x2, m_order)?;
                let result = test_two_sample(&input, alpha)?;
                print_result(&result, (n1, Some(n2)), p, m_order, json);
            }
        },
        Command::Simulate { config, out, threads } => {
            let config = load_config(&config)?;
            let summary = run_experiment(&config, threads)?;
            write_file(&out, &summary_csv(&summary.rows))?;
            if let Some(dump) = &config.dump_pvalues {
                save_results(&summary.records, dump)?;
                println!("p-value dump: {dump}");
            }
            for row in &summary.rows {
                println!(
                    "{} [{}]: rate {:.4} (se {:.4}), completed {}, degenerate {}{}",
                    row.scenario,
                    row.statistic,
                    row.rate(),
                    row.mc_se(),
                    row.completed,
                    row.degenerate,
                    if row.flagged { " [FLAGGED > 0.1%]" } else { "" },
                );
            }
            println!(
                "policy: degenerate-variance replicates are excluded from rate \
                 denominators and counted separately"
            );
            println!("summary: {} ({:.1}s)", out.display(), summary.wall_time.as_secs_f64());
        }
        Command::ReproduceTable { table, reps, seed, out, threads } => {
            let report = reproduce_table(table, reps, seed, threads)?;
            write_file(&out, &table_csv(&report.cells))?;
            let worst = report
                .cells
                .iter()
                .map(|c| (c.observed - c.cell.target).abs())
                .fold(0.0, f64::max);
            println!(
                "table {table}: {} cells, max |observed - reference| = {worst:.4}",
                report.cells.len()
            );
            println!(
                "written: {} ({:.1}s)",
                out.display(),
                report.summary.wall_time.as_secs_f64()
            );
        }
        Command::Qq { pvalues, out } => {
            let values = read_pvalues(&pvalues)?;
            qq_export(&values, &out)?;
            println!("written: {} ({} rows)", out.display(), values.len());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
