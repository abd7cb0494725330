use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heavylog::asymptotic::write_diagnostic_csv;
use heavylog::experiment::{
    emit_plot, run_asymptotics, run_simulation, verify_girko, verify_moments, ExperimentConfig,
    ExperimentReport, VerificationReport,
};
use heavylog::Error;

#[derive(Parser)]
#[command(name = "heavylog", version, about = "Log-determinant CLT simulations and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
    /// Certify the moment identities in exact arithmetic.
    VerifyMoments {
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare the perpendiculars recursion with Cholesky on random cases.
    VerifyGirko {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 200)]
        max_p: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Convergence of scaled sphere moments for symmetric Pareto entries.
    Asymptotics {
        #[arg(long)]
        alpha: f64,
        /// Half-exponents k_1,..,k_r.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved JSON report as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Verification,
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FlagBudget { .. } | Error::NotPositiveDefinite { .. } | Error::Singular { .. } => 3,
        _ => 2,
    }
}

fn print_verification(report: &VerificationReport) -> Result<(), Failure> {
    for c in &report.checks {
        println!(
            "{:<6} {:<40} cases={:<6} max_residual={:e} tol={:e}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.max_abs_residual,
            c.tolerance
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, seed, reps, out_csv, out_json, out_svg } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if out_csv.is_some() {
                cfg.outputs.csv_path = out_csv;
            }
            if out_json.is_some() {
                cfg.outputs.json_path = out_json;
            }
            if out_svg.is_some() {
                cfg.outputs.svg_path = out_svg;
            }
            cfg.validate()?;
            let report = run_simulation(&cfg)?;
            report.write_outputs()?;
            let mut line = format!(
                "reps={} flagged={} wall={:.2}s threads={}",
                report.reps, report.flagged, report.timing.wall_seconds, report.timing.threads
            );
            if let (Some(s), Some(ks)) = (&report.summary, &report.ks) {
                line += &format!(
                    " mean={:.4} var={:.4} skew={:.4} kurt={:.4} ks={:.4} p={:.4}",
                    s.mean, s.variance, s.skewness, s.excess_kurtosis, ks.statistic, ks.p_value
                );
            }
            println!("{line}");
            Ok(())
        }
        Command::VerifyMoments { nmax, trials, seed } => {
            if nmax < 3 {
                return Err(Error::Config("--nmax must be at least 3".into()).into());
            }
            let ns: Vec<usize> = (3..=nmax).collect();
            print_verification(&verify_moments(&ns, trials, seed)?)
        }
        Command::VerifyGirko { cases, max_p, seed } => {
            print_verification(&verify_girko(cases, max_p, seed)?)
        }
        Command::Asymptotics { alpha, k, grid, reps, seed, out } => {
            let rows = run_asymptotics(alpha, &k, &grid, reps, seed)?;
            match out {
                Some(path) => write_diagnostic_csv(&rows, std::fs::File::create(path)?)?,
                None => write_diagnostic_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Plot { input, out } => {
            let text = std::fs::read_to_string(&input)?;
            let report = ExperimentReport::from_json(&text)?;
            std::fs::write(out, emit_plot(&report))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
