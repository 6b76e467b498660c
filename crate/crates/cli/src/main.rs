use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lightray_cli::criteria::criterion_lines;
use lightray_cli::runner::{check_all, list_metrics, run_scenario};

#[derive(Parser)]
#[command(name = "lightray", version, about = "Null geodesics, Jacobi classes and contact checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its report and tables.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full invariant matrix and the acceptance criteria.
    CheckAll {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the metric catalog.
    ListMetrics,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed } => run_scenario(&scenario, &out, seed).map(|report| {
            for r in &report.records {
                println!("{}", r.summary_line());
            }
            println!("{} -> {}", if report.pass { "PASS" } else { "FAIL" }, out.display());
            report.pass
        }),
        Command::CheckAll { out } => check_all(&out).map(|report| {
            for r in &report.records {
                println!("{}", r.summary_line());
            }
            for (line, _) in criterion_lines(&report.records) {
                println!("{line}");
            }
            println!(
                "{} ({} records, {:.1} s) -> {}",
                if report.pass { "PASS" } else { "FAIL" },
                report.records.len(),
                report.wall_time_s,
                out.display()
            );
            report.pass
        }),
        Command::ListMetrics => {
            print!("{}", list_metrics());
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
