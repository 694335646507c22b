// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod exit;

#[derive(Parser, Debug)]
#[command(
    name = "pwvie",
    version,
    about = "Generalized solutions of first-kind Volterra equations with piecewise kernels"
)]
struct Cli {
    /// Emit reports as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check hypotheses, estimate solver constants and classify the characteristic function.
    Analyze {
        file: PathBuf,
        /// Sample points used for grid checks and constant estimates.
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
    /// Print the log-power approximation of the regular part.
    Asympt {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: u32,
    },
    /// Solve and write the generalized solution with samples.
    Solve {
        file: PathBuf,
        /// Fixed-point tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Nodes per subinterval or panel.
        #[arg(long, default_value_t = 17)]
        nodes: usize,
        /// Asymptotic order (raised to N* when smaller).
        #[arg(long)]
        order: Option<u32>,
        /// Free-parameter binding such as `c1=0.5` (repeatable).
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Solution JSON path; samples go next to it with a `.csv` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail instead of defaulting unbound parameters to zero.
        #[arg(long)]
        strict_params: bool,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        /// Number of samples written to the solution.
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Recompute residuals of a stored solution.
    Verify {
        file: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        /// Residual grid points.
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze { file, grid_points } => commands::analyze(&file, grid_points, cli.json),
        Command::Asympt { file, order } => commands::asympt(&file, order, cli.json),
        Command::Solve { file, tol, nodes, order, params, out, strict_params, grid_points, samples } => {
            commands::solve(&commands::SolveConfig {
                file,
                tol,
                nodes,
                order,
                params,
                out,
                strict_params,
                grid_points,
                samples,
                json: cli.json,
            })
        }
        Command::Verify { file, solution, threshold, points } => {
            commands::verify(&file, &solution, threshold, points, cli.json)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
