use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nucap_cli::config::{Command, RunConfig};

/// Numerical runs over radial kernels: analytics, Hardy checks, capacities.
#[derive(Parser)]
#[command(name = "nucap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Parser)]
struct CommonArgs {
    /// Kernel spec file (key = value lines).
    #[arg(long)]
    kernel: PathBuf,
    /// Grid dimension.
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// Box half-width X; the grid covers [-X, X]^d.
    #[arg(long, default_value_t = 4.0)]
    extent: f64,
    /// Cells per axis (power of two).
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Integrability order p.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Comma-separated radii list.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "")]
    radii: Vec<String>,
    /// Dyadic levels for capacitary checks.
    #[arg(long, default_value_t = 8)]
    t_levels: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed for the corpora.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional cache directory for cell-mass sidecars.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Far cutoff for the cell masses, as a multiple of the extent.
    #[arg(long, default_value_t = 512.0)]
    far_factor: f64,
    /// Dump capacity minimizer snapshots as grid CSV files.
    #[arg(long, default_value_t = false)]
    dump_minimizers: bool,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Tabulates L, h_p and their ratio; reports integrability and beta.
    KernelInfo(CommonArgs),
    /// Runs the Hardy verification corpus (half-space, full-space, embedding).
    HardyCheck(CommonArgs),
    /// Ball capacity sweep against the h_p reference.
    Capacity(CommonArgs),
    /// Coarea identity on the indicator/tent/bump corpus (p = 1).
    CoareaCheck(CommonArgs),
    /// Capacity property suite (monotonicity, strong subadditivity).
    PropertySuite(CommonArgs),
}

fn build_config(cmd: Command, args: CommonArgs) -> Result<RunConfig, String> {
    let mut radii = Vec::new();
    for tok in &args.radii {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        radii.push(tok.parse::<f64>().map_err(|_| format!("bad radius `{tok}`"))?);
    }
    Ok(RunConfig {
        command: cmd,
        kernel_path: args.kernel,
        d: args.d,
        extent: args.extent,
        n: args.n,
        p: args.p,
        radii,
        t_levels: args.t_levels,
        out: args.out,
        seed: args.seed,
        cache: args.cache,
        far_factor: args.far_factor,
        dump_minimizers: args.dump_minimizers,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        CliCommand::KernelInfo(a) => build_config(Command::KernelInfo, a),
        CliCommand::HardyCheck(a) => build_config(Command::HardyCheck, a),
        CliCommand::Capacity(a) => build_config(Command::Capacity, a),
        CliCommand::CoareaCheck(a) => build_config(Command::CoareaCheck, a),
        CliCommand::PropertySuite(a) => build_config(Command::PropertySuite, a),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nucap: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("nucap: {e}");
        return ExitCode::from(2);
    }
    match nucap_cli::run(&config) {
        Ok(outcome) => {
            for artifact in &outcome.artifacts {
                println!("{}", artifact.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nucap: {e}");
            ExitCode::FAILURE
        }
    }
}
