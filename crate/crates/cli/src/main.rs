use clap::{Args, Parser, Subcommand};
use dnls_cli::commands::{self, Report};
use dnls_cli::config::{parse_complex, Fixture, RunConfig};
use dnls_cli::output::OutDir;
use dnls_cli::{CliError, EXIT_INVARIANT, EXIT_OK};
use std::path::PathBuf;

/// Scattering, determinant, spectrum and evolution tools for the derivative NLS.
#[derive(Parser, Debug)]
#[command(name = "dnls", version)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides DNLS_OUT_DIR and the config).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// soliton:E,c | gaussian:amp[,width[,center]] | file:PATH | zero
    #[arg(long, global = true)]
    fixture: Option<Fixture>,
    /// Half width L of the grid [-L, L).
    #[arg(long = "L", global = true)]
    half_width: Option<f64>,
    /// Number of grid points N (power of two).
    #[arg(long = "N", global = true)]
    points: Option<usize>,
    /// Disable data-parallel scans.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// a, b (and c, d on the real axes) at a list of lambda values -> scatter.csv
    Scatter(ScatterArgs),
    /// Regularized determinant along a ray plus the expansion fit -> detscan.csv, fit.json
    Detscan(DetscanArgs),
    /// Located zeros of ã and ray counts -> spectrum.json
    Spectrum(SpectrumArgs),
    /// Remove one eigenvalue and check the update relations -> backlund.json
    Backlund(BacklundArgs),
    /// Time integration with conserved quantities and a(lambda) probes -> series.csv
    Evolve(EvolveArgs),
    /// Run the acceptance suite -> verify.json
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ScatterArgs {
    /// lambda as re,im (repeatable).
    #[arg(long = "lambda", value_parser = parse_complex)]
    lambdas: Vec<[f64; 2]>,
}

#[derive(Args, Debug)]
struct DetscanArgs {
    /// arg zeta of the ray.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n_modes: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Counting ray angle arg zeta (repeatable).
    #[arg(long = "ray")]
    rays: Vec<f64>,
}

#[derive(Args, Debug)]
struct BacklundArgs {
    /// Zero to remove as re,im; defaults to the located zero of largest imaginary part.
    #[arg(long, value_parser = parse_complex)]
    zeta1: Option<[f64; 2]>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Steps between recorded rows.
    #[arg(long)]
    every: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Criterion ids to run (e.g. A1 A7); all when omitted.
    only: Vec<String>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = &cli.fixture {
        cfg.fixture = f.clone();
    }
    if let Some(l) = cli.half_width {
        cfg.grid.half_width = l;
    }
    if let Some(n) = cli.points {
        cfg.grid.num_points = n;
    }
    cfg.sequential |= cli.sequential;
    match &cli.command {
        Command::Scatter(a) if !a.lambdas.is_empty() => cfg.scatter.lambdas = a.lambdas.clone(),
        Command::Detscan(a) => {
            if let Some(t) = a.theta {
                cfg.detscan.theta = t;
            }
            if let Some(n) = a.n_modes {
                cfg.detscan.n_modes = n;
            }
            if let Some(n) = a.nodes {
                cfg.detscan.nodes = n;
            }
        }
        Command::Spectrum(a) if !a.rays.is_empty() => cfg.spectrum.rays = a.rays.clone(),
        Command::Backlund(a) if a.zeta1.is_some() => cfg.backlund.zeta1 = a.zeta1,
        Command::Evolve(a) => {
            if let Some(v) = a.dt {
                cfg.evolve.dt = v;
            }
            if let Some(v) = a.t_end {
                cfg.evolve.t_end = v;
            }
            if let Some(v) = a.every {
                cfg.evolve.every = v;
            }
        }
        Command::Verify(a) if !a.only.is_empty() => cfg.verify.only = a.only.clone(),
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Report, (&'static str, CliError)> {
    let cfg = build_config(cli).map_err(|e| ("config", e))?;
    let out = OutDir::create(cfg.resolve_output_dir(cli.out_dir.as_deref())).map_err(|e| ("config", e))?;
    let (name, result) = match cli.command {
        Command::Scatter(_) => ("scatter", commands::cmd_scatter(&cfg, &out)),
        Command::Detscan(_) => ("detscan", commands::cmd_detscan(&cfg, &out)),
        Command::Spectrum(_) => ("spectrum", commands::cmd_spectrum(&cfg, &out)),
        Command::Backlund(_) => ("backlund", commands::cmd_backlund(&cfg, &out)),
        Command::Evolve(_) => ("evolve", commands::cmd_evolve(&cfg, &out)),
        Command::Verify(_) => ("verify", commands::cmd_verify(&cfg, &out)),
    };
    result.map_err(|e| (name, e))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(rep) => {
            println!("{}", rep.summary);
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
            if rep.ok {
                EXIT_OK
            } else {
                eprintln!("invariant check failed");
                EXIT_INVARIANT
            }
        }
        Err((name, e)) => {
            eprintln!("error in {name}: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
