use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monofsi::error::{FsiError, Result};
use monofsi::scenario::{plot_from_csv, run, RunConfig, Scenario, StopReason};

#[derive(Parser)]
#[command(name = "monofsi", version, about = "Monolithic Eulerian fluid-structure simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its time series, snapshots and plots.
    Run(RunArgs),
    /// Redraw the plots of an existing output directory.
    Plot {
        /// Directory holding timeseries.csv.
        dir: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// fsi2star, fsi3, rest, poiseuille or free_decay.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML run configuration; flags given alongside override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Target mesh vertex count.
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    ubar: Option<f64>,
    /// Solid shear modulus in Pa.
    #[arg(long)]
    mu_s: Option<f64>,
    /// Solid density in kg/m³.
    #[arg(long)]
    rho_s: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    fp_max_iter: Option<usize>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Initial tip deflection of the flag in m.
    #[arg(long)]
    tip_deflection: Option<f64>,
    #[arg(long)]
    no_energy_stable: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut c = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| FsiError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        (None, Some(name)) => name.parse::<Scenario>()?.config(),
        (None, None) => return Err(FsiError::Config("either --scenario or --config is required".into())),
    };
    if let (Some(_), Some(name)) = (&args.config, &args.scenario) {
        let s: Scenario = name.parse()?;
        if s != c.scenario {
            return Err(FsiError::Config(format!("--scenario {s} disagrees with the config file ({})", c.scenario)));
        }
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag { c.$($field).+ = v; })*
        };
    }
    set!(
        dt => dt,
        t_end => t_end,
        vertices => geometry.target_vertex_count,
        ubar => ubar,
        mu_s => material.mu_s,
        rho_s => material.rho_s,
        epsilon0 => material.epsilon0,
        fp_tol => fp_tol,
        fp_max_iter => fp_max_iter,
        snapshot_stride => snapshot_stride,
        tip_deflection => tip_deflection,
        seed => seed,
    );
    if args.no_energy_stable {
        c.energy_stable = false;
    }
    c.output_dir = Some(args.out.clone());
    c.validate()?;
    Ok(c)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = build_config(&args)?;
            let summary = run(&config)?;
            let last = summary.rows.last().expect("initial row");
            println!("scenario {} finished at t = {:.6} s after {} steps", config.scenario, last.t, summary.rows.len() - 1);
            if summary.stop == StopReason::ContactImminent {
                println!("stopped: flag within half a mesh spacing of a wall");
            }
            println!("output written to {}", args.out.display());
            Ok(())
        }
        Command::Plot { dir } => plot_from_csv(&dir.join("timeseries.csv"), &dir),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
