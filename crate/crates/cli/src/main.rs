//! `mcfqkd`: runs figures, sweeps and calibration for a scenario file.
//!
//! Results go to CSV files in the output directory; a one-line JSON summary
//! per file goes to stdout. Failures print `{"category", "message"}` to
//! stderr and exit with a code determined by the category.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use mcfqkd_core::scenario::{
    calibrate, load_config, run_figure, sweep, CalibrationTargets, Figure, ScenarioConfig, Table,
};
use mcfqkd_core::{assign, Error};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "mcfqkd", version, about = "Decoy-state QKD over multicore-fiber passive optical networks")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, default_value = "configs/experiment.toml")]
    config: PathBuf,
    /// Directory for CSV output; overrides the scenario's `output.dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Monte Carlo seed; overrides `monte_carlo.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo gates per intensity; adds simulated columns to sweeps.
    #[arg(long, global = true)]
    mc_gates: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regenerates one figure's tables: fig3, fig4, fig5, fig6, fig7, fig7a, fig7b.
    RunFigure { name: String },
    /// Runs the scenario's `[[sweep]]` axis.
    Sweep,
    /// Fits the noise parameters to the calibration targets and prints them.
    Calibrate,
    /// Checks the scenario and its core/wavelength assignment.
    Validate,
}

fn exit_code(category: &str) -> u8 {
    match category {
        "usage" => 2,
        "config" => 3,
        "validation" => 4,
        "parameter" => 5,
        "model" => 6,
        "infeasible" => 7,
        "calibration" => 8,
        "io" => 9,
        _ => 1,
    }
}

fn fail(category: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "category": category, "message": message.to_string() }));
    ExitCode::from(exit_code(category))
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.monte_carlo.seed = seed;
    }
    if let Some(gates) = cli.mc_gates {
        cfg.monte_carlo.num_gates = Some(gates);
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    cli.output.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn save(table: &Table, dir: &Path) -> Result<(), Error> {
    let path = table.save(dir)?;
    println!("{}", json!({ "table": table.name, "rows": table.rows.len(), "path": path }));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::RunFigure { name } => {
            let figure: Figure = name.parse()?;
            let cfg = load(cli)?;
            let model = cfg.model()?;
            let dir = output_dir(cli, &cfg);
            for table in run_figure(figure, &cfg, &model)? {
                save(&table, &dir)?;
            }
        }
        Command::Sweep => {
            let cfg = load(cli)?;
            let model = cfg.model()?;
            save(&sweep(&cfg, &model)?, &output_dir(cli, &cfg))?;
        }
        Command::Calibrate => {
            let cfg = load(cli)?;
            let path =
                cfg.targets_path().ok_or_else(|| Error::Config("scenario has no [calibration] targets file".into()))?;
            let result = calibrate(&CalibrationTargets::load(&path)?, &cfg)?;
            println!("{}", serde_json::to_string(&result).expect("calibration result serializes"));
        }
        Command::Validate => {
            let cfg = load(cli)?;
            let plan = match &cfg.cwas {
                Some(c) => Some(assign(&cfg.topology, &c.demands)?),
                None => None,
            };
            println!("{}", json!({ "status": "valid", "config": cli.config, "plan": plan }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail("usage", e.to_string().trim_end()),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e),
    }
}
