use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covsearch::artifacts::Selection;
use covsearch::config::{string_literal, RunConfig};
use covsearch::pipeline;

/// Coverage-search planning for a UAV localized by a stationary UGV.
#[derive(Parser, Debug)]
#[command(name = "covsearch", version)]
struct Cli {
    /// Run configuration (TOML). The bundled default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Measurement mode for simulation: noisy or perfect (overrides `mode`).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Monte Carlo runs per path (overrides `mc_runs`).
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Override any config key, e.g. `--set noise.r_uwb=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// More logging (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the roadmap, generate and score candidate circuits.
    Plan,
    /// Monte Carlo replays of one planned candidate.
    Simulate {
        /// best, worst, second_best, second_worst or a candidate index.
        #[arg(long, default_value = "best")]
        select: String,
    },
    /// Consolidate plan and simulation artifacts.
    Report,
    /// Plan, simulate the highlighted paths, then report.
    All,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, covsearch::Error> {
    let mut out = Vec::new();
    for item in &cli.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| covsearch::Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        out.push(("seed".into(), seed.to_string()));
    }
    if let Some(dir) = &cli.out {
        out.push(("out".into(), string_literal(&dir.to_string_lossy())));
    }
    if let Some(mode) = &cli.mode {
        mode.parse::<covsearch::montecarlo::MeasurementMode>()?;
        out.push(("mode".into(), string_literal(mode)));
    }
    if let Some(runs) = cli.runs {
        out.push(("mc_runs".into(), runs.to_string()));
    }
    Ok(out)
}

fn load_config(cli: &Cli) -> covsearch::Result<RunConfig> {
    let ov = overrides(cli)?;
    match &cli.config {
        Some(path) => RunConfig::load(path, &ov),
        None => RunConfig::from_toml_str(
            covsearch::config::DEFAULT_CONFIG_TOML,
            std::path::Path::new("."),
            &ov,
        ),
    }
}

fn run(cli: &Cli) -> covsearch::Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Plan => {
            let out = pipeline::cmd_plan(&cfg)?;
            let r = &out.ranking;
            println!(
                "{} candidates, circuit {:.3} m ({:.2} s)",
                out.candidates.len(),
                out.summary.circuit_length_m,
                out.summary.flight_time_s
            );
            println!("best {} total {:.3} m^2", r.best, out.scores[r.best].total);
            println!("worst {} total {:.3} m^2", r.worst, out.scores[r.worst].total);
        }
        Command::Simulate { select } => {
            let selection: Selection = select.parse()?;
            let sim = pipeline::cmd_simulate(&cfg, selection)?;
            let agg = &sim.trials.aggregate;
            println!(
                "{}: candidate {}, {} runs, mean 3D RMS {:.4} m, median 3D RMS {:.4} m",
                sim.trials.label, sim.trials.circuit_index, agg.runs, agg.mean.rms_3d, agg.median.rms_3d
            );
        }
        Command::Report => {
            pipeline::cmd_report(&cfg.out)?;
            let text =
                std::fs::read_to_string(cfg.out.join("report.txt")).map_err(|e| covsearch::Error::Io {
                    path: cfg.out.join("report.txt"),
                    source: e,
                })?;
            print!("{text}");
        }
        Command::All => {
            pipeline::cmd_all(&cfg)?;
            println!("artifacts written to {}", cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
