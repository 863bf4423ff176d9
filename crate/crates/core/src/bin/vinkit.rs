use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use vinkit::harness::{
    evaluate_files, load_config, run_experiment, simulate_to_dir, ExperimentRequest, HarnessError,
    LossReport,
};

#[derive(Parser)]
#[command(name = "vinkit", version, about = "Stereo visual-inertial navigation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (imu.csv, groundtruth.csv, tracks.csv, calib.toml).
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the filter on a dataset directory or the synthetic scenario.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Track file overriding the dataset's or simulator's tracks.
        #[arg(long)]
        tracks: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        no_dlam: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute errors and loss of an estimate file against ground truth.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_loss(label: &str, loss: &LossReport) {
    println!("{}", LossReport::TABLE_HEADER);
    println!("|---|---|---|---|---|---|");
    println!("{}", loss.table_row(label));
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Simulate { config, seed, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.sim.seed = s;
            }
            let sc = simulate_to_dir(&cfg, &out)?;
            println!(
                "wrote {} IMU samples, {} frames, {} landmarks to {}",
                sc.imu.len(),
                sc.tracks.frames.len(),
                sc.landmarks.len(),
                out.display()
            );
        }
        Command::Run {
            config,
            dataset,
            tracks,
            weights,
            no_dlam,
            seed,
            out,
        } => {
            let req = ExperimentRequest {
                config,
                dataset,
                tracks,
                weights,
                no_dlam,
                seed,
                out,
            };
            let report = run_experiment(&req)?;
            let label = if report.dlam { "adaptive" } else { "nominal" };
            eprintln!(
                "{} estimates, {} vision updates, artifacts in {}",
                report.estimates,
                report.updates,
                req.out.display()
            );
            match &report.loss {
                Some(l) => print_loss(label, l),
                None => eprintln!("run too short for the transient skip; no loss reported"),
            }
        }
        Command::Eval {
            config,
            estimates,
            truth,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let (errors, loss) = evaluate_files(&estimates, &truth, &cfg)?;
            if errors.unmatched > 0 {
                eprintln!("{} estimates had no ground truth within tolerance", errors.unmatched);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io(e.to_string()))?;
                std::fs::write(dir.join("errors.csv"), errors.to_csv())
                    .map_err(|e| HarnessError::Io(e.to_string()))?;
                let text = toml::to_string(&loss).map_err(|e| HarnessError::Io(e.to_string()))?;
                std::fs::write(dir.join("loss.toml"), text).map_err(|e| HarnessError::Io(e.to_string()))?;
            }
            print_loss("eval", &loss);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
