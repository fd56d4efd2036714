use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use facf::config::{FeatureSourceSpec, Mode, RunConfig};
use facf::error::{Error, Result};
use facf::ingestion::{
    load_sequence, parse_ground_truth, synth_sequence, write_sequence, SequenceSpec, SynthScript,
};
use facf::metrics::{evaluate, metrics_csv};
use facf::report::{emit_reports, parse_results_csv};
use facf::run_tracker;

#[derive(Parser)]
#[command(name = "facf", version, about = "Ensemble correlation-filter tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a sequence and write results, metrics and fitness traces.
    Track {
        /// OTB sequence directory, or a synthetic-sequence script file.
        sequence: PathBuf,
        /// key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// adaptive | all-experts
        #[arg(long)]
        mode: Option<Mode>,
        /// synthetic | path to a channel-map file
        #[arg(long)]
        features: Option<FeatureSourceSpec>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Score a results CSV against ground truth.
    Eval {
        results: PathBuf,
        /// groundtruth_rect.txt or the sequence directory holding it.
        ground_truth: PathBuf,
        /// Also write metrics.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a synthetic sequence into an OTB directory.
    Synth {
        script: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn open_sequence(path: &Path) -> Result<SequenceSpec> {
    if path.is_dir() {
        load_sequence(path)
    } else {
        synth_sequence(&read(path)?.parse::<SynthScript>()?)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track {
            sequence,
            config,
            seed,
            mode,
            features,
            out_dir,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(f) = features {
                cfg.features = f;
            }
            cfg.validate()?;
            let seq = open_sequence(&sequence)?;
            let record = run_tracker(&cfg, &seq)?;
            let (paths, curves) = emit_reports(&record, seq.ground_truth(), &out_dir)?;
            println!(
                "{}: {} frames, P(20px) {:.4}, AUC {:.4}, results in {}",
                seq.name(),
                record.len(),
                curves.p20(),
                curves.auc(),
                paths.results.display()
            );
        }
        Command::Eval {
            results,
            ground_truth,
            out_dir,
        } => {
            let table = parse_results_csv(&read(&results)?)?;
            let gt_path = if ground_truth.is_dir() {
                ground_truth.join("groundtruth_rect.txt")
            } else {
                ground_truth
            };
            let gt = parse_ground_truth(&read(&gt_path)?)?;
            let curves = evaluate(&table.boxes, &gt).map_err(|e| Error::Format(e.to_string()))?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                let path = dir.join("metrics.csv");
                std::fs::write(&path, metrics_csv(&curves))
                    .map_err(|e| Error::Io { path, source: e })?;
            }
            println!("p20,{}\nauc,{}", curves.p20(), curves.auc());
        }
        Command::Synth { script, out_dir } => {
            let script: SynthScript = read(&script)?.parse()?;
            let seq = synth_sequence(&script)?;
            write_sequence(&seq, &out_dir)?;
            println!("wrote {} frames to {}", seq.len(), out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
