//! Command line for the VesselEdge data path.
//!
//! Exit codes: 0 success, 2 config error, 3 input error, 4 pipeline error,
//! 5 distortion-ordering violation in a sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vesseledge::anomaly::{self, ModelConfig};
use vesseledge::harness::{
    apply_override, parse_config, run_far_edge, run_near_edge, run_replay, sweep, HarnessError,
    InputFormat, ScenarioConfig,
};
use vesseledge::ingest::{self, CleanParams};
use vesseledge::synth;

#[derive(Parser)]
#[command(
    name = "vesseledge",
    version,
    about = "AIS far-edge pipeline: decode, detect, compress, relay, reconstruct"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch replay of the full pipeline over a recorded input.
    Replay {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. --set pipeline.window_seconds=60.
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay across a fraction sweep and check distortion ordering.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated budget fractions, e.g. 0.1,0.25,0.5.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vessel-side process: ingest, detect, compress, transmit.
    FarEdge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Coast-side process: receive, reconstruct, persist.
    NearEdge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Exit after the first connection closes.
        #[arg(long)]
        once: bool,
    },
    /// Train the movement model from a DMA CSV and save it.
    TrainModel {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        calibrate_quantile: f64,
        #[arg(long, default_value_t = 0.01)]
        cell_size: f64,
        #[arg(long, default_value_t = 3)]
        components: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Decode an NMEA or DMA CSV input and report the cleaning counts.
    DecodeNmea {
        #[arg(long)]
        input: PathBuf,
        /// nmea or csv.
        #[arg(long, default_value = "nmea")]
        format: String,
        /// Write decoded records as newline-delimited JSON.
        #[arg(long)]
        dump_json: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic harbor day for demos and tests.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// dma, nmea, or both.
        #[arg(long, default_value = "dma")]
        kind: String,
        #[arg(long, default_value_t = 40)]
        vessels: usize,
        #[arg(long, default_value_t = 4)]
        anomalous: usize,
        /// Scenario length in seconds.
        #[arg(long, default_value_t = 10_800)]
        duration: i64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn load_config(
    path: &PathBuf,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    for spec in overrides {
        apply_override(&mut config, spec)?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.out_dir = o;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Replay {
            config,
            overrides,
            seed,
            out,
        } => {
            let config = load_config(&config, &overrides, seed, out)?;
            let output = run_replay(&config)?;
            println!("metrics: {}", output.metrics_path.display());
            for row in &output.metrics.rows {
                println!(
                    "fraction {:>5} {:>9}: distortion {:.3} m, anomalies retained {}/{}",
                    row.fraction,
                    row.algorithm,
                    row.avg_distortion_m,
                    row.anomalies_retained,
                    row.total_anomalies
                );
            }
            Ok(0)
        }
        Command::Sweep {
            config,
            fractions,
            overrides,
            seed,
            out,
        } => {
            let config = load_config(&config, &overrides, seed, out)?;
            let output = sweep(&config, fractions.as_deref())?;
            println!("metrics: {}", output.metrics_path.display());
            for v in &output.manifest.monotonicity_violations {
                eprintln!("ordering violation: {v}");
            }
            Ok(if output.monotonicity_violated { 5 } else { 0 })
        }
        Command::FarEdge { config, overrides } => {
            let config = load_config(&config, &overrides, None, None)?;
            let report = run_far_edge(&config)?;
            println!(
                "far edge done: {} records, {} windows sent, {} dropped",
                report.records, report.windows_sent, report.windows_dropped
            );
            Ok(0)
        }
        Command::NearEdge {
            config,
            overrides,
            once,
        } => {
            let config = load_config(&config, &overrides, None, None)?;
            let report = run_near_edge(&config, once)?;
            println!(
                "near edge done: {} packets, {} points, {} corrupt, store {}",
                report.packets,
                report.points,
                report.corrupt,
                report.store_path.display()
            );
            Ok(0)
        }
        Command::TrainModel {
            train,
            model,
            calibrate_quantile,
            cell_size,
            components,
            seed,
        } => {
            let (records, report) = ingest::read_dma_csv(&train)
                .map_err(|e| HarnessError::Input(format!("{}: {e}", train.display())))?;
            let (cleaned, clean_report) = ingest::clean(records, CleanParams::default());
            let mut chain = report;
            chain.chain(&clean_report);
            let config = ModelConfig {
                cell_size_deg: cell_size,
                max_components: components,
                seed,
                ..Default::default()
            };
            let mut trained = anomaly::train(cleaned.iter(), &config).map_err(to_stage("train"))?;
            anomaly::calibrate_threshold(&mut trained, cleaned.iter(), calibrate_quantile)
                .map_err(to_stage("calibrate"))?;
            std::fs::write(&model, anomaly::serialize(&trained)).map_err(to_stage("model-save"))?;
            println!(
                "trained on {} records ({} cells), threshold {:?}, saved {}",
                trained.trained_count,
                trained.cell_count(),
                trained.score_threshold,
                model.display()
            );
            Ok(0)
        }
        Command::DecodeNmea {
            input,
            format,
            dump_json,
        } => {
            let format: InputFormat =
                format
                    .parse()
                    .map_err(|e: vesseledge::harness::ConfigError| {
                        HarnessError::Config(e.to_string())
                    })?;
            let (records, mut report) = match format {
                InputFormat::Nmea => {
                    let file = std::fs::File::open(&input)
                        .map_err(|e| HarnessError::Input(format!("{}: {e}", input.display())))?;
                    ingest::read_nmea(std::io::BufReader::new(file), None)
                        .map_err(|e| HarnessError::Input(e.to_string()))?
                }
                InputFormat::Csv => ingest::read_dma_csv(&input)
                    .map_err(|e| HarnessError::Input(format!("{}: {e}", input.display())))?,
            };
            let (cleaned, clean_report) = ingest::clean(records, CleanParams::default());
            report.chain(&clean_report);
            if let Some(path) = dump_json {
                let mut file = std::fs::File::create(&path).map_err(to_stage("dump-json"))?;
                ingest::dump_json(&cleaned, &mut file).map_err(to_stage("dump-json"))?;
            }
            print!("{}", report.to_csv());
            Ok(0)
        }
        Command::GenData {
            out,
            kind,
            vessels,
            anomalous,
            duration,
            seed,
        } => {
            std::fs::create_dir_all(&out).map_err(to_stage("setup"))?;
            let cfg = synth::SynthConfig {
                vessels,
                anomalous_vessels: anomalous,
                duration_s: duration,
                seed,
                ..Default::default()
            };
            let records = synth::generate_day(&cfg);
            let mut written = Vec::new();
            if kind == "dma" || kind == "both" {
                let path = out.join("day.csv");
                let mut file = std::fs::File::create(&path).map_err(to_stage("gen-data"))?;
                synth::write_dma_csv(&records, &mut file).map_err(to_stage("gen-data"))?;
                written.push(path);
            }
            if kind == "nmea" || kind == "both" {
                let path = out.join("day.nmea");
                let sentences = synth::to_nmea_sentences(&records, 500);
                std::fs::write(&path, sentences.join("\n") + "\n").map_err(to_stage("gen-data"))?;
                written.push(path);
            }
            if written.is_empty() {
                return Err(HarnessError::Config(format!("unknown kind {kind:?}")));
            }
            println!(
                "generated {} records from {} vessels ({} anomalous)",
                records.len(),
                vessels,
                anomalous
            );
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
    }
}

fn to_stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Stage {
        stage: name,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
