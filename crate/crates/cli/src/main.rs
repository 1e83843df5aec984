use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qoekit::{
    cmd_ingest, cmd_plot_data, cmd_predict, cmd_synthesize, cmd_train, CliError, IngestStatus, Kpis, PipelineConfig,
};

#[derive(Parser)]
#[command(name = "qoekit", version, about = "Build QoE datasets and train MOS predictors")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract segment timings and stalls from HAR captures.
    Ingest {
        #[arg(required = true)]
        har: Vec<PathBuf>,
        /// Regex selecting media segment URLs.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        segment_duration_ms: Option<u64>,
        /// JSON list of per-segment durations in ms.
        #[arg(long)]
        durations: Option<PathBuf>,
    },
    /// Generate a dataset by emulating sessions over network profiles.
    Synthesize {
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        sessions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the linear baseline and the random forest, and report metrics.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Predict MOS from the five network KPIs.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        delay: f64,
        #[arg(long, allow_negative_numbers = true)]
        bitrate: f64,
        #[arg(long, allow_negative_numbers = true)]
        jitter: f64,
        #[arg(long, allow_negative_numbers = true)]
        throughput: f64,
        /// Packet loss in percent.
        #[arg(long, allow_negative_numbers = true)]
        loss: f64,
    },
    /// Merge metrics files into a chart-ready CSV table.
    PlotData {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &cli.config {
        if !path.is_file() {
            return Err(CliError::MissingFile(path.clone()));
        }
        config.load_file(path)?;
    }
    config.apply_env(|k| std::env::var(k).ok());
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = build_config(&cli)?;
    match cli.command {
        Command::Ingest {
            har,
            pattern,
            segment_duration_ms,
            durations,
        } => {
            if let Some(p) = pattern {
                config.segment_pattern = p;
            }
            if let Some(d) = segment_duration_ms {
                config.segment_duration_ms = d;
            }
            let outcome = cmd_ingest(&har, durations.as_deref(), &config)?;
            for (path, status) in &outcome.files {
                match status {
                    IngestStatus::Ok {
                        capture_path,
                        segments,
                        startup_ms,
                        stalling,
                    } => println!(
                        "{}: {segments} segments, startup {startup_ms} ms, stalling {stalling} -> {}",
                        path.display(),
                        capture_path.display()
                    ),
                    IngestStatus::Failed(e) => println!("{}: failed: {e}", path.display()),
                }
            }
            println!("{} of {} files ingested", outcome.succeeded(), outcome.files.len());
        }
        Command::Synthesize { profiles, sessions, out } => {
            let o = cmd_synthesize(profiles.as_deref(), sessions, out.as_deref(), &config)?;
            println!("wrote {} rows to {} (sha256 {})", o.rows, o.path.display(), o.sha256);
        }
        Command::Train {
            dataset,
            test_fraction,
            trees,
        } => {
            if let Some(f) = test_fraction {
                if !(f > 0.0 && f < 1.0) {
                    return Err(CliError::Usage(format!("--test-fraction {f} must lie strictly between 0 and 1")));
                }
                config.test_fraction = f;
            }
            if let Some(n) = trees {
                config.forest.n_estimators = n;
            }
            let o = cmd_train(dataset.as_deref(), &config)?;
            print!("{}", o.report);
        }
        Command::Predict {
            model,
            delay,
            bitrate,
            jitter,
            throughput,
            loss,
        } => {
            let mos = cmd_predict(
                &model,
                Kpis {
                    delay_ms: delay,
                    bitrate_kbps: bitrate,
                    jitter_ms: jitter,
                    throughput_bps: throughput,
                    packet_loss_pct: loss,
                },
            )?;
            println!("{mos:.4}");
        }
        Command::PlotData { metrics, out } => {
            let (_, table) = cmd_plot_data(&metrics, out.as_deref(), &config)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
