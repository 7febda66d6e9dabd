//! posefuse command line: fuse, smooth, eval, synth.
//!
//! Exit codes: 0 on success, 1 on input/config errors, 2 on numerical
//! failures (degenerate geometry, undefined metrics, non-finite values).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use posefuse::error::Error;
use posefuse::io::{
    load_points, load_sequence, save_sequence, write_traces_csv, PipelineConfig, Timing,
};
use posefuse::metrics::RegionMask;
use posefuse::pipeline::{evaluate_points, evaluate_sequences, run_pipeline, Evaluation};
use posefuse::{Sequence, StageToggles};

#[derive(Parser)]
#[command(
    name = "posefuse",
    version,
    about = "Kinematic fusion of body, hand, and 2D keypoint estimates"
)]
struct Cli {
    /// Log verbosity (debug enables per-frame timing).
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the fusion pipeline over a sequence file.
    Fuse {
        #[arg(long)]
        input: PathBuf,
        /// Pipeline config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply only the temporal smoothing stage.
    Smooth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate a prediction against ground truth (sequence or points files).
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Region mask JSON ({"body": [...], "left_hand": [...], "right_hand": [...]});
        /// derived from the tree for sequence inputs when omitted.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Optional per-frame CSV traces (frame,jitter,deviation).
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Generate a synthetic ground-truth/corrupted sequence pair.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_gt: PathBuf,
        #[arg(long)]
        out_corrupted: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NumericalFailure(_) | Error::DegenerateGeometry(_) | Error::UndefinedMetric(_) => 2,
        _ => 1,
    }
}

fn load_config(path: &Option<PathBuf>) -> posefuse::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

/// `eval` accepts either a sequence file or a raw points file; sniff by the
/// top-level keys.
enum EvalInput {
    Sequence(Box<Sequence>),
    Points(posefuse::io::PointsFile),
}

fn load_eval_input(path: &PathBuf) -> posefuse::Result<EvalInput> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if value.get("points").is_some() {
        Ok(EvalInput::Points(load_points(path)?))
    } else {
        Ok(EvalInput::Sequence(Box::new(load_sequence(path)?)))
    }
}

fn run_eval(
    pred: &PathBuf,
    gt: &PathBuf,
    regions: &Option<PathBuf>,
    report_path: &PathBuf,
    traces: &Option<PathBuf>,
) -> posefuse::Result<()> {
    let start = Instant::now();
    let mask: Option<RegionMask> = match regions {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                message: e.to_string(),
            })?)
        }
        None => None,
    };
    let mut eval: Evaluation = match (load_eval_input(pred)?, load_eval_input(gt)?) {
        (EvalInput::Sequence(p), EvalInput::Sequence(g)) => {
            evaluate_sequences(&p, &g, mask.as_ref())?
        }
        (EvalInput::Points(p), EvalInput::Points(g)) => {
            let mask = mask.ok_or_else(|| {
                Error::InvalidArgument("--regions is required for points inputs".into())
            })?;
            evaluate_points(&p.to_vectors(), &g.to_vectors(), &g.boundaries, &mask, None)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "--pred and --gt must both be sequences or both be points files".into(),
            ))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    eval.report.timing = Timing {
        seconds,
        seconds_per_frame: seconds / eval.report.frames.max(1) as f64,
    };
    eval.report.save(report_path)?;
    if let Some(traces_path) = traces {
        write_traces_csv(traces_path, &eval.jitter_trace, &eval.deviation_trace)?;
    }
    println!(
        "evaluated {} frames -> {}",
        eval.report.frames,
        report_path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> posefuse::Result<()> {
    match &cli.command {
        Command::Fuse {
            input,
            config,
            output,
        } => {
            let cfg = load_config(config)?;
            let seq = load_sequence(input)?;
            let start = Instant::now();
            let out = run_pipeline(&seq, &cfg)?;
            log::info!(
                "fused {} frames in {:.3} s ({} degraded)",
                out.sequence.frames.len(),
                start.elapsed().as_secs_f64(),
                out.frame_issues.len()
            );
            for issue in &out.frame_issues {
                log::warn!(
                    "frame {}{}: {}",
                    issue.frame,
                    issue
                        .side
                        .map(|s| format!(" ({s} hand)"))
                        .unwrap_or_default(),
                    issue.message
                );
            }
            save_sequence(&out.sequence, output)?;
            println!(
                "wrote {} frames -> {}",
                out.sequence.frames.len(),
                output.display()
            );
            Ok(())
        }
        Command::Smooth {
            input,
            config,
            output,
        } => {
            let mut cfg = load_config(config)?;
            cfg.stages = StageToggles {
                smooth: true,
                ..StageToggles::none()
            };
            let seq = load_sequence(input)?;
            let out = run_pipeline(&seq, &cfg)?;
            save_sequence(&out.sequence, output)?;
            println!(
                "smoothed {} frames -> {}",
                out.sequence.frames.len(),
                output.display()
            );
            Ok(())
        }
        Command::Eval {
            pred,
            gt,
            regions,
            report,
            traces,
        } => run_eval(pred, gt, regions, report, traces),
        Command::Synth {
            spec,
            out_gt,
            out_corrupted,
        } => {
            let spec = posefuse::SynthSpec::load(spec)?;
            let out = posefuse::synth::generate(&spec)?;
            save_sequence(&out.ground_truth, out_gt)?;
            save_sequence(&out.corrupted, out_corrupted)?;
            println!(
                "generated {} frames -> {} / {}",
                spec.frames,
                out_gt.display(),
                out_corrupted.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level.filter())
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
