//! Command-line surface: enhancement (batch and streaming), latency
//! accounting, the causality probe, metrics/losses, per-frame timing, and
//! weight initialization. All reports are one `key=value` pair per line so
//! scripts and tests can parse them without regexes. On failure a single
//! `error=<Code> <message>` line goes to stderr and the exit code is 1.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tcn_enhance::dsp::DspError;
use tcn_enhance::io::{
    load_weights_checked, parse_run_config, read_wav, save_weights, write_wav, IoError, RunConfig,
};
use tcn_enhance::loss::{
    create_loss, si_snr_metric, ssnr_metric, LossError, LOSS_NAMES,
};
use tcn_enhance::model::{init_random, ModelError, RuntimeModel};
use tcn_enhance::signal::AudioSignal;
use tcn_enhance::streaming::{analyze_latency, bench_per_frame, probe_causality, StreamError};
use tcn_enhance::tcn::TcnError;

#[derive(Parser)]
#[command(name = "tcn-enhance", version, about = "Streaming TCN speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a WAV file offline.
    Enhance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_speech: PathBuf,
        #[arg(long)]
        out_noise: Option<PathBuf>,
    },
    /// Enhance a WAV file by streaming it hop by hop; output matches
    /// `enhance` sample for sample.
    Stream {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_speech: PathBuf,
        #[arg(long)]
        out_noise: Option<PathBuf>,
    },
    /// Print the look-ahead accounting for a config.
    Latency {
        #[arg(long)]
        config: PathBuf,
    },
    /// Measure true future dependence from single-sample perturbations.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
    },
    /// Quality metrics (and optionally a loss) between two WAV files.
    Metrics {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        est: PathBuf,
        /// One of: sisnr, snr, pcmse, pasemse.
        #[arg(long)]
        loss: Option<String>,
        /// Optional run config supplying loss parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Time per-hop streaming inference over seeded noise.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Create seeded random weights for a config.
    InitWeights {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    fn usage(message: String) -> Self {
        Self { code: "InvalidArguments", message }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match &e {
            IoError::UnsupportedChannels(_) => "UnsupportedChannels",
            IoError::UnsupportedRate(_) => "UnsupportedRate",
            IoError::UnsupportedEncoding => "UnsupportedEncoding",
            IoError::MalformedWav(_) => "MalformedWav",
            IoError::MalformedContainer(_) => "MalformedContainer",
            IoError::WeightsConfigMismatch(_) => "WeightsConfigMismatch",
            IoError::ConfigParse { .. } => "ConfigParse",
            IoError::Io(_) => "Io",
        };
        Self { code, message: e.to_string() }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::SampleRateMismatch { .. } => "SampleRateMismatch",
            ModelError::InvalidConfig(_) => "InvalidConfig",
            ModelError::WeightsConfigMismatch(_) => "WeightsConfigMismatch",
            ModelError::ShapeMismatch(_) => "ShapeMismatch",
            ModelError::Dsp(d) => return CliError::from_dsp(d),
            ModelError::Tcn(t) => return CliError::from_tcn(t),
        };
        Self { code, message: e.to_string() }
    }
}

impl CliError {
    fn from_dsp(e: &DspError) -> Self {
        let code = match e {
            DspError::EmptyInput => "EmptyInput",
            DspError::NonFiniteInput(_) => "NonFiniteInput",
            DspError::InvalidConfig(_) => "InvalidConfig",
            DspError::InvalidBasisSize(_) => "InvalidBasisSize",
            DspError::LayoutMismatch { .. } => "LayoutMismatch",
        };
        Self { code, message: e.to_string() }
    }

    fn from_tcn(e: &TcnError) -> Self {
        let code = match e {
            TcnError::ShapeMismatch { .. } => "ShapeMismatch",
            TcnError::NumericalDivergence { .. } => "NumericalDivergence",
            TcnError::InvalidConfig(_) => "InvalidConfig",
        };
        Self { code, message: e.to_string() }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::ChunkSizeMismatch { .. } => {
                Self { code: "ChunkSizeMismatch", message: e.to_string() }
            }
            StreamError::Model(m) => m.into(),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        let code = match &e {
            LossError::LengthMismatch { .. } => "LengthMismatch",
            LossError::SourceCountMismatch { .. } => "SourceCountMismatch",
            LossError::DegenerateReference => "DegenerateReference",
            LossError::GradientUndefined(_) => "GradientUndefined",
            LossError::GradientUnavailable(_) => "GradientUnavailable",
            LossError::ExtractorInconsistent(_) => "ExtractorInconsistent",
            LossError::UnknownLoss(_) => "UnknownLoss",
            LossError::Dsp(d) => return CliError::from_dsp(d),
        };
        Self { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error={} {}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn load_model(config: &Path, weights: &Path) -> Result<(RunConfig, RuntimeModel), CliError> {
    let run = parse_run_config(config)?;
    let w = load_weights_checked(weights, &run.model)?;
    let model = RuntimeModel::new(run.model, &w)?;
    Ok((run, model))
}

fn write_outputs(
    model: &RuntimeModel,
    sources: &[AudioSignal],
    out_speech: &Path,
    out_noise: &Option<PathBuf>,
) -> Result<(), CliError> {
    if out_noise.is_some() && model.config.num_sources() < 2 {
        return Err(CliError::usage(
            "--out-noise requires a config with num_sources = 2".into(),
        ));
    }
    write_wav(out_speech, &sources[0])?;
    println!("out_speech={}", out_speech.display());
    if let Some(path) = out_noise {
        write_wav(path, &sources[1])?;
        println!("out_noise={}", path.display());
    }
    println!("samples={}", sources[0].len());
    println!("sources={}", sources.len());
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Enhance { config, weights, input, out_speech, out_noise } => {
            let (_, model) = load_model(&config, &weights)?;
            let x = read_wav(&input)?;
            let sources = model.enhance(&x)?;
            write_outputs(&model, &sources, &out_speech, &out_noise)
        }
        Command::Stream { config, weights, input, out_speech, out_noise } => {
            let (_, model) = load_model(&config, &weights)?;
            let x = read_wav(&input)?;
            let hop = model.config.hop();
            let mut session = model.stream();
            let mut outs: Vec<Vec<f64>> = vec![Vec::new(); model.config.num_sources()];
            let mut i = 0;
            while i + hop <= x.len() {
                if let Some(hop_out) = session.push(&x.samples[i..i + hop])? {
                    for (o, h) in outs.iter_mut().zip(hop_out) {
                        o.extend(h);
                    }
                }
                i += hop;
            }
            for (o, t) in outs.iter_mut().zip(session.flush(&x.samples[i..])?) {
                o.extend(t);
            }
            let sources: Vec<AudioSignal> =
                outs.into_iter().map(|s| AudioSignal::new(s, x.sample_rate)).collect();
            write_outputs(&model, &sources, &out_speech, &out_noise)
        }
        Command::Latency { config } => {
            let run = parse_run_config(&config)?;
            let report = analyze_latency(&run.model);
            println!("future_frames={}", report.future_frames);
            println!("conv_frames={}", report.conv_frames);
            println!("framing_frames={}", report.framing_frames);
            println!("hop_ms={}", report.hop_ms);
            println!("lookahead_ms={}", report.lookahead_ms);
            println!("pipeline_delay_frames={}", report.pipeline_delay_frames);
            println!("convention={}", report.convention);
            Ok(())
        }
        Command::Probe { config, weights } => {
            let (run, model) = load_model(&config, &weights)?;
            let probe = probe_causality(&model)?;
            let declared = analyze_latency(&run.model);
            println!("measured_frames={}", probe.measured_frames);
            println!("conv_frames={}", probe.conv_frames);
            println!("max_sample_gap={}", probe.max_sample_gap);
            println!("declared_frames={}", declared.future_frames);
            Ok(())
        }
        Command::Metrics { clean, est, loss, config } => {
            let loss_cfg = match &config {
                Some(path) => parse_run_config(path)?.loss,
                None => Default::default(),
            };
            let c = read_wav(&clean)?;
            let e = read_wav(&est)?;
            let si = si_snr_metric(&c, &e)?;
            let ssnr = ssnr_metric(&c, &e)?;
            println!("si_snr_db={si}");
            println!("ssnr_db={ssnr}");
            let mut perfect = si.is_infinite();
            if let Some(name) = loss {
                if !LOSS_NAMES.contains(&name.as_str()) {
                    return Err(LossError::UnknownLoss(name).into());
                }
                let loss_fn = create_loss(&name, &loss_cfg)?;
                let report = loss_fn.evaluate(
                    std::slice::from_ref(&c),
                    std::slice::from_ref(&e),
                )?;
                println!("loss={name}");
                println!("loss_value={}", report.value);
                perfect |= report.any_perfect();
            }
            println!("status={}", if perfect { "perfect_estimate" } else { "ok" });
            Ok(())
        }
        Command::Bench { config, weights, seconds, seed } => {
            let (_, model) = load_model(&config, &weights)?;
            let len = (seconds * model.config.sample_rate as f64).round() as usize;
            let noise = AudioSignal::seeded_noise(len, model.config.sample_rate, 0.5, seed);
            let report = bench_per_frame(&model, &noise)?;
            println!("hop_ms={}", report.hop_ms);
            println!("frames={}", report.frames);
            println!("mean_ms={}", report.mean_ms);
            println!("std_ms={}", report.std_ms);
            println!("p50_ms={}", report.p50_ms);
            println!("p95_ms={}", report.p95_ms);
            println!("max_ms={}", report.max_ms);
            Ok(())
        }
        Command::InitWeights { config, seed, out } => {
            let run = parse_run_config(&config)?;
            let seed = seed.unwrap_or(run.seed);
            let weights = init_random(&run.model, seed);
            save_weights(&out, &weights)?;
            println!("out={}", out.display());
            println!("seed={seed}");
            println!("tensors={}", weights.tensors.len());
            println!("params={}", weights.total_params());
            Ok(())
        }
    }
}
