use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use vcforge::pipeline::{self, ExperimentConfig, Overrides, SyntheticOptions, System};
use vcforge::Error;

#[derive(Parser)]
#[command(name = "vcforge", version, about = "Voice conversion with deep spectral mapping and segment-level prosody")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract envelope, F0/VUV and intensity tracks for every manifest entry.
    Extract(Common),
    /// Compute and store source/target frame alignments.
    Align(Common),
    /// Train the selected system.
    Train(Common),
    /// Convert the test utterances.
    Convert(Common),
    /// Score converted utterances against the target speaker.
    Evaluate(Common),
    /// Write a seeded synthetic parallel corpus and its experiment config.
    MakeSynthetic(Synthetic),
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// System to train; for `convert` and `evaluate` it replaces the
    /// spectral or F0 system of the conversion chain.
    #[arg(long)]
    system: Option<System>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    /// Recompute outputs that already exist.
    #[arg(long)]
    force: bool,
    /// Keep the source envelope instead of converting it.
    #[arg(long)]
    no_spectral: bool,
    #[arg(long)]
    no_f0: bool,
    #[arg(long)]
    no_intensity: bool,
    #[arg(long)]
    no_duration: bool,
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Args)]
struct Synthetic {
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    utterances: usize,
    #[arg(long, default_value_t = 30)]
    train: usize,
}

/// Outcome of a command that processes utterances independently.
enum Outcome {
    Ok,
    Partial,
}

fn load(common: &Common, chain: bool) -> vcforge::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    let overrides = Overrides {
        system: if chain { None } else { common.system },
        seed: common.seed,
        jobs: common.jobs,
        deterministic: common.deterministic,
        workdir: common.workdir.clone(),
        no_f0: common.no_f0,
        no_intensity: common.no_intensity,
        no_duration: common.no_duration,
    };
    config.apply(&overrides);
    if common.no_spectral {
        config.convert.spectral_system = None;
    }
    if chain {
        match common.system {
            Some(s) if s.is_spectral() => config.convert.spectral_system = Some(s),
            Some(s) if s.is_f0() => config.convert.f0_system = Some(s),
            Some(s) => return Err(Error::Config(format!("{s} is not a conversion-chain system"))),
            None => {}
        }
    }
    config.validate()?;
    Ok(config)
}

fn report_failures(failures: &[(String, Error)]) -> Outcome {
    for (id, e) in failures {
        error!("{id}: {e}");
    }
    if failures.is_empty() {
        Outcome::Ok
    } else {
        warn!("{} utterance(s) failed", failures.len());
        Outcome::Partial
    }
}

fn run(cli: Cli) -> vcforge::Result<Outcome> {
    match cli.command {
        Command::Extract(c) => {
            let config = load(&c, false)?;
            let s = pipeline::cmd_extract(&config, c.force)?;
            info!("extract: {} files written, {} utterances already complete", s.files_written, s.utterances_skipped);
            Ok(report_failures(&s.failures))
        }
        Command::Align(c) => {
            let config = load(&c, false)?;
            let (train, test) = pipeline::read_splits(&config.train_list, &config.test_list)?;
            let ids: Vec<String> = train.into_iter().chain(test).collect();
            let n = pipeline::cmd_align(&config, &ids)?;
            info!("align: {n} utterances");
            Ok(Outcome::Ok)
        }
        Command::Train(c) => {
            let config = load(&c, false)?;
            let s = pipeline::cmd_train(&config)?;
            info!("train: {} on {} rows -> {}", s.system, s.training_rows, s.model_dir.display());
            Ok(Outcome::Ok)
        }
        Command::Convert(c) => {
            let config = load(&c, true)?;
            let s = pipeline::cmd_convert(&config, None)?;
            info!("convert: {} utterances -> {}", s.converted, s.name);
            Ok(report_failures(&s.failures))
        }
        Command::Evaluate(c) => {
            let config = load(&c, true)?;
            let report = pipeline::cmd_evaluate(&config, &config.convert.output_name())?;
            print!("{}", report.to_text());
            if report.skipped.is_empty() {
                Ok(Outcome::Ok)
            } else {
                warn!("skipped: {}", report.skipped.join(" "));
                Ok(Outcome::Partial)
            }
        }
        Command::MakeSynthetic(s) => {
            let opts = SyntheticOptions {
                utterances: s.utterances,
                train: s.train,
                seed: s.seed,
                ..SyntheticOptions::default()
            };
            let corpus = pipeline::make_synthetic(&s.out, &opts)?;
            info!("make-synthetic: {} train / {} test -> {}", corpus.train_ids.len(), corpus.test_ids.len(), corpus.config.display());
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            match e.root() {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
