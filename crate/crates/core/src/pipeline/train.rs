use std::fmt::Write as _;
use std::path::PathBuf;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use crate::analysis::{dct_coefficients, implied_log_intensity};
use crate::error::{Error, Result};
use crate::gmm::{em_train, write_gmm, EmConfig};
use crate::net::{
    pretrain_autoencoder, pretrain_dlp, train, train_with_validation, write_net, EpochStats, FeedForwardNet, NetModel, Standardizer,
    TrainConfig, TrainOutcome,
};
use crate::prosody::{
    build_duration_samples, build_f0_training_set, build_intensity_training_set, column_of, f0_frame_features, write_meanvar,
    AlignedProsody, F0Scale, MeanVarStats,
};

use super::config::{ExperimentConfig, System};
use super::data::{load_aligned, mcep_input, spectral_input, AlignedUtt};
use super::layout::{create_dir, write_text, Workspace};
use super::manifest::read_splits;

pub const GMM_FILE: &str = "gmm.vcgm";
pub const NET_FILE: &str = "net.vcnn";
pub const MEANVAR_FILE: &str = "meanvar.txt";
pub const CALIBRATION_FILE: &str = "intensity_offset.txt";
pub const LOG_FILE: &str = "train.log";
pub const META_FILE: &str = "run.meta";

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub system: System,
    pub model_dir: PathBuf,
    pub training_rows: usize,
}

struct TrainLog(String);

impl TrainLog {
    fn phase(&mut self, name: &str, epochs: &[EpochStats]) {
        let _ = writeln!(self.0, "phase {name} epochs {}", epochs.len());
        for (i, e) in epochs.iter().enumerate() {
            let _ = write!(self.0, "{name} epoch {} train_mse {:.9e}", i + 1, e.train_mse);
            if let Some(v) = e.validation_mse {
                let _ = write!(self.0, " validation_mse {v:.9e}");
            }
            self.0.push('\n');
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.0.push_str(text.as_ref());
        self.0.push('\n');
    }
}

/// Rows of `m` at `idx`.
fn rows(m: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(0), idx)
}

fn stack(parts: Vec<Array2<f64>>) -> Array2<f64> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).expect("matching widths")
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

/// Supervised fit, holding out the final tenth of the rows for early
/// stopping when the config asks for patience.
fn fit(net: FeedForwardNet, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<TrainOutcome> {
    if config.patience.is_some() && x.nrows() >= 20 {
        let cut = x.nrows() - x.nrows() / 10;
        train_with_validation(
            net,
            x.slice(s![..cut, ..]),
            y.slice(s![..cut, ..]),
            x.slice(s![cut.., ..]),
            y.slice(s![cut.., ..]),
            config,
        )
    } else {
        train(net, x, y, config)
    }
}

fn with_seed(config: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..config.clone() }
}

fn train_spectral(system: System, data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let sp = &config.spectral;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut source_only = Vec::new();
    for u in data {
        let input = spectral_input(&u.source.envelope, &u.source.f0)?;
        xs.push(rows(input.view(), &u.source_indices()));
        ys.push(rows(u.target.envelope.data().view(), &u.target_indices()));
        source_only.push(input);
    }
    let (x, y) = (stack(xs), stack(ys));
    // every input column is log-spectral, so one shared scale keeps the
    // quiet delta and high-frequency columns from being blown up to unit
    // variance
    let input_norm = Standardizer::fit_shared_scale(x.view())?;
    let output_norm = Standardizer::fit_shared_scale(y.view())?;
    let xn = input_norm.apply(x.view());
    let yn = output_norm.apply(y.view());
    let bins = y.ncols();
    let mut net = FeedForwardNet::init_random(&dims(x.ncols(), &sp.hidden, bins), config.derived_seed(system, 0))?;
    match system {
        System::DnnSpAutoencoder => {
            let src = stack(source_only);
            let src_n = input_norm.apply(src.view());
            let recon = output_norm.apply(src.slice(s![.., ..bins]));
            let cfg = with_seed(&sp.pretrain, config.derived_seed(system, 1));
            let out = pretrain_autoencoder(net, src_n.view(), recon.view(), &cfg)?;
            log.phase("pretrain-autoencoder", &out.epochs);
            net = out.net;
        }
        System::DnnSpDlp => {
            let cfg = TrainConfig {
                max_epochs: sp.dlp_stage_epochs,
                seed: config.derived_seed(system, 1),
                ..sp.finetune.clone()
            };
            let out = pretrain_dlp(net, xn.view(), yn.view(), &cfg)?;
            log.phase("pretrain-dlp", &out.epochs);
            net = out.net;
        }
        _ => {}
    }
    let out = fit(net, xn.view(), yn.view(), &with_seed(&sp.finetune, config.derived_seed(system, 2)))?;
    log.phase("finetune", &out.epochs);
    write_net(&NetModel::new(out.net, input_norm, output_norm)?, dir.join(NET_FILE))?;
    Ok(x.nrows())
}

fn train_mcep(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let order = config.gmm.order;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for u in data {
        let input = mcep_input(&u.source.envelope, &u.source.f0, order)?;
        let target = dct_coefficients(&u.target.envelope, order)?;
        xs.push(rows(input.view(), &u.source_indices()));
        ys.push(rows(target.data().view(), &u.target_indices()));
    }
    let (x, y) = (stack(xs), stack(ys));
    let model = fit_net(
        System::DnnMcep,
        x.view(),
        y.view(),
        &config.spectral.mcep_hidden,
        &config.spectral.finetune,
        config,
        log,
    )?;
    write_net(&model, dir.join(NET_FILE))?;
    Ok(x.nrows())
}

fn fit_net(
    system: System,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    hidden: &[usize],
    train_config: &TrainConfig,
    config: &ExperimentConfig,
    log: &mut TrainLog,
) -> Result<NetModel> {
    let input_norm = Standardizer::fit(x)?;
    let output_norm = Standardizer::fit_shared_scale(y)?;
    let net = FeedForwardNet::init_random(&dims(x.ncols(), hidden, y.ncols()), config.derived_seed(system, 0))?;
    let xn = input_norm.apply(x);
    let yn = output_norm.apply(y);
    let out = fit(net, xn.view(), yn.view(), &with_seed(train_config, config.derived_seed(system, 2)))?;
    log.phase("train", &out.epochs);
    NetModel::new(out.net, input_norm, output_norm)
}

fn train_gmm(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let order = config.gmm.order;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for u in data {
        xs.push(rows(dct_coefficients(&u.source.envelope, order)?.data().view(), &u.source_indices()));
        ys.push(rows(dct_coefficients(&u.target.envelope, order)?.data().view(), &u.target_indices()));
    }
    let (x, y) = (stack(xs), stack(ys));
    let em = EmConfig {
        max_iterations: config.gmm.max_iterations,
        tolerance: config.gmm.tolerance,
        variance_floor: config.gmm.variance_floor,
        seed: config.derived_seed(System::JdGmm, 0),
    };
    let out = em_train(x.view(), y.view(), config.gmm.components, &em)?;
    log.line(format!("phase em iterations {}", out.log_likelihoods.len()));
    for (i, ll) in out.log_likelihoods.iter().enumerate() {
        log.line(format!("em iteration {} log_likelihood {ll:.9e}", i + 1));
    }
    write_gmm(&out.model, dir.join(GMM_FILE))?;
    Ok(x.nrows())
}

/// F0 column in the modelling scale, zero on unvoiced frames.
pub(crate) fn scaled_f0(u: &crate::featio::FeatureTrack, scale: F0Scale) -> Result<Array1<f64>> {
    let f = column_of(u, "f0", 0)?;
    let v = column_of(u, "vuv", 1)?;
    Ok(u.data()
        .rows()
        .into_iter()
        .map(|r| if r[v] > 0.5 && r[f] > 0.0 { scale.to_model(r[f]) } else { 0.0 })
        .collect())
}

fn meanvar(data: &[AlignedUtt], scale: F0Scale) -> Result<MeanVarStats> {
    MeanVarStats::from_tracks(data.iter().map(|u| &u.source.f0), data.iter().map(|u| &u.target.f0), scale)
}

fn train_f0_segment(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let p = &config.prosody;
    let stats = meanvar(data, p.f0_scale)?;
    let values: Vec<(Array1<f64>, Array1<f64>)> = data
        .iter()
        .map(|u| Ok((scaled_f0(&u.source.f0, p.f0_scale)?, scaled_f0(&u.target.f0, p.f0_scale)?)))
        .collect::<Result<_>>()?;
    let items: Vec<AlignedProsody<'_>> = data
        .iter()
        .zip(&values)
        .map(|(u, (sv, tv))| AlignedProsody {
            source_vuv: u.source.f0.column(1),
            target_vuv: u.target.f0.column(1),
            source_values: sv.view(),
            target_values: tv.view(),
            path: &u.path,
        })
        .collect();
    let set = build_f0_training_set(&items, p.segment_length)?;
    log.line(format!("segments paired {} dropped {}", set.inputs.nrows(), set.dropped));
    let model = fit_net(System::F0DnnSegment, set.inputs.view(), set.targets.view(), &p.hidden, &p.train, config, log)?;
    write_net(&model, dir.join(NET_FILE))?;
    write_meanvar(&stats, dir.join(MEANVAR_FILE))?;
    Ok(set.inputs.nrows())
}

fn train_f0_frame(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let p = &config.prosody;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for u in data {
        let feats = f0_frame_features(&dct_coefficients(&u.source.envelope, config.gmm.order)?, &u.source.f0, p.f0_scale)?;
        let sv = scaled_f0(&u.source.f0, p.f0_scale)?;
        let tv = scaled_f0(&u.target.f0, p.f0_scale)?;
        let (si, ti): (Vec<usize>, Vec<usize>) = u.path.iter().filter(|&&(s, t)| sv[s] > 0.0 && tv[t] > 0.0).copied().unzip();
        xs.push(rows(feats.view(), &si));
        ys.push(tv.select(Axis(0), &ti).insert_axis(Axis(1)));
    }
    let (x, y) = (stack(xs), stack(ys));
    if x.nrows() == 0 {
        return Err(Error::Training("no frame is voiced on both sides of the alignment".into()));
    }
    let model = fit_net(System::F0DnnFrame, x.view(), y.view(), &p.frame_hidden, &p.frame_train, config, log)?;
    write_net(&model, dir.join(NET_FILE))?;
    Ok(x.nrows())
}

fn train_intensity(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let p = &config.prosody;
    let items: Vec<AlignedProsody<'_>> = data
        .iter()
        .map(|u| AlignedProsody {
            source_vuv: u.source.f0.column(1),
            target_vuv: u.target.f0.column(1),
            source_values: u.source.intensity.column(0),
            target_values: u.target.intensity.column(0),
            path: &u.path,
        })
        .collect();
    let set = build_intensity_training_set(&items, p.segment_length)?;
    log.line(format!("segments paired {} dropped {}", set.inputs.nrows(), set.dropped));
    // offset between measured intensity and the level implied by the envelope
    let (mut sum, mut n) = (0.0, 0usize);
    for u in data {
        for (t, voiced) in u.target.vuv().into_iter().enumerate() {
            if voiced {
                sum += u.target.intensity.data()[[t, 0]] - implied_log_intensity(u.target.envelope.row(t));
                n += 1;
            }
        }
    }
    let offset = if n > 0 { sum / n as f64 } else { 0.0 };
    let model = fit_net(System::IntensityDnnSegment, set.inputs.view(), set.targets.view(), &p.hidden, &p.train, config, log)?;
    write_net(&model, dir.join(NET_FILE))?;
    write_text(&dir.join(CALIBRATION_FILE), &format!("{offset:?}\n"))?;
    Ok(set.inputs.nrows())
}

fn train_duration(data: &[AlignedUtt], config: &ExperimentConfig, log: &mut TrainLog, dir: &std::path::Path) -> Result<usize> {
    let p = &config.prosody;
    let mut inputs = Vec::new();
    let mut ratios = Vec::new();
    for u in data {
        for sample in build_duration_samples(&u.source.envelope, &u.source.phones, &u.target.phones, p.duration_frames)? {
            inputs.push(sample.input.insert_axis(Axis(0)));
            ratios.push(sample.ratio);
        }
    }
    if inputs.is_empty() {
        return Err(Error::Training("no phone is long enough for duration training".into()));
    }
    let x = stack(inputs);
    let y = Array2::from_shape_vec((ratios.len(), 1), ratios).expect("one ratio per row");
    let model = fit_net(System::DurationDnn, x.view(), y.view(), &p.duration_hidden, &p.duration_train, config, log)?;
    write_net(&model, dir.join(NET_FILE))?;
    Ok(x.nrows())
}

/// Trains `config.system` on the training list and writes its model files,
/// `train.log` and `run.meta` under `models/<system>/`.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainSummary> {
    config.validate()?;
    let system = config.system;
    let (train_ids, _) = read_splits(&config.train_list, &config.test_list)?;
    if train_ids.is_empty() {
        return Err(Error::Config("training list is empty".into()));
    }
    let ws = Workspace::new(config.workdir());
    let data = load_aligned(&ws, &train_ids, config)?;
    let dir = ws.model_dir(system);
    create_dir(&dir)?;
    let mut log = TrainLog(String::new());
    log.line(format!("system {system}"));
    log.line(format!("utterances {}", data.len()));
    let rows = match system {
        System::JdGmm => train_gmm(&data, config, &mut log, &dir),
        System::DnnMcep => train_mcep(&data, config, &mut log, &dir),
        System::DnnSpRandom | System::DnnSpDlp | System::DnnSpAutoencoder => train_spectral(system, &data, config, &mut log, &dir),
        System::F0MeanVar => {
            let stats = meanvar(&data, config.prosody.f0_scale)?;
            write_meanvar(&stats, dir.join(MEANVAR_FILE))?;
            Ok(data.iter().map(|u| u.source.f0.frames()).sum())
        }
        System::F0DnnFrame => train_f0_frame(&data, config, &mut log, &dir),
        System::F0DnnSegment => train_f0_segment(&data, config, &mut log, &dir),
        System::IntensityDnnSegment => train_intensity(&data, config, &mut log, &dir),
        System::DurationDnn => train_duration(&data, config, &mut log, &dir),
    }
    .map_err(|e| e.in_stage(format!("train {system}")))?;
    log.line(format!("training rows {rows}"));
    write_text(&dir.join(LOG_FILE), &log.0)?;
    let meta = format!(
        "system = {system}\nseed = {}\nconfig_sha256 = {}\nversion = {}\ndeterministic = {}\n",
        config.seed,
        config.hash(),
        env!("CARGO_PKG_VERSION"),
        config.deterministic
    );
    write_text(&dir.join(META_FILE), &meta)?;
    write_text(&dir.join("config.toml"), &config.to_toml())?;
    log::info!("trained {system} on {rows} rows");
    Ok(TrainSummary {
        system,
        model_dir: dir,
        training_rows: rows,
    })
}
