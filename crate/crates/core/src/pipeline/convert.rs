use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::analysis::{dct_coefficients, dct_reconstruct, synthesize};
use crate::error::{format_err, validation, Error, Result};
use crate::featio::{write_phone_labels, write_track, write_wav, FeatureTrack};
use crate::gmm::{read_gmm, JointGmmModel};
use crate::net::{read_net, NetModel};
use crate::prosody::{
    apply_duration, apply_intensity, duration_inputs, f0_frame_features, f0_to_diff, read_meanvar, reconstruct_f0, segments_from_runs,
    voiced_runs, MeanVarStats,
};

use super::config::{ExperimentConfig, System};
use super::data::{mcep_input, spectral_input, UttFeatures};
use super::layout::{create_dir, read_text, Speaker, TrackKind, Workspace};
use super::manifest::read_splits;
use super::parallel_map;
use super::train::{scaled_f0, CALIBRATION_FILE, GMM_FILE, MEANVAR_FILE, NET_FILE};

enum SpectralModel {
    Source,
    Gmm(JointGmmModel),
    Mcep(NetModel),
    Full(NetModel),
}

enum F0Model {
    MeanVar(MeanVarStats),
    Frame(NetModel),
    Segment(NetModel, MeanVarStats),
}

/// Every model a conversion run needs, loaded once.
pub struct ConversionModels {
    spectral: SpectralModel,
    f0: Option<F0Model>,
    intensity: Option<(NetModel, f64)>,
    duration: Option<NetModel>,
}

fn load_net(dir: &Path) -> Result<NetModel> {
    read_net(dir.join(NET_FILE))
}

fn need(dir: &Path, system: System) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::State(format!("no trained {system} model in {}", dir.display())))
    }
}

impl ConversionModels {
    pub fn load(ws: &Workspace, config: &ExperimentConfig) -> Result<Self> {
        let c = &config.convert;
        let spectral = match c.spectral_system {
            None => SpectralModel::Source,
            Some(sys) => {
                let dir = ws.model_dir(sys);
                need(&dir, sys).map_err(|e| e.in_stage("spectral conversion"))?;
                match sys {
                    System::JdGmm => SpectralModel::Gmm(read_gmm(dir.join(GMM_FILE))?),
                    System::DnnMcep => SpectralModel::Mcep(load_net(&dir)?),
                    _ => SpectralModel::Full(load_net(&dir)?),
                }
            }
        };
        let f0 = match c.f0_system {
            None => None,
            Some(sys) => {
                let dir = ws.model_dir(sys);
                need(&dir, sys).map_err(|e| e.in_stage("F0 conversion"))?;
                Some(match sys {
                    System::F0MeanVar => F0Model::MeanVar(read_meanvar(dir.join(MEANVAR_FILE))?),
                    System::F0DnnFrame => F0Model::Frame(load_net(&dir)?),
                    _ => F0Model::Segment(load_net(&dir)?, read_meanvar(dir.join(MEANVAR_FILE))?),
                })
            }
        };
        let intensity = if c.intensity {
            let dir = ws.model_dir(System::IntensityDnnSegment);
            need(&dir, System::IntensityDnnSegment).map_err(|e| e.in_stage("intensity conversion"))?;
            let path = dir.join(CALIBRATION_FILE);
            let offset = read_text(&path)?
                .trim()
                .parse::<f64>()
                .map_err(|_| format_err("bad intensity offset").at_path(&path))?;
            Some((load_net(&dir)?, offset))
        } else {
            None
        };
        let duration = if c.duration {
            let dir = ws.model_dir(System::DurationDnn);
            need(&dir, System::DurationDnn).map_err(|e| e.in_stage("duration conversion"))?;
            Some(load_net(&dir)?)
        } else {
            None
        };
        Ok(Self {
            spectral,
            f0,
            intensity,
            duration,
        })
    }
}

/// Converted features of one utterance, on the retimed timeline when the
/// duration stage ran.
#[derive(Debug, Clone)]
pub struct Converted {
    pub envelope: FeatureTrack,
    pub f0: FeatureTrack,
    pub intensity: FeatureTrack,
    pub phones: crate::featio::PhoneSegmentList,
}

fn check_dim(model: &NetModel, cols: usize, stage: &str) -> Result<()> {
    if model.net.input_dim() != cols {
        return Err(validation(format!("model expects {} inputs, features have {cols}", model.net.input_dim())).in_stage(stage.to_string()));
    }
    Ok(())
}

fn convert_spectrum(model: &SpectralModel, src: &UttFeatures, order: usize) -> Result<FeatureTrack> {
    let bins = src.envelope.dim();
    match model {
        SpectralModel::Source => Ok(src.envelope.clone()),
        SpectralModel::Full(net) => {
            let x = spectral_input(&src.envelope, &src.f0)?;
            check_dim(net, x.ncols(), "spectral conversion")?;
            src.envelope.with_data(net.predict(x.view())?)
        }
        SpectralModel::Mcep(net) => {
            let x = mcep_input(&src.envelope, &src.f0, order)?;
            check_dim(net, x.ncols(), "spectral conversion")?;
            let coeffs = FeatureTrack::new(net.predict(x.view())?, src.envelope.frame_shift_s())?;
            dct_reconstruct(&coeffs, bins)
        }
        SpectralModel::Gmm(gmm) => {
            let x = dct_coefficients(&src.envelope, order)?;
            if gmm.dim() != x.dim() {
                return Err(validation(format!("GMM has {} dims, features have {}", gmm.dim(), x.dim())).in_stage("spectral conversion"));
            }
            let coeffs = FeatureTrack::new(gmm.convert_rows(x.data().view())?, src.envelope.frame_shift_s())?;
            dct_reconstruct(&coeffs, bins)
        }
    }
}

/// Predicts a length-`L` trajectory per voiced run of the source.
fn predict_segments(model: &NetModel, values: ndarray::ArrayView1<'_, f64>, runs: &[(usize, usize)], length: usize, diff: bool) -> Result<Vec<Array1<f64>>> {
    if runs.is_empty() {
        return Ok(Vec::new());
    }
    check_dim(model, length, "segment prediction")?;
    let segs = segments_from_runs(values, runs, length)?;
    let mut x = Array2::zeros((segs.len(), length));
    for (i, s) in segs.iter().enumerate() {
        let row = if diff { f0_to_diff(s) } else { s.normalized.clone() };
        x.row_mut(i).assign(&Array1::from(row));
    }
    let y = model.predict(x.view())?;
    Ok(y.rows().into_iter().map(|r| r.to_owned()).collect())
}

fn convert_f0(model: &F0Model, src: &UttFeatures, config: &ExperimentConfig) -> Result<FeatureTrack> {
    let scale = config.prosody.f0_scale;
    let length = config.prosody.segment_length;
    let sv = scaled_f0(&src.f0, scale)?;
    let mut data = src.f0.data().clone();
    match model {
        F0Model::MeanVar(stats) => return stats.transform_track(&src.f0, scale),
        F0Model::Frame(net) => {
            let x = f0_frame_features(&dct_coefficients(&src.envelope, config.gmm.order)?, &src.f0, scale)?;
            check_dim(net, x.ncols(), "F0 conversion")?;
            let y = net.predict(x.view())?;
            for t in 0..data.nrows() {
                data[[t, 0]] = if sv[t] > 0.0 { scale.to_hz(y[[t, 0]]).max(0.0) } else { 0.0 };
            }
        }
        F0Model::Segment(net, stats) => {
            // frames outside multi-frame runs fall back to the global transform
            for t in 0..data.nrows() {
                data[[t, 0]] = if sv[t] > 0.0 { scale.to_hz(stats.transform(sv[t])) } else { 0.0 };
            }
            let runs = voiced_runs(src.f0.column(1));
            let predicted = predict_segments(net, sv.view(), &runs, length, true)?;
            for ((a, b), diff) in runs.iter().zip(predicted) {
                let mean = sv.slice(ndarray::s![*a..*b]).mean().expect("non-empty run");
                let traj = reconstruct_f0(diff.as_slice().expect("contiguous"), stats.predict_segment_mean(mean), b - a)?;
                for (t, v) in (*a..*b).zip(traj) {
                    data[[t, 0]] = scale.to_hz(v).max(0.0);
                }
            }
        }
    }
    src.f0.with_data(data)
}

fn convert_intensity(model: &NetModel, offset: f64, envelope: &FeatureTrack, src: &UttFeatures, length: usize) -> Result<FeatureTrack> {
    let runs = voiced_runs(src.f0.column(1));
    let predicted = predict_segments(model, src.intensity.column(0), &runs, length, false)?;
    let targets: Vec<(usize, Vec<f64>)> = runs
        .iter()
        .zip(predicted)
        .map(|(&(a, b), traj)| {
            let values = crate::prosody::resample_linear(traj.as_slice().expect("contiguous"), b - a);
            (a, values.into_iter().map(|v| v - offset).collect())
        })
        .collect();
    apply_intensity(envelope, &targets)
}

/// Runs the conversion stages on one source utterance: spectrum, then
/// intensity, then F0, then duration.
pub fn convert_utterance(models: &ConversionModels, src: &UttFeatures, config: &ExperimentConfig) -> Result<Converted> {
    let mut envelope = convert_spectrum(&models.spectral, src, config.gmm.order).map_err(|e| e.in_stage("spectral conversion"))?;
    if let Some((net, offset)) = &models.intensity {
        envelope = convert_intensity(net, *offset, &envelope, src, config.prosody.segment_length).map_err(|e| e.in_stage("intensity conversion"))?;
    }
    let f0 = match &models.f0 {
        Some(m) => convert_f0(m, src, config).map_err(|e| e.in_stage("F0 conversion"))?,
        None => src.f0.clone(),
    };
    let mut out = Converted {
        envelope,
        f0,
        intensity: src.intensity.clone(),
        phones: src.phones.clone(),
    };
    if let Some(net) = &models.duration {
        let retimed = (|| -> Result<Converted> {
            let n = config.prosody.duration_frames;
            let x = duration_inputs(&src.envelope, &src.phones, n)?;
            check_dim(net, x.ncols(), "duration conversion")?;
            let predicted = net.predict(x.view())?;
            let ratios: Vec<f64> = src
                .phones
                .iter()
                .zip(predicted.index_axis(Axis(1), 0))
                .map(|(p, &r)| if p.len() < 2 || !(r > 0.0) { 1.0 } else { r })
                .collect();
            let (tracks, phones) = apply_duration(&[out.envelope.clone(), out.f0.clone(), out.intensity.clone()], &src.phones, &ratios)?;
            let mut it = tracks.into_iter();
            Ok(Converted {
                envelope: it.next().expect("three tracks"),
                f0: it.next().expect("three tracks"),
                intensity: it.next().expect("three tracks"),
                phones,
            })
        })()
        .map_err(|e| e.in_stage("duration conversion"))?;
        out = retimed;
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct ConvertSummary {
    pub name: String,
    pub converted: usize,
    pub failures: Vec<(String, Error)>,
}

/// Converts the listed utterances (the test list when `ids` is `None`) with
/// the systems named in `config.convert`, writing tracks, labels and
/// optionally audio under `converted/<name>/`.
pub fn cmd_convert(config: &ExperimentConfig, ids: Option<&[String]>) -> Result<ConvertSummary> {
    config.validate()?;
    let ws = Workspace::new(config.workdir());
    let ids: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => read_splits(&config.train_list, &config.test_list)?.1,
    };
    let models = ConversionModels::load(&ws, config)?;
    let name = config.convert.output_name();
    let out_dir = ws.converted_dir(&name);
    create_dir(&out_dir)?;
    let shift = config.analysis.frame_shift_s;
    let results = parallel_map(&ids, config.jobs, |id| -> Result<()> {
        let src = UttFeatures::load(&ws, id, Speaker::Source, shift)?;
        let out = convert_utterance(&models, &src, config)?;
        write_track(&out.envelope, ws.converted_track(&name, id, TrackKind::Envelope))?;
        write_track(&out.f0, ws.converted_track(&name, id, TrackKind::F0))?;
        write_track(&out.intensity, ws.converted_track(&name, id, TrackKind::Intensity))?;
        write_phone_labels(&out.phones, shift, ws.converted_labels(&name, id))?;
        if config.convert.synthesize {
            let sr = source_rate(config, id)?;
            let audio = synthesize(&out.envelope, &out.f0, &config.analysis, sr)?;
            write_wav(&audio, out_dir.join(format!("{id}.wav")))?;
        }
        Ok(())
    });
    let mut summary = ConvertSummary {
        name,
        ..Default::default()
    };
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(()) => summary.converted += 1,
            Err(e) => {
                log::error!("{id}: {e}");
                summary.failures.push((id.clone(), e));
            }
        }
    }
    Ok(summary)
}

fn source_rate(config: &ExperimentConfig, id: &str) -> Result<u32> {
    let entries = super::manifest::read_manifest(&config.manifest)?;
    let entry = entries
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::State(format!("{id} is not in the manifest")))?;
    let reader = hound::WavReader::open(&entry.source_wav).map_err(|e| format_err(e.to_string()).at_path(&entry.source_wav))?;
    Ok(reader.spec().sample_rate)
}
