use crate::error::{Error, Result};
use crate::featio::read_phone_labels;
use crate::metrics::{f0_rmse_pairs, EnvelopeDomain, EvalReport, LsdSums, UtteranceScores};

use super::config::ExperimentConfig;
use super::data::{align_envelopes, AlignedUtt};
use super::layout::{read_labeled, TrackKind, Workspace};
use super::manifest::read_splits;
use super::parallel_map;

fn percent(sums: &LsdSums) -> Option<f64> {
    sums.percent().ok()
}

fn score_utterance(ws: &Workspace, name: &str, id: &str, config: &ExperimentConfig) -> Result<UtteranceScores> {
    let domain: EnvelopeDomain = config.evaluate.domain;
    let reference = AlignedUtt::load(ws, id, config)?;
    let env = read_labeled(&ws.converted_track(name, id, TrackKind::Envelope), TrackKind::Envelope)?;
    let f0 = read_labeled(&ws.converted_track(name, id, TrackKind::F0), TrackKind::F0)?;
    let (src, tgt) = (&reference.source, &reference.target);
    if env.dim() != src.envelope.dim() {
        return Err(Error::Validation(format!(
            "converted envelope has {} bins, reference has {}",
            env.dim(),
            src.envelope.dim()
        )));
    }
    let src_vuv = src.vuv();
    let mut all = LsdSums::default();
    let mut voiced = LsdSums::default();
    let f0_pairs: Vec<(f64, f64)>;
    let (lsd, lsd_voiced);
    if env.frames() == src.envelope.frames() {
        for &(s, t) in &reference.path {
            all.add(src.envelope.row(s), env.row(s), tgt.envelope.row(t), domain);
            if src_vuv[s] {
                voiced.add(src.envelope.row(s), env.row(s), tgt.envelope.row(t), domain);
            }
        }
        lsd = percent(&all);
        lsd_voiced = percent(&voiced);
        f0_pairs = reference.path.iter().map(|&(s, t)| (f0.data()[[s, 0]], tgt.f0.data()[[t, 0]])).collect();
    } else {
        // retimed output: the numerator uses its own alignment to the target
        let phones = read_phone_labels(ws.converted_labels(name, id), config.analysis.frame_shift_s)?;
        let conv_path = align_envelopes(&env, &phones, &tgt.envelope, &tgt.phones, config.align.feature_order, &config.align.dtw())?;
        let conv_vuv: Vec<bool> = f0.column(1).iter().map(|&v| v > 0.5).collect();
        let mean_ratio = |voiced_only: bool| -> Option<f64> {
            let mut den = 0.0;
            let mut n_den = 0usize;
            for &(s, t) in &reference.path {
                if voiced_only && !src_vuv[s] {
                    continue;
                }
                let d = crate::metrics::frame_distortion(src.envelope.row(s), tgt.envelope.row(t), domain);
                if d > 0.0 {
                    den += d;
                    n_den += 1;
                }
            }
            let mut num = 0.0;
            let mut n_num = 0usize;
            for &(c, t) in &conv_path {
                if voiced_only && !conv_vuv[c] {
                    continue;
                }
                num += crate::metrics::frame_distortion(env.row(c), tgt.envelope.row(t), domain);
                n_num += 1;
            }
            (den > 0.0 && n_num > 0).then(|| 100.0 * (num / n_num as f64) / (den / n_den as f64))
        };
        lsd = mean_ratio(false);
        lsd_voiced = mean_ratio(true);
        all.frames = conv_path.len();
        f0_pairs = conv_path.iter().map(|&(c, t)| (f0.data()[[c, 0]], tgt.f0.data()[[t, 0]])).collect();
    }
    let f0 = f0_rmse_pairs(f0_pairs).ok();
    Ok(UtteranceScores {
        id: id.to_string(),
        lsd_percent: lsd,
        lsd_voiced_percent: lsd_voiced,
        lsd_frames: all.frames,
        bins: env.dim(),
        f0_rmse_hz: f0.map(|r| r.rmse_hz),
        f0_frames: f0.map_or(0, |r| r.frames),
        f0_mismatched: f0.map_or(0, |r| r.mismatched),
    })
}

/// Scores `converted/<name>/` against the target features of the test list
/// and writes `eval/<name>/report.{txt,kv}` (plus `.csv` when configured).
/// Utterances without converted output are listed as skipped.
pub fn cmd_evaluate(config: &ExperimentConfig, name: &str) -> Result<EvalReport> {
    let ws = Workspace::new(config.workdir());
    let (_, test_ids) = read_splits(&config.train_list, &config.test_list)?;
    let dir = ws.converted_dir(name);
    if !dir.is_dir() {
        return Err(Error::State(format!("no converted output in {}", dir.display())));
    }
    let results = parallel_map(&test_ids, config.jobs, |id| {
        if !ws.converted_track(name, id, TrackKind::Envelope).exists() {
            return None;
        }
        Some(score_utterance(&ws, name, id, config))
    });
    let mut report = EvalReport {
        name: name.to_string(),
        ..Default::default()
    };
    for (id, r) in test_ids.iter().zip(results) {
        match r {
            Some(Ok(scores)) => report.utterances.push(scores),
            Some(Err(e)) => {
                log::warn!("{id}: {e}");
                report.skipped.push(id.clone());
            }
            None => {
                log::warn!("{id}: no converted output");
                report.skipped.push(id.clone());
            }
        }
    }
    report.write(ws.eval_dir(name), config.evaluate.csv)?;
    Ok(report)
}
