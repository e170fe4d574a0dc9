use crate::analysis::{extract_envelope, extract_f0, extract_intensity, AnalysisConfig};
use crate::error::{Error, Result};
use crate::featio::{read_phone_labels, read_wav, write_track};

use super::config::ExperimentConfig;
use super::layout::{create_dir, Speaker, TrackKind, Workspace};
use super::manifest::{read_manifest, ManifestEntry};
use super::parallel_map;

#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub files_written: usize,
    pub utterances_skipped: usize,
    pub failures: Vec<(String, Error)>,
}

fn extract_one(entry: &ManifestEntry, ws: &Workspace, analysis: &AnalysisConfig, force: bool) -> Result<usize> {
    let outputs = [Speaker::Source, Speaker::Target].into_iter().flat_map(|sp| {
        TrackKind::ALL
            .into_iter()
            .map(move |k| ws.track_path(&entry.id, sp, k))
            .chain(std::iter::once(ws.labels_path(&entry.id, sp)))
    });
    if !force && outputs.into_iter().all(|p| p.exists()) {
        return Ok(0);
    }
    create_dir(&ws.features_dir(&entry.id))?;
    let mut written = 0;
    for (speaker, wav, lab) in [
        (Speaker::Source, &entry.source_wav, &entry.source_labels),
        (Speaker::Target, &entry.target_wav, &entry.target_labels),
    ] {
        let audio = read_wav(wav)?;
        let phones = read_phone_labels(lab, analysis.frame_shift_s)?;
        let env = extract_envelope(&audio, analysis).map_err(|e| e.at_path(wav))?;
        phones.check_within(env.frames()).map_err(|e| e.at_path(lab))?;
        let f0 = extract_f0(&audio, analysis).map_err(|e| e.at_path(wav))?;
        let int = extract_intensity(&audio, analysis).map_err(|e| e.at_path(wav))?;
        for (kind, track) in [(TrackKind::Envelope, &env), (TrackKind::F0, &f0), (TrackKind::Intensity, &int)] {
            write_track(track, ws.track_path(&entry.id, speaker, kind))?;
            written += 1;
        }
        let dest = ws.labels_path(&entry.id, speaker);
        std::fs::copy(lab, &dest).map_err(|e| Error::from(e).at_path(&dest))?;
    }
    Ok(written)
}

/// Extracts envelope, F0/VUV and intensity tracks for both speakers of every
/// manifest utterance. Utterances whose outputs all exist are skipped unless
/// `force` is set; a failing utterance does not stop the others.
pub fn cmd_extract(config: &ExperimentConfig, force: bool) -> Result<ExtractSummary> {
    let entries = read_manifest(&config.manifest)?;
    let ws = Workspace::new(config.workdir());
    let results = parallel_map(&entries, config.jobs, |e| extract_one(e, &ws, &config.analysis, force));
    let mut summary = ExtractSummary::default();
    for (entry, r) in entries.iter().zip(results) {
        match r {
            Ok(0) => summary.utterances_skipped += 1,
            Ok(n) => summary.files_written += n,
            Err(e) => {
                log::error!("{}: {e}", entry.id);
                summary.failures.push((entry.id.clone(), e));
            }
        }
    }
    log::info!(
        "extract: {} files written, {} utterances up to date, {} failed",
        summary.files_written,
        summary.utterances_skipped,
        summary.failures.len()
    );
    Ok(summary)
}
