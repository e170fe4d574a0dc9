use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::featio::{read_phone_labels, read_track, FeatureTrack, PhoneSegmentList};

use super::config::System;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    Source,
    Target,
}

impl Speaker {
    pub fn prefix(self) -> &'static str {
        match self {
            Speaker::Source => "src",
            Speaker::Target => "tgt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Envelope,
    F0,
    Intensity,
}

impl TrackKind {
    pub const ALL: [TrackKind; 3] = [TrackKind::Envelope, TrackKind::F0, TrackKind::Intensity];

    pub fn suffix(self) -> &'static str {
        match self {
            TrackKind::Envelope => "env",
            TrackKind::F0 => "f0",
            TrackKind::Intensity => "int",
        }
    }

    /// Labels attached to tracks of this kind when read back.
    pub fn labels(self, dim: usize) -> Option<Vec<String>> {
        match self {
            TrackKind::F0 if dim == 2 => Some(crate::analysis::F0_LABELS.iter().map(|s| s.to_string()).collect()),
            TrackKind::Intensity if dim == 1 => Some(vec!["intensity".into()]),
            _ => None,
        }
    }
}

/// Paths of everything an experiment writes under its output root.
///
/// ```text
/// features/<utt>/{src,tgt}.{env,f0,int}.vcft, {src,tgt}.lab, align.txt
/// models/<system>/...  train.log  run.meta
/// converted/<name>/<utt>.{env,f0,int}.vcft, <utt>.lab, <utt>.wav
/// eval/<name>/report.{txt,kv,csv}
/// ```
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn features_dir(&self, utt: &str) -> PathBuf {
        self.root.join("features").join(utt)
    }

    pub fn track_path(&self, utt: &str, speaker: Speaker, kind: TrackKind) -> PathBuf {
        self.features_dir(utt).join(format!("{}.{}.vcft", speaker.prefix(), kind.suffix()))
    }

    pub fn labels_path(&self, utt: &str, speaker: Speaker) -> PathBuf {
        self.features_dir(utt).join(format!("{}.lab", speaker.prefix()))
    }

    pub fn alignment_path(&self, utt: &str) -> PathBuf {
        self.features_dir(utt).join("align.txt")
    }

    pub fn model_dir(&self, system: System) -> PathBuf {
        self.root.join("models").join(system.name())
    }

    pub fn converted_dir(&self, name: &str) -> PathBuf {
        self.root.join("converted").join(name)
    }

    pub fn converted_track(&self, name: &str, utt: &str, kind: TrackKind) -> PathBuf {
        self.converted_dir(name).join(format!("{utt}.{}.vcft", kind.suffix()))
    }

    pub fn converted_labels(&self, name: &str, utt: &str) -> PathBuf {
        self.converted_dir(name).join(format!("{utt}.lab"))
    }

    pub fn eval_dir(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(name)
    }

    pub fn read(&self, utt: &str, speaker: Speaker, kind: TrackKind) -> Result<FeatureTrack> {
        read_labeled(&self.track_path(utt, speaker, kind), kind)
    }

    pub fn read_phones(&self, utt: &str, speaker: Speaker, frame_shift_s: f64) -> Result<PhoneSegmentList> {
        read_phone_labels(self.labels_path(utt, speaker), frame_shift_s)
    }
}

/// Reads a track and attaches the labels its kind implies.
pub fn read_labeled(path: &Path, kind: TrackKind) -> Result<FeatureTrack> {
    let track = read_track(path)?;
    match kind.labels(track.dim()) {
        Some(l) => track.with_labels(l).map_err(|e| e.at_path(path)),
        None => Ok(track),
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::from(e).at_path(path))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::from(e).at_path(path))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))
}
