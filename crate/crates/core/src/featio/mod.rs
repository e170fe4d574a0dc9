//! Feature containers and the on-disk formats shared by every other module.

mod labels;
mod track;
mod wav;

pub use labels::{read_phone_labels, seconds_to_frame, write_phone_labels};
pub use track::{read_track, write_track, write_track_text, FeatureTrack, TRACK_MAGIC, TRACK_VERSION};
pub use wav::{read_wav, write_wav, Audio};

use crate::error::{validation, Result};

/// One labelled phone span in frames, `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSegment {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl PhoneSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered, non-overlapping phone segments of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhoneSegmentList {
    entries: Vec<PhoneSegment>,
}

impl PhoneSegmentList {
    pub fn new(entries: Vec<PhoneSegment>) -> Result<Self> {
        let mut prev_end = 0;
        for (i, seg) in entries.iter().enumerate() {
            if seg.start >= seg.end {
                return Err(validation(format!(
                    "phone {i} ({}) has start {} >= end {}",
                    seg.label, seg.start, seg.end
                )));
            }
            if seg.start < prev_end {
                return Err(validation(format!(
                    "phone {i} ({}) starts at {} before previous end {prev_end}",
                    seg.label, seg.start
                )));
            }
            prev_end = seg.end;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PhoneSegment] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PhoneSegment> {
        self.entries.iter()
    }

    /// Checks that every segment lies within a track of `frames` frames.
    pub fn check_within(&self, frames: usize) -> Result<()> {
        match self.entries.last() {
            Some(last) if last.end > frames => Err(validation(format!(
                "phone {} ends at frame {} beyond track length {frames}",
                last.label, last.end
            ))),
            _ => Ok(()),
        }
    }
}

/// Source and target features of one parallel utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtterancePair {
    pub source: FeatureTrack,
    pub target: FeatureTrack,
    pub source_phones: PhoneSegmentList,
    pub target_phones: PhoneSegmentList,
    alignment: Option<Vec<(usize, usize)>>,
}

impl UtterancePair {
    pub fn new(
        source: FeatureTrack,
        target: FeatureTrack,
        source_phones: PhoneSegmentList,
        target_phones: PhoneSegmentList,
    ) -> Result<Self> {
        if source_phones.len() != target_phones.len() {
            return Err(validation(format!(
                "phone count mismatch: source {} vs target {}",
                source_phones.len(),
                target_phones.len()
            )));
        }
        for (i, (s, t)) in source_phones.iter().zip(target_phones.iter()).enumerate() {
            if s.label != t.label {
                return Err(validation(format!(
                    "phone {i} label mismatch: source {:?} vs target {:?}",
                    s.label, t.label
                )));
            }
        }
        source_phones.check_within(source.frames())?;
        target_phones.check_within(target.frames())?;
        Ok(Self {
            source,
            target,
            source_phones,
            target_phones,
            alignment: None,
        })
    }

    pub fn alignment(&self) -> Option<&[(usize, usize)]> {
        self.alignment.as_deref()
    }

    pub fn with_alignment(mut self, path: Vec<(usize, usize)>) -> Result<Self> {
        for w in path.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(validation(format!(
                    "alignment not monotone at {:?} -> {:?}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&(s, t)) = path.iter().find(|&&(s, t)| s >= self.source.frames() || t >= self.target.frames()) {
            return Err(validation(format!("alignment pair ({s}, {t}) out of range")));
        }
        self.alignment = Some(path);
        Ok(self)
    }
}
