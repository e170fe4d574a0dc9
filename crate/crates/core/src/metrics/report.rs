use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Scores for one evaluated utterance. Metrics that could not be computed
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceScores {
    pub id: String,
    pub lsd_percent: Option<f64>,
    /// LSD restricted to frames voiced in the source.
    pub lsd_voiced_percent: Option<f64>,
    /// Frames contributing to the LSD ratio.
    pub lsd_frames: usize,
    /// Envelope bins per frame.
    pub bins: usize,
    pub f0_rmse_hz: Option<f64>,
    pub f0_frames: usize,
    pub f0_mismatched: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub name: String,
    pub utterances: Vec<UtteranceScores>,
    /// Utterance ids that could not be evaluated.
    pub skipped: Vec<String>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EvalReport {
    /// Mean LSD over utterances.
    pub fn lsd_percent(&self) -> Option<f64> {
        mean(self.utterances.iter().map(|u| u.lsd_percent))
    }

    pub fn lsd_voiced_percent(&self) -> Option<f64> {
        mean(self.utterances.iter().map(|u| u.lsd_voiced_percent))
    }

    /// Mean F0 RMSE over utterances.
    pub fn f0_rmse_hz(&self) -> Option<f64> {
        mean(self.utterances.iter().map(|u| u.f0_rmse_hz))
    }

    pub fn f0_mismatch_rate(&self) -> Option<f64> {
        let total: usize = self.utterances.iter().map(|u| u.f0_frames + u.f0_mismatched).sum();
        let bad: usize = self.utterances.iter().map(|u| u.f0_mismatched).sum();
        (total > 0).then(|| bad as f64 / total as f64)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluation: {}", self.name);
        let _ = writeln!(
            out,
            "{:<20} {:>12} {:>12} {:>8} {:>12} {:>8} {:>8}",
            "utterance", "lsd_%", "lsd_voiced_%", "frames", "f0_rmse_hz", "f0_n", "vuv_mis"
        );
        for u in &self.utterances {
            let _ = writeln!(
                out,
                "{:<20} {:>12} {:>12} {:>8} {:>12} {:>8} {:>8}",
                u.id,
                fmt_opt(u.lsd_percent),
                fmt_opt(u.lsd_voiced_percent),
                u.lsd_frames,
                fmt_opt(u.f0_rmse_hz),
                u.f0_frames,
                u.f0_mismatched
            );
        }
        let _ = writeln!(
            out,
            "{:<20} {:>12} {:>12} {:>8} {:>12}",
            "mean",
            fmt_opt(self.lsd_percent()),
            fmt_opt(self.lsd_voiced_percent()),
            "",
            fmt_opt(self.f0_rmse_hz())
        );
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped: {}", self.skipped.join(" "));
        }
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "utterances = {}", self.utterances.len());
        let _ = writeln!(out, "skipped = {}", self.skipped.len());
        let _ = writeln!(out, "lsd_percent = {}", fmt_opt(self.lsd_percent()));
        let _ = writeln!(out, "lsd_voiced_percent = {}", fmt_opt(self.lsd_voiced_percent()));
        let _ = writeln!(out, "f0_rmse_hz = {}", fmt_opt(self.f0_rmse_hz()));
        let _ = writeln!(out, "f0_vuv_mismatch_rate = {}", fmt_opt(self.f0_mismatch_rate()));
        if let Some(bins) = self.utterances.first().map(|u| u.bins) {
            let _ = writeln!(out, "bins = {bins}");
        }
        let _ = writeln!(out, "lsd_frames = {}", self.utterances.iter().map(|u| u.lsd_frames).sum::<usize>());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("utterance,lsd_percent,lsd_voiced_percent,lsd_frames,bins,f0_rmse_hz,f0_frames,f0_mismatched\n");
        for u in &self.utterances {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                u.id,
                fmt_opt(u.lsd_percent),
                fmt_opt(u.lsd_voiced_percent),
                u.lsd_frames,
                u.bins,
                fmt_opt(u.f0_rmse_hz),
                u.f0_frames,
                u.f0_mismatched
            );
        }
        out
    }

    /// Writes `report.txt` and `report.kv`, plus `report.csv` when asked.
    pub fn write(&self, dir: impl AsRef<Path>, csv: bool) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
        let mut files = vec![("report.txt", self.to_text()), ("report.kv", self.to_kv())];
        if csv {
            files.push(("report.csv", self.to_csv()));
        }
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::from(e).at_path(&path))?;
        }
        Ok(())
    }
}
