use std::fmt::Write as _;
use std::path::Path;

use super::{PhoneSegment, PhoneSegmentList};
use crate::error::{validation, Error, Result};

const SNAP_TOLERANCE: f64 = 1e-6;

fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() < SNAP_TOLERANCE).then_some(r)
}

/// Seconds to frame index, rounding down unless the value is within float
/// noise of a frame boundary.
pub fn seconds_to_frame(seconds: f64, frame_shift_s: f64) -> usize {
    let x = seconds / frame_shift_s;
    snap(x).unwrap_or_else(|| x.floor()).max(0.0) as usize
}

fn seconds_to_frame_ceil(seconds: f64, frame_shift_s: f64) -> usize {
    let x = seconds / frame_shift_s;
    snap(x).unwrap_or_else(|| x.ceil()).max(0.0) as usize
}

pub(crate) fn parse_phone_labels(text: &str, frame_shift_s: f64) -> Result<PhoneSegmentList> {
    let mut entries: Vec<PhoneSegment> = Vec::new();
    let mut prev_end_s = f64::NEG_INFINITY;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(validation(format!(
                "line {}: expected `start end label`, got {raw:?}",
                lineno + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| validation(format!("line {}: bad time {s:?}", lineno + 1)))
        };
        let (start_s, end_s) = (parse(fields[0])?, parse(fields[1])?);
        if end_s <= start_s {
            return Err(validation(format!(
                "line {}: end {end_s} not after start {start_s}",
                lineno + 1
            )));
        }
        if start_s < prev_end_s - 1e-9 {
            return Err(validation(format!(
                "line {}: segment starting at {start_s} overlaps previous ending at {prev_end_s}",
                lineno + 1
            )));
        }
        prev_end_s = end_s;

        let mut start = seconds_to_frame(start_s, frame_shift_s);
        let end = seconds_to_frame_ceil(end_s, frame_shift_s);
        // floor/ceil can make neighbours share a frame; the earlier phone keeps it
        if let Some(prev) = entries.last() {
            start = start.max(prev.end);
        }
        if start >= end {
            return Err(validation(format!(
                "line {}: segment {start_s}..{end_s} is empty after frame quantization",
                lineno + 1
            )));
        }
        entries.push(PhoneSegment {
            label: fields[2].to_string(),
            start,
            end,
        });
    }
    PhoneSegmentList::new(entries)
}

/// Reads a `start_s end_s label` file into frame-indexed segments.
pub fn read_phone_labels(path: impl AsRef<Path>, frame_shift_s: f64) -> Result<PhoneSegmentList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    parse_phone_labels(&text, frame_shift_s).map_err(|e| e.at_path(path))
}

pub fn write_phone_labels(phones: &PhoneSegmentList, frame_shift_s: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in phones.iter() {
        let _ = writeln!(
            out,
            "{:.6} {:.6} {}",
            p.start as f64 * frame_shift_s,
            p.end as f64 * frame_shift_s,
            p.label
        );
    }
    std::fs::write(path, out).map_err(|e| Error::from(e).at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn converts_seconds_to_frames() {
        let l = parse_phone_labels("0.00 0.10 ah\n", 0.005).unwrap();
        assert_eq!(
            l.entries(),
            &[PhoneSegment {
                label: "ah".into(),
                start: 0,
                end: 20
            }]
        );
    }

    #[test]
    fn empty_and_comment_only_files() {
        assert!(parse_phone_labels("", 0.005).unwrap().is_empty());
        assert!(parse_phone_labels("# nothing\n\n", 0.005).unwrap().is_empty());
    }

    #[test]
    fn reversed_segment_rejected() {
        assert!(matches!(
            parse_phone_labels("0.10 0.05 x", 0.005),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn overlap_rejected() {
        assert!(parse_phone_labels("0.0 0.2 a\n0.1 0.3 b\n", 0.005).is_err());
    }

    #[test]
    fn floor_ceil_and_shared_boundary() {
        let l = parse_phone_labels("0.0012 0.0101 a\n0.0101 0.02 b # tail\n", 0.005).unwrap();
        assert_eq!((l.entries()[0].start, l.entries()[0].end), (0, 3));
        assert_eq!((l.entries()[1].start, l.entries()[1].end), (3, 4));
    }

    proptest! {
        #[test]
        fn frame_seconds_round_trip(f in 0usize..10_000_000, shift_us in 1u32..100_000) {
            let shift = shift_us as f64 / 1e6;
            prop_assert_eq!(seconds_to_frame(f as f64 * shift, shift), f);
        }
    }
}
