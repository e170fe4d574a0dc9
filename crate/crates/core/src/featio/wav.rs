use std::path::Path;

use crate::error::{format_err, validation, Error, Result};

/// Mono audio with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => format_err(other.to_string()),
    }
}

/// Reads a 16-bit PCM mono WAV file; samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let path = path.as_ref();
    let read = || -> Result<Audio> {
        let mut reader = hound::WavReader::open(path).map_err(map_hound)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(format_err(format!("expected mono audio, found {} channels", spec.channels)));
        }
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(format_err(format!(
                "expected 16-bit integer PCM, found {:?} {}-bit",
                spec.sample_format, spec.bits_per_sample
            )));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(map_hound)?;
        Ok(Audio::new(samples, spec.sample_rate))
    };
    read().map_err(|e| e.at_path(path))
}

/// Writes 16-bit PCM mono; values are clipped to [-1, 1) before quantization.
pub fn write_wav(audio: &Audio, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if audio.sample_rate == 0 {
        return Err(validation("sample rate must be positive").at_path(path));
    }
    let write = || -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: audio.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).map_err(map_hound)?;
        for &s in &audio.samples {
            let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(q).map_err(map_hound)?;
        }
        w.finalize().map_err(map_hound)
    };
    write().map_err(|e| e.at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn silence_reads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_raw(&p, 1, &vec![0; 16000]);
        let a = read_wav(&p).unwrap();
        assert_eq!(a.sample_rate, 16000);
        assert_eq!(a.samples.len(), 16000);
        assert!(a.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        write_raw(&p, 1, &[32767, -32768]);
        let a = read_wav(&p).unwrap();
        assert_eq!(a.samples[0], 32767.0 / 32768.0);
        assert_eq!(a.samples[1], -1.0);
    }

    #[test]
    fn stereo_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        write_raw(&p, 2, &[0, 0, 1, 1]);
        assert!(matches!(read_wav(&p).unwrap_err().root(), Error::Format(_)));
    }

    #[test]
    fn truncated_data_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_raw(&p, 1, &[100; 400]);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 301]).unwrap();
        assert!(matches!(read_wav(&p).unwrap_err().root(), Error::Io(_)));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.wav");
        let a = Audio::new(vec![0.0, 0.5, -0.25, 0.999], 8000);
        write_wav(&a, &p).unwrap();
        let b = read_wav(&p).unwrap();
        assert_eq!(b.sample_rate, 8000);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x - y).abs() <= 0.5 / 32768.0);
        }
    }
}
