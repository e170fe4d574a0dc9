use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::DtwConfig;
use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};
use crate::metrics::EnvelopeDomain;
use crate::net::TrainConfig;
use crate::prosody::{F0Scale, DEFAULT_SEGMENT_LENGTH};

/// Conversion systems that can be trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    JdGmm,
    DnnMcep,
    DnnSpRandom,
    DnnSpDlp,
    DnnSpAutoencoder,
    F0MeanVar,
    F0DnnFrame,
    F0DnnSegment,
    IntensityDnnSegment,
    DurationDnn,
}

impl System {
    pub const ALL: [System; 10] = [
        System::JdGmm,
        System::DnnMcep,
        System::DnnSpRandom,
        System::DnnSpDlp,
        System::DnnSpAutoencoder,
        System::F0MeanVar,
        System::F0DnnFrame,
        System::F0DnnSegment,
        System::IntensityDnnSegment,
        System::DurationDnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::JdGmm => "JD-GMM",
            System::DnnMcep => "DNN-MCEP-like",
            System::DnnSpRandom => "DNN-SP-random",
            System::DnnSpDlp => "DNN-SP-DLP",
            System::DnnSpAutoencoder => "DNN-SP-Autoencoder",
            System::F0MeanVar => "F0-MeanVar",
            System::F0DnnFrame => "F0-DNN-Frame",
            System::F0DnnSegment => "F0-DNN-Segment",
            System::IntensityDnnSegment => "Intensity-DNN-Segment",
            System::DurationDnn => "Duration-DNN",
        }
    }

    pub fn is_spectral(self) -> bool {
        matches!(
            self,
            System::JdGmm | System::DnnMcep | System::DnnSpRandom | System::DnnSpDlp | System::DnnSpAutoencoder
        )
    }

    pub fn is_f0(self) -> bool {
        matches!(self, System::F0MeanVar | System::F0DnnFrame | System::F0DnnSegment)
    }

    /// Small per-system constant mixed into derived seeds.
    fn salt(self) -> u64 {
        System::ALL.iter().position(|s| *s == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .iter()
            .copied()
            .find(|sys| sys.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = System::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown system {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl Serialize for System {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for System {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSection {
    pub components: usize,
    /// Cosine-transform coefficients kept from the log envelope.
    pub order: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub variance_floor: f64,
}

impl Default for GmmSection {
    fn default() -> Self {
        Self {
            components: 64,
            order: 25,
            max_iterations: 100,
            tolerance: 1e-6,
            variance_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub hidden: Vec<usize>,
    /// Hidden sizes of the network on cosine-transform features.
    pub mcep_hidden: Vec<usize>,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    /// Epoch budget of each discriminative pretraining stage.
    pub dlp_stage_epochs: usize,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512, 512],
            mcep_hidden: vec![50, 50],
            pretrain: TrainConfig {
                max_epochs: 40,
                l1_lambda: 1e-5,
                ..TrainConfig::default()
            },
            finetune: TrainConfig {
                max_epochs: 20,
                ..TrainConfig::default()
            },
            dlp_stage_epochs: 5,
        }
    }
}

impl SpectralSection {
    /// Network sizes of the full-scale setup: three hidden layers of 3000.
    pub fn full_scale() -> Self {
        Self {
            hidden: vec![3000, 3000, 3000],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProsodySection {
    pub segment_length: usize,
    pub f0_scale: F0Scale,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Hidden sizes of the frame-level F0 network.
    pub frame_hidden: Vec<usize>,
    pub frame_train: TrainConfig,
    /// Frames sampled per phone for duration prediction.
    pub duration_frames: usize,
    pub duration_hidden: Vec<usize>,
    pub duration_train: TrainConfig,
}

impl Default for ProsodySection {
    fn default() -> Self {
        let train = TrainConfig {
            max_epochs: 20,
            ..TrainConfig::default()
        };
        Self {
            segment_length: DEFAULT_SEGMENT_LENGTH,
            f0_scale: F0Scale::Hz,
            hidden: vec![500, 500],
            train: train.clone(),
            frame_hidden: vec![1600, 1600],
            frame_train: train.clone(),
            duration_frames: 5,
            duration_hidden: vec![500, 500],
            duration_train: train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertSection {
    /// `None` keeps the source envelope.
    pub spectral_system: Option<System>,
    /// `None` keeps the source F0.
    pub f0_system: Option<System>,
    pub intensity: bool,
    pub duration: bool,
    pub synthesize: bool,
    /// Output directory name under `converted/`; derived from the systems
    /// when empty.
    pub name: String,
}

impl Default for ConvertSection {
    fn default() -> Self {
        Self {
            spectral_system: Some(System::DnnSpAutoencoder),
            f0_system: Some(System::F0DnnSegment),
            intensity: false,
            duration: false,
            synthesize: false,
            name: String::new(),
        }
    }
}

impl ConvertSection {
    pub fn output_name(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        let mut name = self.spectral_system.map_or("source", System::name).to_string();
        if let Some(f0) = self.f0_system {
            name.push('+');
            name.push_str(f0.name());
        }
        if self.intensity {
            name.push_str("+intensity");
        }
        if self.duration {
            name.push_str("+duration");
        }
        name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub domain: EnvelopeDomain,
    pub csv: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            domain: EnvelopeDomain::Log,
            csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    pub band_width: Option<usize>,
    /// Cosine-transform order of the features the alignment is computed on.
    pub feature_order: usize,
}

impl Default for AlignSection {
    fn default() -> Self {
        Self {
            band_width: None,
            feature_order: 25,
        }
    }
}

impl AlignSection {
    pub fn dtw(&self) -> DtwConfig {
        DtwConfig {
            band_width: self.band_width,
            distance_dims: None,
        }
    }
}

/// Full experiment configuration. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub train_list: PathBuf,
    pub test_list: PathBuf,
    /// Output root; falls back to `VCFORGE_WORKDIR`, then the config
    /// directory.
    pub workdir: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub deterministic: bool,
    pub system: System,
    pub analysis: AnalysisConfig,
    pub align: AlignSection,
    pub gmm: GmmSection,
    pub spectral: SpectralSection,
    pub prosody: ProsodySection,
    pub convert: ConvertSection,
    pub evaluate: EvaluateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.txt"),
            train_list: PathBuf::from("train.list"),
            test_list: PathBuf::from("test.list"),
            workdir: None,
            seed: 0,
            jobs: 1,
            deterministic: true,
            system: System::DnnSpAutoencoder,
            analysis: AnalysisConfig::default(),
            align: AlignSection::default(),
            gmm: GmmSection::default(),
            spectral: SpectralSection::default(),
            prosody: ProsodySection::default(),
            convert: ConvertSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub system: Option<System>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub deterministic: bool,
    pub workdir: Option<PathBuf>,
    pub no_f0: bool,
    pub no_intensity: bool,
    pub no_duration: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| e.at_path(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.manifest, &mut self.train_list, &mut self.test_list] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        match &mut self.workdir {
            Some(w) if w.is_relative() => *w = base.join(&*w),
            Some(_) => {}
            None => {
                self.workdir = Some(
                    std::env::var_os("VCFORGE_WORKDIR")
                        .map(PathBuf::from)
                        .unwrap_or_else(|| base.to_path_buf()),
                )
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.system {
            self.system = s;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if o.deterministic {
            self.deterministic = true;
        }
        if let Some(w) = &o.workdir {
            self.workdir = Some(w.clone());
        }
        if o.no_f0 {
            self.convert.f0_system = None;
        }
        if o.no_intensity {
            self.convert.intensity = false;
        }
        if o.no_duration {
            self.convert.duration = false;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.gmm.components == 0 || self.gmm.order == 0 || self.align.feature_order == 0 {
            return bad("GMM components and cosine-transform orders must be positive".into());
        }
        if self.gmm.order > self.analysis.envelope_order || self.align.feature_order > self.analysis.envelope_order {
            return bad("cosine-transform order exceeds the envelope size".into());
        }
        if self.prosody.segment_length < 2 || self.prosody.duration_frames == 0 {
            return bad("segment_length must be >= 2 and duration_frames >= 1".into());
        }
        if self.spectral.dlp_stage_epochs == 0 {
            return bad("dlp_stage_epochs must be positive".into());
        }
        for (name, hidden) in [
            ("spectral.hidden", &self.spectral.hidden),
            ("spectral.mcep_hidden", &self.spectral.mcep_hidden),
            ("prosody.hidden", &self.prosody.hidden),
            ("prosody.frame_hidden", &self.prosody.frame_hidden),
            ("prosody.duration_hidden", &self.prosody.duration_hidden),
        ] {
            if hidden.contains(&0) {
                return bad(format!("{name} contains a zero-width layer"));
            }
        }
        for (name, t) in [
            ("spectral.pretrain", &self.spectral.pretrain),
            ("spectral.finetune", &self.spectral.finetune),
            ("prosody.train", &self.prosody.train),
            ("prosody.frame_train", &self.prosody.frame_train),
            ("prosody.duration_train", &self.prosody.duration_train),
        ] {
            t.validate().map_err(|e| Error::Config(format!("{name}: {e}")))?;
        }
        if let Some(f0) = self.convert.f0_system {
            if !f0.is_f0() {
                return bad(format!("convert.f0_system {f0} is not an F0 system"));
            }
        }
        if let Some(s) = self.convert.spectral_system {
            if !s.is_spectral() {
                return bad(format!("convert.spectral_system {s} is not a spectral system"));
            }
        }
        self.align.dtw().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn workdir(&self) -> PathBuf {
        self.workdir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Hex SHA-256 of the canonical serialized config. The output root and
    /// the directories of input files do not enter the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workdir = None;
        for p in [&mut canonical.manifest, &mut canonical.train_list, &mut canonical.test_list] {
            *p = p.file_name().map(PathBuf::from).unwrap_or_default();
        }
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed for one training phase of one system, derived from the global seed.
    pub fn derived_seed(&self, system: System, phase: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(system.salt().to_le_bytes());
        h.update(phase.to_le_bytes());
        u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
    }
}
