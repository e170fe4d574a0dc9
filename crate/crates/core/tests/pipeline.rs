use std::path::Path;

use vcforge::featio::read_track;
use vcforge::pipeline::{
    cmd_align, cmd_convert, cmd_evaluate, cmd_extract, cmd_train, make_synthetic, synthetic_experiment, ExperimentConfig, Speaker,
    SyntheticOptions, System, TrackKind, Workspace, LOG_FILE, MEANVAR_FILE, META_FILE,
};
use vcforge::Error;

struct Corpus {
    dir: tempfile::TempDir,
    config: ExperimentConfig,
    ids: Vec<String>,
}

fn corpus(utterances: usize) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let opts = SyntheticOptions {
        utterances,
        train: utterances - 2,
        seed: 5,
        ..SyntheticOptions::default()
    };
    let c = make_synthetic(dir.path(), &opts).unwrap();
    let mut config = ExperimentConfig::load(&c.config).unwrap();
    config.workdir = Some(dir.path().to_path_buf());
    // small enough that every system trains in well under a second
    config.spectral.hidden = vec![16];
    config.spectral.pretrain.max_epochs = 2;
    config.spectral.finetune.max_epochs = 2;
    config.gmm.components = 2;
    config.prosody.hidden = vec![8];
    config.prosody.train.max_epochs = 3;
    let ids = c.train_ids.iter().chain(&c.test_ids).cloned().collect();
    Corpus { dir, config, ids }
}

fn prepared(utterances: usize) -> Corpus {
    let c = corpus(utterances);
    assert!(cmd_extract(&c.config, false).unwrap().failures.is_empty());
    cmd_align(&c.config, &c.ids).unwrap();
    c
}

fn source_only(config: &ExperimentConfig) -> ExperimentConfig {
    let mut config = config.clone();
    config.convert.spectral_system = None;
    config.convert.f0_system = None;
    config
}

#[test]
fn extract_counts_and_skips_existing_outputs() {
    let c = corpus(4);
    let first = cmd_extract(&c.config, false).unwrap();
    assert_eq!(first.files_written, 6 * 4);
    assert_eq!(first.utterances_skipped, 0);
    let again = cmd_extract(&c.config, false).unwrap();
    assert_eq!((again.files_written, again.utterances_skipped), (0, 4));
    let forced = cmd_extract(&c.config, true).unwrap();
    assert_eq!(forced.files_written, 6 * 4);
}

#[test]
fn missing_wav_fails_only_its_utterance() {
    let c = corpus(4);
    let victim = &c.ids[1];
    std::fs::remove_file(c.dir.path().join("wav").join(format!("src_{victim}.wav"))).unwrap();
    let s = cmd_extract(&c.config, false).unwrap();
    assert_eq!(s.failures.len(), 1);
    assert_eq!(&s.failures[0].0, victim);
    assert_eq!(s.files_written, 6 * 3);
}

#[test]
fn source_passthrough_scores_one_hundred_percent() {
    let c = prepared(4);
    let config = source_only(&c.config);
    let summary = cmd_convert(&config, None).unwrap();
    assert_eq!(summary.name, "source");
    assert!(summary.failures.is_empty());
    let ws = Workspace::new(config.workdir());
    for id in &c.ids[2..] {
        let conv = read_track(ws.converted_track("source", id, TrackKind::Envelope)).unwrap();
        let src = ws.read(id, Speaker::Source, TrackKind::Envelope).unwrap();
        assert_eq!(conv.data(), src.data());
        let conv_f0 = read_track(ws.converted_track("source", id, TrackKind::F0)).unwrap();
        assert_eq!(conv_f0.data(), ws.read(id, Speaker::Source, TrackKind::F0).unwrap().data());
    }
    let report = cmd_evaluate(&config, "source").unwrap();
    assert!(report.skipped.is_empty());
    assert!((report.lsd_percent().unwrap() - 100.0).abs() < 1e-9);
    assert!(ws.eval_dir("source").join("report.kv").is_file());
}

#[test]
fn missing_converted_output_is_listed_as_skipped() {
    let c = prepared(4);
    let config = source_only(&c.config);
    cmd_convert(&config, None).unwrap();
    let ws = Workspace::new(config.workdir());
    let gone = &c.ids[3];
    std::fs::remove_file(ws.converted_track("source", gone, TrackKind::Envelope)).unwrap();
    let report = cmd_evaluate(&config, "source").unwrap();
    assert_eq!(report.skipped, vec![gone.clone()]);
    assert_eq!(report.utterances.len(), 1);
}

#[test]
fn meanvar_model_is_four_numbers() {
    let c = prepared(4);
    let mut config = c.config.clone();
    config.system = System::F0MeanVar;
    let summary = cmd_train(&config).unwrap();
    let text = std::fs::read_to_string(summary.model_dir.join(MEANVAR_FILE)).unwrap();
    let values: Vec<f64> = text.split_whitespace().map(|w| w.parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!(values.iter().all(|v| *v > 0.0));
    let meta = std::fs::read_to_string(summary.model_dir.join(META_FILE)).unwrap();
    assert!(meta.contains(&format!("config_sha256 = {}", config.hash())));
}

#[test]
fn autoencoder_log_records_both_phases() {
    let c = prepared(4);
    let mut config = c.config.clone();
    config.system = System::DnnSpAutoencoder;
    let summary = cmd_train(&config).unwrap();
    let log = std::fs::read_to_string(summary.model_dir.join(LOG_FILE)).unwrap();
    assert!(log.contains("phase pretrain-autoencoder epochs 2"), "{log}");
    assert!(log.contains("phase finetune epochs 2"), "{log}");
    assert!(summary.training_rows > 0);
}

#[test]
fn convert_without_trained_model_names_the_stage() {
    let c = prepared(4);
    let mut config = c.config.clone();
    config.convert.spectral_system = Some(System::JdGmm);
    config.convert.f0_system = None;
    let err = cmd_convert(&config, None).unwrap_err();
    assert!(err.to_string().contains("spectral conversion"), "{err}");
}

#[test]
fn synthetic_config_round_trips_through_toml() {
    let config = synthetic_experiment();
    assert_eq!(ExperimentConfig::from_toml(&config.to_toml()).unwrap(), config);
    config.validate().unwrap();
    let bad = ExperimentConfig::from_toml("no_such_key = 1");
    assert!(matches!(bad, Err(Error::Config(_))));
}

#[test]
fn config_paths_resolve_relative_to_file() {
    let c = corpus(3);
    let loaded = ExperimentConfig::load(c.dir.path().join("experiment.toml")).unwrap();
    assert_eq!(loaded.manifest, c.dir.path().join("manifest.txt"));
    assert!(Path::new(&loaded.train_list).is_file());
}
