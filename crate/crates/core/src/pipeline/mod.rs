//! Experiment configuration, on-disk layout and the command drivers behind
//! the `vcforge` CLI.

mod config;
mod convert;
mod data;
mod evaluate;
mod extract;
mod layout;
mod manifest;
mod synthetic;
mod train;

pub use config::{
    AlignSection, ConvertSection, EvaluateSection, ExperimentConfig, GmmSection, Overrides, ProsodySection, SpectralSection, System,
};
pub use convert::{cmd_convert, convert_utterance, ConversionModels, ConvertSummary, Converted};
pub use data::{align_envelopes, cmd_align, load_aligned, mcep_input, spectral_input, AlignedUtt, UttFeatures};
pub use evaluate::cmd_evaluate;
pub use extract::{cmd_extract, ExtractSummary};
pub use layout::{read_labeled, Speaker, TrackKind, Workspace};
pub use manifest::{parse_manifest, read_id_list, read_manifest, read_splits, ManifestEntry};
pub use synthetic::{make_synthetic, synthetic_analysis, synthetic_experiment, SyntheticCorpus, SyntheticOptions};
pub use train::{cmd_train, TrainSummary, CALIBRATION_FILE, GMM_FILE, LOG_FILE, MEANVAR_FILE, META_FILE, NET_FILE};

/// Applies `f` to every item on up to `jobs` threads and returns the results
/// in input order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}
