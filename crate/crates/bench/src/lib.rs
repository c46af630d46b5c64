//! Shared fixtures for the benchmarks.

use mibci_core::dsp::{design_butterworth_bandpass, filter_recording, FilterMode};
use mibci_core::model::{extract_epochs, ContinuousRecording, EpochSet, Montage};
use mibci_core::paradigm::{
    generate_sequence, plans_to_markers, CharacterCatalog, ParadigmKind, ParadigmSpec,
};
use mibci_core::synth::{synthesize, SynthConfig};

/// A synthetic writing-task session: the continuous recording plus raw and
/// 8-30 Hz zero-phase filtered 3-7 s epochs.
pub struct Session {
    pub recording: ContinuousRecording,
    pub raw: EpochSet,
    pub filtered: EpochSet,
}

pub fn session(seed: u64) -> Session {
    let spec = ParadigmSpec::with_kind(ParadigmKind::WritingTask);
    let plans = generate_sequence(&spec, &CharacterCatalog::bundled(), seed).expect("plan");
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let recording = synthesize(&spec, &plans, &cfg, &Montage::default_30()).expect("synth");
    let markers = plans_to_markers(&plans, cfg.sample_rate);
    let raw = extract_epochs(&recording, &markers, spec.feature_window).expect("epochs");
    let filter = design_butterworth_bandpass(5, 8.0, 30.0, recording.sample_rate()).expect("design");
    let smooth = filter_recording(&filter, &recording, FilterMode::ZeroPhase).expect("filter");
    let filtered = extract_epochs(&smooth, &markers, spec.feature_window).expect("epochs");
    Session {
        recording,
        raw,
        filtered,
    }
}
