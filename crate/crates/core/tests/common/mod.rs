#![allow(dead_code)]

use mibci_core::dsp::{design_butterworth_bandpass, filter_recording, FilterMode};
use mibci_core::model::{extract_epochs, ContinuousRecording, EpochSet, EventMarker, Montage};
use mibci_core::paradigm::{
    generate_sequence, plans_to_markers, CharacterCatalog, ParadigmKind, ParadigmSpec,
};
use mibci_core::synth::{synthesize, SynthConfig};

pub fn recording(
    seed: u64,
    erd_depth: f64,
    noise_scale: f64,
) -> (ContinuousRecording, Vec<EventMarker>, ParadigmSpec) {
    let spec = ParadigmSpec::with_kind(ParadigmKind::Arrow);
    let plans = generate_sequence(&spec, &CharacterCatalog::bundled(), seed).unwrap();
    let cfg = SynthConfig {
        seed: seed.wrapping_mul(7919).wrapping_add(1),
        erd_depth,
        noise_scale,
        ..SynthConfig::default()
    };
    let rec = synthesize(&spec, &plans, &cfg, &Montage::default_30()).unwrap();
    let markers = plans_to_markers(&plans, cfg.sample_rate);
    (rec, markers, spec)
}

/// 100 trials, band-passed 8-30 Hz (zero phase) and cut to the 3-7 s window.
pub fn filtered_epochs(seed: u64, erd_depth: f64, noise_scale: f64) -> EpochSet {
    let (rec, markers, spec) = recording(seed, erd_depth, noise_scale);
    let filter = design_butterworth_bandpass(5, 8.0, 30.0, rec.sample_rate()).unwrap();
    let filtered = filter_recording(&filter, &rec, FilterMode::ZeroPhase).unwrap();
    extract_epochs(&filtered, &markers, spec.feature_window).unwrap()
}

pub fn raw_epochs(seed: u64, erd_depth: f64, noise_scale: f64) -> EpochSet {
    let (rec, markers, spec) = recording(seed, erd_depth, noise_scale);
    extract_epochs(&rec, &markers, spec.feature_window).unwrap()
}
