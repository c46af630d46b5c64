//! Offline motor-imagery EEG analysis.
//!
//! The pipeline runs paradigm scheduling ([`paradigm`]), synthetic recording
//! ([`synth`]), epoching ([`model`]), Butterworth band-pass filtering and
//! Welch spectra ([`dsp`]), common spatial patterns ([`spatial`]), a linear
//! soft-margin SVM ([`classify`]) and repeated stratified cross-validation
//! with the paradigm-comparison statistics ([`eval`]). [`experiment`]
//! composes all of them into one reproducible run.

pub mod classify;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod paradigm;
pub mod spatial;
pub mod synth;

pub use classify::{predict, train_svm, train_svm_standardized, SvmModel};
pub use dsp::{design_butterworth_bandpass, filter_epochs, welch_psd, FilterMode, IirFilter, PsdEstimate};
pub use error::{Error, Result};
pub use eval::{cross_validate, paired_t_test, CvReport, PipelineConfig};
pub use model::{extract_epochs, ClassLabel, ContinuousRecording, EpochSet, EventMarker, Montage};
pub use paradigm::{generate_sequence, plans_to_markers, ParadigmKind, ParadigmSpec, TrialPlan};
pub use spatial::{csp_features, fit_csp, CspModel, FeatureMatrix};
pub use synth::{synthesize, SynthConfig};
