//! Shared data types: montage, continuous recordings, event markers and
//! epoch sets, plus their file formats (see [`io`]).
//!
//! All amplitudes are in microvolts.

pub mod io;
mod montage;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use montage::Montage;

/// Sampling rate of the recording amplifier.
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;

/// Converts seconds to a sample offset, rounding half away from zero.
pub fn seconds_to_samples(seconds: f64, sample_rate: f64) -> i64 {
    (seconds * sample_rate).round() as i64
}

/// Motor imagery class. Encoded as `LeftHand = -1`, `RightHand = +1`
/// everywhere (SVM targets, binary files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "L")]
    LeftHand,
    #[serde(rename = "R")]
    RightHand,
}

impl ClassLabel {
    pub const BOTH: [ClassLabel; 2] = [ClassLabel::LeftHand, ClassLabel::RightHand];

    pub fn encode(self) -> i8 {
        match self {
            ClassLabel::LeftHand => -1,
            ClassLabel::RightHand => 1,
        }
    }

    pub fn decode(code: i8) -> Option<Self> {
        match code {
            -1 => Some(ClassLabel::LeftHand),
            1 => Some(ClassLabel::RightHand),
            _ => None,
        }
    }

    pub fn sign(self) -> f64 {
        f64::from(self.encode())
    }

    /// Sign of a decision value; exactly zero maps to `RightHand`.
    pub fn from_decision(value: f64) -> Self {
        if value < 0.0 {
            ClassLabel::LeftHand
        } else {
            ClassLabel::RightHand
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            ClassLabel::LeftHand => ClassLabel::RightHand,
            ClassLabel::RightHand => ClassLabel::LeftHand,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            ClassLabel::LeftHand => "L",
            ClassLabel::RightHand => "R",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L" | "l" | "left" | "LeftHand" | "-1" => Ok(ClassLabel::LeftHand),
            "R" | "r" | "right" | "RightHand" | "1" | "+1" => Ok(ClassLabel::RightHand),
            other => Err(Error::Validation(format!("unknown class label {other:?}"))),
        }
    }
}

/// Multichannel EEG, channels x samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRecording {
    sample_rate: f64,
    data: DMatrix<f64>,
    montage: Montage,
}

impl ContinuousRecording {
    pub fn new(sample_rate: f64, data: DMatrix<f64>, montage: Montage) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if data.nrows() != montage.len() {
            return Err(Error::ChannelCount {
                expected: montage.len(),
                found: data.nrows(),
                location: "data matrix".into(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let (r, c) = (i % data.nrows(), i / data.nrows());
            return Err(Error::Validation(format!(
                "non-finite sample at channel {r}, sample {c}"
            )));
        }
        Ok(ContinuousRecording {
            sample_rate,
            data,
            montage,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn montage(&self) -> &Montage {
        &self.montage
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub sample_index: usize,
    pub label: ClassLabel,
    pub trial_index: usize,
}

/// Checks that sample indices strictly increase and trial indices are unique.
pub fn validate_markers(markers: &[EventMarker]) -> Result<()> {
    let mut trials = std::collections::HashSet::new();
    for (i, m) in markers.iter().enumerate() {
        if i > 0 && m.sample_index <= markers[i - 1].sample_index {
            return Err(Error::Validation(format!(
                "marker {i}: sample index {} does not increase",
                m.sample_index
            )));
        }
        if !trials.insert(m.trial_index) {
            return Err(Error::Validation(format!(
                "duplicate trial index {}",
                m.trial_index
            )));
        }
    }
    Ok(())
}

/// Fixed-length labelled trial windows. Each trial is channels x samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    trials: Vec<DMatrix<f64>>,
    labels: Vec<ClassLabel>,
    sample_rate: f64,
    window: (f64, f64),
}

impl EpochSet {
    pub fn new(
        trials: Vec<DMatrix<f64>>,
        labels: Vec<ClassLabel>,
        sample_rate: f64,
        window: (f64, f64),
    ) -> Result<Self> {
        if trials.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} trials but {} labels",
                trials.len(),
                labels.len()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if window.0.partial_cmp(&window.1) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Parameter(format!(
                "window start {} must precede end {}",
                window.0, window.1
            )));
        }
        if let Some(first) = trials.first() {
            let shape = first.shape();
            if let Some(t) = trials.iter().position(|x| x.shape() != shape) {
                return Err(Error::Validation(format!(
                    "trial {t} has shape {:?}, expected {shape:?}",
                    trials[t].shape()
                )));
            }
        }
        Ok(EpochSet {
            trials,
            labels,
            sample_rate,
            window,
        })
    }

    pub fn trials(&self) -> &[DMatrix<f64>] {
        &self.trials
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.trials.first().map_or(0, |x| x.nrows())
    }

    pub fn n_samples(&self) -> usize {
        self.trials.first().map_or(0, |x| x.ncols())
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Subset by trial indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> EpochSet {
        EpochSet {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sample_rate: self.sample_rate,
            window: self.window,
        }
    }

    pub fn with_labels(&self, labels: Vec<ClassLabel>) -> Result<EpochSet> {
        EpochSet::new(self.trials.clone(), labels, self.sample_rate, self.window)
    }

    pub fn map_trials(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64> + Sync + Send) -> EpochSet {
        use rayon::prelude::*;
        EpochSet {
            trials: self.trials.par_iter().map(f).collect(),
            labels: self.labels.clone(),
            sample_rate: self.sample_rate,
            window: self.window,
        }
    }

    /// Errors unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        for label in ClassLabel::BOTH {
            if self.count(label) == 0 {
                return Err(Error::InsufficientData(format!("no {label} trials in epoch set")));
            }
        }
        Ok(())
    }
}

/// Cuts one window per marker out of a continuous recording.
///
/// Epoch `t` covers samples `[m + round(start*rate), m + round(start*rate) + round((end-start)*rate))`
/// where `m` is the marker's sample index; the data is copied.
pub fn extract_epochs(
    rec: &ContinuousRecording,
    markers: &[EventMarker],
    window: (f64, f64),
) -> Result<EpochSet> {
    let (start_s, end_s) = window;
    if start_s.partial_cmp(&end_s) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Parameter(format!(
            "window start {start_s} must precede end {end_s}"
        )));
    }
    let rate = rec.sample_rate();
    let offset = seconds_to_samples(start_s, rate);
    let len = seconds_to_samples(end_s - start_s, rate);
    if len <= 0 {
        return Err(Error::Parameter(format!(
            "window ({start_s}, {end_s}) s is shorter than one sample at {rate} Hz"
        )));
    }
    let total = rec.n_samples() as i64;
    let overrun: Vec<usize> = markers
        .iter()
        .filter(|m| {
            let begin = m.sample_index as i64 + offset;
            begin < 0 || begin + len > total
        })
        .map(|m| m.trial_index)
        .collect();
    if !overrun.is_empty() {
        return Err(Error::WindowOverrun { trials: overrun });
    }
    let trials = markers
        .iter()
        .map(|m| {
            let begin = (m.sample_index as i64 + offset) as usize;
            rec.data().columns(begin, len as usize).into_owned()
        })
        .collect();
    EpochSet::new(trials, markers.iter().map(|m| m.label).collect(), rate, window)
}
