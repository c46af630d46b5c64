use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::IirFilter;
use crate::error::{Error, Result};
use crate::model::{ContinuousRecording, EpochSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    Causal,
    /// Forward-backward: squared magnitude response, no group delay.
    #[default]
    ZeroPhase,
}

impl std::str::FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(FilterMode::Causal),
            "zero_phase" | "zero-phase" => Ok(FilterMode::ZeroPhase),
            other => Err(Error::Parameter(format!("unknown filter mode {other:?}"))),
        }
    }
}

fn check_rate(filter: &IirFilter, rate: f64) -> Result<()> {
    let designed = filter.design().sample_rate;
    if (designed - rate).abs() > 1e-9 * rate {
        return Err(Error::Parameter(format!(
            "filter designed for {designed} Hz applied to data sampled at {rate} Hz"
        )));
    }
    Ok(())
}

/// Filters every row of a channels x samples matrix independently.
fn filter_rows(filter: &IirFilter, x: &DMatrix<f64>, mode: FilterMode) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|r| {
            let mut row: Vec<f64> = x.row(r).iter().copied().collect();
            match mode {
                FilterMode::Causal => filter.apply_in_place(&mut row),
                FilterMode::ZeroPhase => filter.apply_zero_phase_in_place(&mut row),
            }
            row
        })
        .collect();
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| rows[r][c])
}

/// Filters each channel of each trial independently; shape and labels are kept.
///
/// With [`FilterMode::Causal`] the first
/// [`FilterDesign::transient_s`](super::FilterDesign::transient_s) seconds of
/// every epoch carry start-up transients; filter the continuous recording with
/// [`filter_recording`] before epoching to keep them out of the window.
pub fn filter_epochs(filter: &IirFilter, epochs: &EpochSet, mode: FilterMode) -> Result<EpochSet> {
    check_rate(filter, epochs.sample_rate())?;
    Ok(epochs.map_trials(|x| filter_rows(filter, x, mode)))
}

pub fn filter_recording(
    filter: &IirFilter,
    rec: &ContinuousRecording,
    mode: FilterMode,
) -> Result<ContinuousRecording> {
    check_rate(filter, rec.sample_rate())?;
    let data = filter_rows(filter, rec.data(), mode);
    ContinuousRecording::new(rec.sample_rate(), data, rec.montage().clone())
}
