use std::io::Write;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, EpochSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdParams {
    pub seg_len: usize,
    pub overlap: f64,
    pub window: WindowKind,
}

impl Default for PsdParams {
    fn default() -> Self {
        PsdParams {
            seg_len: 250,
            overlap: 0.5,
            window: WindowKind::Hann,
        }
    }
}

/// One-sided power spectral density, per channel, in uV^2/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    /// `power[channel][bin]`
    pub power: Vec<Vec<f64>>,
    pub params: PsdParams,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).map_or(0.0, |f| f - self.freqs[0])
    }

    /// Sum of `power * df` over bins with `low_hz <= f <= high_hz`.
    pub fn band_power(&self, channel: usize, low_hz: f64, high_hz: f64) -> f64 {
        let df = self.resolution();
        self.freqs
            .iter()
            .zip(&self.power[channel])
            .filter(|(f, _)| (low_hz..=high_hz).contains(*f))
            .map(|(_, p)| p * df)
            .sum()
    }

    /// Index of the largest bin of a channel.
    pub fn peak_bin(&self, channel: usize) -> usize {
        self.power[channel]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }

    /// CSV with a `freq_hz` column followed by one column per channel.
    pub fn write_csv<W: Write>(
        &self,
        w: &mut W,
        channel_names: &[String],
        config_hash: Option<&str>,
    ) -> std::io::Result<()> {
        if let Some(h) = config_hash {
            writeln!(w, "# config={h}")?;
        }
        write!(w, "freq_hz")?;
        for name in channel_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (bin, f) in self.freqs.iter().enumerate() {
            write!(w, "{f}")?;
            for ch in &self.power {
                write!(w, ",{:e}", ch[bin])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Welch {
    params: PsdParams,
    window: Vec<f64>,
    step: usize,
    scale: f64,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Welch {
    fn new(params: PsdParams, sample_rate: f64) -> Result<Self> {
        if params.seg_len < 2 {
            return Err(Error::Parameter(format!(
                "segment length must be >= 2, got {}",
                params.seg_len
            )));
        }
        if !(0.0..1.0).contains(&params.overlap) {
            return Err(Error::Parameter(format!(
                "overlap must lie in [0, 1), got {}",
                params.overlap
            )));
        }
        let n = params.seg_len;
        // periodic Hann
        let window: Vec<f64> = (0..n)
            .map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
            .collect();
        let energy: f64 = window.iter().map(|w| w * w).sum();
        let overlap_samples = (params.overlap * n as f64).round() as usize;
        let step = (n - overlap_samples.min(n - 1)).max(1);
        Ok(Welch {
            params,
            window,
            step,
            scale: 1.0 / (sample_rate * energy),
            fft: FftPlanner::new().plan_fft_forward(n),
        })
    }

    fn bins(&self) -> usize {
        self.params.seg_len / 2 + 1
    }

    /// Adds the periodograms of every segment of `signal` into `acc`;
    /// returns the number of segments.
    fn accumulate(&self, signal: &[f64], acc: &mut [f64], buf: &mut Vec<Complex64>) -> usize {
        let n = self.params.seg_len;
        let mut count = 0;
        let mut start = 0;
        while start + n <= signal.len() {
            let seg = &signal[start..start + n];
            let mean = seg.iter().sum::<f64>() / n as f64;
            buf.clear();
            buf.extend(
                seg.iter()
                    .zip(&self.window)
                    .map(|(x, w)| Complex64::new((x - mean) * w, 0.0)),
            );
            self.fft.process(buf);
            for (k, a) in acc.iter_mut().enumerate() {
                let mut p = buf[k].norm_sqr() * self.scale;
                if k != 0 && !(n.is_multiple_of(2) && k == n / 2) {
                    p *= 2.0;
                }
                *a += p;
            }
            count += 1;
            start += self.step;
        }
        count
    }

    fn freqs(&self, sample_rate: f64) -> Vec<f64> {
        (0..self.bins())
            .map(|k| k as f64 * sample_rate / self.params.seg_len as f64)
            .collect()
    }
}

/// Welch estimate of one channels x samples matrix.
pub fn welch_psd_matrix(x: &DMatrix<f64>, sample_rate: f64, params: PsdParams) -> Result<PsdEstimate> {
    if params.seg_len > x.ncols() {
        return Err(Error::Parameter(format!(
            "segment length {} exceeds signal length {}",
            params.seg_len,
            x.ncols()
        )));
    }
    let welch = Welch::new(params, sample_rate)?;
    let mut buf = Vec::with_capacity(params.seg_len);
    let power = (0..x.nrows())
        .map(|ch| {
            let row: Vec<f64> = x.row(ch).iter().copied().collect();
            let mut acc = vec![0.0; welch.bins()];
            let count = welch.accumulate(&row, &mut acc, &mut buf);
            acc.iter_mut().for_each(|a| *a /= count as f64);
            acc
        })
        .collect();
    Ok(PsdEstimate {
        freqs: welch.freqs(sample_rate),
        power,
        params,
    })
}

/// Average Hann-windowed periodogram over all segments of all selected trials,
/// per channel. `class_filter = None` uses every trial.
///
/// Each segment has its mean removed before windowing. The density scaling
/// makes `sum(power) * df` approximate the signal variance.
pub fn welch_psd(
    epochs: &EpochSet,
    class_filter: Option<ClassLabel>,
    params: PsdParams,
) -> Result<PsdEstimate> {
    if params.seg_len > epochs.n_samples() {
        return Err(Error::Parameter(format!(
            "segment length {} exceeds epoch length {}",
            params.seg_len,
            epochs.n_samples()
        )));
    }
    let welch = Welch::new(params, epochs.sample_rate())?;
    let selected: Vec<&DMatrix<f64>> = epochs
        .trials()
        .iter()
        .zip(epochs.labels())
        .filter(|(_, l)| class_filter.is_none_or(|c| c == **l))
        .map(|(x, _)| x)
        .collect();
    if selected.is_empty() {
        return Err(Error::InsufficientData("no trials selected for PSD".into()));
    }
    let mut buf = Vec::with_capacity(params.seg_len);
    let mut row = Vec::with_capacity(epochs.n_samples());
    let power = (0..epochs.n_channels())
        .map(|ch| {
            let mut acc = vec![0.0; welch.bins()];
            let mut count = 0;
            for x in &selected {
                row.clear();
                row.extend(x.row(ch).iter().copied());
                count += welch.accumulate(&row, &mut acc, &mut buf);
            }
            acc.iter_mut().for_each(|a| *a /= count as f64);
            acc
        })
        .collect();
    Ok(PsdEstimate {
        freqs: welch.freqs(epochs.sample_rate()),
        power,
        params,
    })
}
