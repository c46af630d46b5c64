//! Synthetic EEG with contralateral event-related desynchronisation.
//!
//! Two rhythmic sources sit under the left and right motor channels. Each
//! carries a mu and a beta sinusoid with a fresh random phase every trial and
//! a slow 0.5 Hz amplitude wobble. During a trial's ERD window the source
//! contralateral to the imagined hand is scaled by `1 - erd_depth`. Sources
//! reach the electrodes through a Gaussian falloff in head-plane distance and
//! every channel gets independent pink (1/f) background noise.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{seconds_to_samples, ClassLabel, ContinuousRecording, Montage, DEFAULT_SAMPLE_RATE};
use crate::paradigm::{ParadigmSpec, TrialPlan};

const JITTER_HZ: f64 = 0.5;
const JITTER_DEPTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceChannels {
    pub left_motor: String,
    pub right_motor: String,
}

impl Default for SourceChannels {
    fn default() -> Self {
        SourceChannels {
            left_motor: "C3".into(),
            right_motor: "C4".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate: f64,
    /// Standard deviation of the pink background on each channel, uV.
    pub noise_scale: f64,
    pub mu_amp: f64,
    pub mu_freq: f64,
    pub beta_amp: f64,
    pub beta_freq: f64,
    pub erd_depth: f64,
    /// Relative to trial onset, seconds.
    pub erd_window: (f64, f64),
    pub source_channels: SourceChannels,
    /// Width of the Gaussian spatial falloff, in unit-disc coordinates.
    pub spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            noise_scale: 10.0,
            mu_amp: 6.0,
            mu_freq: 10.0,
            beta_amp: 2.0,
            beta_freq: 20.0,
            erd_depth: 0.8,
            erd_window: (2.5, 8.0),
            source_channels: SourceChannels::default(),
            spread: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.erd_depth) {
            return cfg(format!("erd_depth must lie in [0, 1], got {}", self.erd_depth));
        }
        if !(8.0..=12.0).contains(&self.mu_freq) {
            return cfg(format!("mu_freq must lie in 8-12 Hz, got {}", self.mu_freq));
        }
        if !(13.0..=30.0).contains(&self.beta_freq) {
            return cfg(format!("beta_freq must lie in 13-30 Hz, got {}", self.beta_freq));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 2.0 * self.beta_freq) {
            return cfg(format!(
                "sample_rate {} cannot represent the beta rhythm",
                self.sample_rate
            ));
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("mu_amp", self.mu_amp),
            ("beta_amp", self.beta_amp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return cfg(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return cfg(format!("spread must be positive, got {}", self.spread));
        }
        if self.erd_window.0.partial_cmp(&self.erd_window.1) != Some(std::cmp::Ordering::Less) {
            return cfg(format!("erd_window {:?} is empty", self.erd_window));
        }
        Ok(())
    }
}

/// Phases drawn once per trial per source.
struct TrialPhases {
    mu: f64,
    beta: f64,
    mu_jitter: f64,
    beta_jitter: f64,
}

impl TrialPhases {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut phase = || rng.random::<f64>() * std::f64::consts::TAU;
        TrialPhases {
            mu: phase(),
            beta: phase(),
            mu_jitter: phase(),
            beta_jitter: phase(),
        }
    }
}

/// Generates a continuous recording covering every planned trial.
pub fn synthesize(
    spec: &ParadigmSpec,
    plans: &[TrialPlan],
    cfg: &SynthConfig,
    montage: &Montage,
) -> Result<ContinuousRecording> {
    cfg.validate()?;
    spec.validate()?;
    let source_index = |name: &str| {
        montage
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("source channel {name} is not in the montage")))
    };
    // order: left motor, right motor
    let sources = [
        source_index(&cfg.source_channels.left_motor)?,
        source_index(&cfg.source_channels.right_motor)?,
    ];

    let rate = cfg.sample_rate;
    let trial_len = spec.trial_duration_s();
    let total = plans.last().map_or(0, |p| {
        seconds_to_samples(p.onset_s + trial_len, rate).max(0) as usize
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut source_signals = [vec![0.0; total], vec![0.0; total]];
    let tau = std::f64::consts::TAU;
    for plan in plans {
        let begin = seconds_to_samples(plan.onset_s, rate).max(0) as usize;
        let end = (seconds_to_samples(plan.onset_s + trial_len, rate).max(0) as usize).min(total);
        // RightHand imagery desynchronises the left motor source and vice versa
        let suppressed = match plan.label {
            ClassLabel::RightHand => 0,
            ClassLabel::LeftHand => 1,
        };
        for (s, signal) in source_signals.iter_mut().enumerate() {
            let ph = TrialPhases::draw(&mut rng);
            for (i, out) in signal[begin..end].iter_mut().enumerate() {
                let t = (begin + i) as f64 / rate - plan.onset_s;
                let mu_env = cfg.mu_amp * (1.0 + JITTER_DEPTH * (tau * JITTER_HZ * t + ph.mu_jitter).sin());
                let beta_env =
                    cfg.beta_amp * (1.0 + JITTER_DEPTH * (tau * JITTER_HZ * t + ph.beta_jitter).sin());
                let mut v = mu_env * (tau * cfg.mu_freq * t + ph.mu).sin()
                    + beta_env * (tau * cfg.beta_freq * t + ph.beta).sin();
                if s == suppressed && t >= cfg.erd_window.0 && t < cfg.erd_window.1 {
                    v *= 1.0 - cfg.erd_depth;
                }
                *out = v;
            }
        }
    }

    let weights: Vec<[f64; 2]> = (0..montage.len())
        .map(|ch| {
            sources.map(|src| {
                let d = montage.distance(ch, src);
                (-d * d / (2.0 * cfg.spread * cfg.spread)).exp()
            })
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..montage.len())
        .into_par_iter()
        .map(|ch| {
            let mut row = pink_noise(total, cfg.noise_scale, cfg.seed, ch as u64 + 1);
            for (w, signal) in weights[ch].iter().zip(&source_signals) {
                if *w > 1e-6 {
                    row.iter_mut().zip(signal).for_each(|(r, s)| *r += w * s);
                }
            }
            // stored at single precision so csv-v1 round-trips bit-exactly
            row.iter_mut().for_each(|v| *v = f64::from(*v as f32));
            row
        })
        .collect();

    let data = DMatrix::from_fn(montage.len(), total, |r, c| rows[r][c]);
    ContinuousRecording::new(rate, data, montage.clone())
}

/// Zero-mean noise with a 1/f power spectrum, scaled to standard deviation `scale`.
///
/// White Gaussian noise is shaped in the frequency domain by `1/sqrt(f)`.
pub fn pink_noise(n: usize, scale: f64, seed: u64, stream: u64) -> Vec<f64> {
    if n == 0 || scale == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, b) in buf.iter_mut().enumerate().skip(1) {
        *b /= (k.min(n - k) as f64).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd > 0.0 {
        out.iter_mut().for_each(|v| *v = (*v - mean) * scale / sd);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paradigm::{generate_sequence, CharacterCatalog, ParadigmKind};

    fn short_session(trials_per_run: usize) -> (ParadigmSpec, Vec<TrialPlan>) {
        let spec = ParadigmSpec {
            runs: 1,
            trials_per_run,
            ..ParadigmSpec::with_kind(ParadigmKind::Arrow)
        };
        let plans = generate_sequence(&spec, &CharacterCatalog::empty(), 1).unwrap();
        (spec, plans)
    }

    #[test]
    fn recording_spans_the_session_and_is_deterministic() {
        let (spec, plans) = short_session(4);
        let cfg = SynthConfig {
            seed: 3,
            ..Default::default()
        };
        let m = Montage::default_30();
        let a = synthesize(&spec, &plans, &cfg, &m).unwrap();
        let b = synthesize(&spec, &plans, &cfg, &m).unwrap();
        assert_eq!(a.n_samples(), 4 * 2500);
        assert_eq!(a.n_channels(), 30);
        assert_eq!(a.data(), b.data());
        let c = synthesize(&spec, &plans, &SynthConfig { seed: 4, ..cfg }, &m).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn missing_source_channel_is_a_config_error() {
        let (spec, plans) = short_session(2);
        let cfg = SynthConfig {
            source_channels: SourceChannels {
                left_motor: "C5".into(),
                right_motor: "C4".into(),
            },
            ..Default::default()
        };
        let err = synthesize(&spec, &plans, &cfg, &Montage::default_30()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn config_ranges_are_enforced() {
        for bad in [
            SynthConfig {
                erd_depth: 1.5,
                ..Default::default()
            },
            SynthConfig {
                mu_freq: 7.0,
                ..Default::default()
            },
            SynthConfig {
                beta_freq: 31.0,
                ..Default::default()
            },
            SynthConfig {
                spread: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(SynthConfig::default().validate().is_ok());
    }

    #[test]
    fn pink_noise_has_requested_scale() {
        let x = pink_noise(10_000, 7.0, 1, 1);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var.sqrt() - 7.0).abs() < 1e-9);
        assert_eq!(x, pink_noise(10_000, 7.0, 1, 1));
        assert_ne!(x, pink_noise(10_000, 7.0, 1, 2));
    }

    #[test]
    fn samples_are_single_precision_values() {
        let (spec, plans) = short_session(2);
        let rec = synthesize(&spec, &plans, &SynthConfig::default(), &Montage::default_30()).unwrap();
        assert!(rec.data().iter().all(|v| f64::from(*v as f32) == *v));
    }
}
