use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate: f64,
    /// Leading span of causally filtered output dominated by start-up transients.
    pub transient_s: f64,
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    sections: Vec<Biquad>,
    design: FilterDesign,
}

impl IirFilter {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn design(&self) -> &FilterDesign {
        &self.design
    }

    /// Complex response of the cascade at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = std::f64::consts::TAU * freq_hz / self.design.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    /// Filters `data` in place, zero initial state.
    pub fn apply_in_place(&self, data: &mut [f64]) {
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in data.iter_mut() {
                let input = *x;
                let y = s.b0 * input + z1;
                z1 = s.b1 * input - s.a1 * y + z2;
                z2 = s.b2 * input - s.a2 * y;
                *x = y;
            }
        }
    }

    /// Forward pass, then a pass over the time-reversed result.
    pub fn apply_zero_phase_in_place(&self, data: &mut [f64]) {
        self.apply_in_place(data);
        data.reverse();
        self.apply_in_place(data);
        data.reverse();
    }
}

/// Digital Butterworth band-pass of the given prototype order.
///
/// The analog low-pass prototype is shifted to a band-pass around the
/// pre-warped band edges and discretised with the bilinear transform, giving
/// `2 * order` poles in `order` sections. Each section carries one zero at
/// `z = 1` and one at `z = -1` and is scaled to unit gain at the band centre.
pub fn design_butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    sample_rate: f64,
) -> Result<IirFilter> {
    if !(1..=12).contains(&order) {
        return Err(Error::FilterDesign(format!("order must be 1..=12, got {order}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::FilterDesign(format!("invalid sample rate {sample_rate}")));
    }
    let nyquist = sample_rate / 2.0;
    if !(0.0 < low_hz && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::FilterDesign(format!(
            "band edges must satisfy 0 < low < high < {nyquist} Hz, got ({low_hz}, {high_hz})"
        )));
    }

    let k = 2.0 * sample_rate;
    let warp = |f: f64| k * (std::f64::consts::PI * f / sample_rate).tan();
    let (w_lo, w_hi) = (warp(low_hz), warp(high_hz));
    let bandwidth = w_hi - w_lo;
    let centre_sq = w_lo * w_hi;
    let bilinear = |s: Complex64| (k + s) / (k - s);

    let section = |za: Complex64, zb: Complex64| Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: -1.0,
        a1: -(za + zb).re,
        a2: (za * zb).re,
    };

    let n = order as f64;
    let mut sections = Vec::with_capacity(order);
    for i in 0..order {
        let theta = std::f64::consts::PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let proto = Complex64::from_polar(1.0, theta);
        if proto.im < -1e-12 {
            continue;
        }
        let half = proto * (bandwidth / 2.0);
        let disc = (half * half - centre_sq).sqrt();
        let (z1, z2) = (bilinear(half + disc), bilinear(half - disc));
        if proto.im > 1e-12 {
            sections.push(section(z1, z1.conj()));
            sections.push(section(z2, z2.conj()));
        } else {
            sections.push(section(z1, z2));
        }
    }
    debug_assert_eq!(sections.len(), order);

    let centre_w = 2.0 * (centre_sq.sqrt() / k).atan();
    let z_inv = Complex64::from_polar(1.0, -centre_w);
    for s in &mut sections {
        let g = s.response(z_inv).norm();
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
    }

    Ok(IirFilter {
        sections,
        design: FilterDesign {
            order,
            low_hz,
            high_hz,
            sample_rate,
            transient_s: 0.5,
        },
    })
}
