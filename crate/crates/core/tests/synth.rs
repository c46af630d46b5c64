mod common;

use mibci_core::dsp::{welch_psd_matrix, PsdParams};
use mibci_core::eval::two_sample_t_test;
use mibci_core::model::{ClassLabel, EpochSet, Montage};
use mibci_core::paradigm::{generate_sequence, CharacterCatalog, ParadigmSpec};
use mibci_core::synth::{pink_noise, synthesize, SynthConfig};
use nalgebra::DMatrix;

fn mu_log_power(epochs: &EpochSet, channel: usize, label: ClassLabel) -> Vec<f64> {
    epochs
        .trials()
        .iter()
        .zip(epochs.labels())
        .filter(|(_, l)| **l == label)
        .map(|(x, _)| {
            let row = DMatrix::from_row_slice(1, x.ncols(), x.row(channel).transpose().as_slice());
            let psd = welch_psd_matrix(&row, epochs.sample_rate(), PsdParams::default()).unwrap();
            psd.band_power(0, 8.0, 12.0).ln()
        })
        .collect()
}

#[test]
fn erd_lowers_mu_power_over_the_contralateral_hemisphere() {
    let montage = Montage::default_30();
    let (c3, c4) = (montage.index_of("C3").unwrap(), montage.index_of("C4").unwrap());
    let epochs = common::raw_epochs(1, 0.8, 10.0);
    assert_eq!(epochs.len(), 100);
    let at = |ch| {
        let right = mu_log_power(&epochs, ch, ClassLabel::RightHand);
        let left = mu_log_power(&epochs, ch, ClassLabel::LeftHand);
        two_sample_t_test(&right, &left).unwrap()
    };
    let c3_test = at(c3);
    assert!(
        c3_test.t_statistic < 0.0 && c3_test.p_two_tailed < 0.01,
        "{c3_test:?}"
    );
    let c4_test = at(c4);
    assert!(
        c4_test.t_statistic > 0.0 && c4_test.p_two_tailed < 0.01,
        "{c4_test:?}"
    );
}

#[test]
fn no_erd_means_no_class_difference() {
    let c3 = Montage::default_30().index_of("C3").unwrap();
    let epochs = common::raw_epochs(2, 0.0, 10.0);
    let right = mu_log_power(&epochs, c3, ClassLabel::RightHand);
    let left = mu_log_power(&epochs, c3, ClassLabel::LeftHand);
    let t = two_sample_t_test(&right, &left).unwrap();
    assert!(t.p_two_tailed > 0.01, "{t:?}");
}

#[test]
fn noise_free_spectrum_peaks_at_the_rhythm_frequencies() {
    let spec = ParadigmSpec::default();
    let plans = generate_sequence(&spec, &CharacterCatalog::bundled(), 4).unwrap();
    let montage = Montage::default_30();
    for (mu, beta) in [(10.0, 20.0), (9.0, 24.0), (12.0, 17.0)] {
        let cfg = SynthConfig {
            noise_scale: 0.0,
            erd_depth: 0.0,
            mu_freq: mu,
            beta_freq: beta,
            ..SynthConfig::default()
        };
        let rec = synthesize(&spec, &plans, &cfg, &montage).unwrap();
        let c3 = montage.index_of("C3").unwrap();
        let row = DMatrix::from_row_slice(1, rec.n_samples(), rec.data().row(c3).transpose().as_slice());
        let psd = welch_psd_matrix(&row, rec.sample_rate(), PsdParams::default()).unwrap();
        let res = psd.resolution();
        assert!((psd.freqs[psd.peak_bin(0)] - mu).abs() <= res, "mu {mu}");
        let beta_peak = psd
            .freqs
            .iter()
            .zip(&psd.power[0])
            .filter(|(f, _)| **f >= mu + 3.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((beta_peak - beta).abs() <= res, "beta {beta}: {beta_peak}");
    }
}

#[test]
fn background_noise_is_pink() {
    let x = pink_noise(250 * 600, 10.0, 99, 1);
    let sd = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    assert!((sd - 10.0).abs() < 1e-9);
    let row = DMatrix::from_row_slice(1, x.len(), &x);
    let psd = welch_psd_matrix(&row, 250.0, PsdParams::default()).unwrap();
    let points: Vec<(f64, f64)> = psd
        .freqs
        .iter()
        .zip(&psd.power[0])
        .filter(|(f, _)| (2.0..=40.0).contains(*f))
        .map(|(f, p)| (f.ln(), p.ln()))
        .collect();
    let n = points.len() as f64;
    let (mx, my) = (
        points.iter().map(|p| p.0).sum::<f64>() / n,
        points.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn generation_is_deterministic_and_seed_dependent() {
    let (a, _, _) = common::recording(8, 0.5, 10.0);
    let (b, _, _) = common::recording(8, 0.5, 10.0);
    assert_eq!(a.data(), b.data());
    let (c, _, _) = common::recording(9, 0.5, 10.0);
    assert_ne!(a.data(), c.data());
}
