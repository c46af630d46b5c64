use std::f64::consts::PI;

use mibci_core::dsp::{
    design_butterworth_bandpass, filter_epochs, welch_psd, welch_psd_matrix, FilterMode, PsdParams,
};
use mibci_core::model::{ClassLabel, EpochSet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn designs_are_stable_across_orders_and_bands() {
    for order in 1..=12 {
        for (low, high) in [
            (0.5, 4.0),
            (8.0, 12.0),
            (8.0, 30.0),
            (13.0, 30.0),
            (1.0, 100.0),
            (40.0, 120.0),
        ] {
            let f = design_butterworth_bandpass(order, low, high, 250.0).unwrap();
            assert_eq!(f.poles().len(), 2 * order);
            for p in f.poles() {
                assert!(
                    p.norm() < 1.0 - 1e-9,
                    "order {order} ({low},{high}): |p| = {}",
                    p.norm()
                );
            }
            for edge in [low, high] {
                let db = f.magnitude_db(edge);
                assert!(
                    (db + 3.0103).abs() < 0.1,
                    "order {order} ({low},{high}) at {edge}: {db}"
                );
            }
            let centre_hz = 250.0 / PI
                * ((PI * low / 250.0).tan() * (PI * high / 250.0).tan())
                    .sqrt()
                    .atan();
            assert!(f.magnitude_db(centre_hz).abs() < 1e-6);
        }
    }
}

#[test]
fn filtering_is_linear() {
    let f = design_butterworth_bandpass(5, 8.0, 30.0, 250.0).unwrap();
    let (x, y) = (noise(2000, 1), noise(2000, 2));
    let (a, b) = (2.5, -0.75);
    for zero_phase in [false, true] {
        let run = |mut v: Vec<f64>| {
            if zero_phase {
                f.apply_zero_phase_in_place(&mut v);
            } else {
                f.apply_in_place(&mut v);
            }
            v
        };
        let combined = run(x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect());
        let (fx, fy) = (run(x.clone()), run(y.clone()));
        for i in 0..combined.len() {
            assert!((combined[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }
}

#[test]
fn causal_impulse_response_matches_the_transfer_function() {
    let f = design_butterworth_bandpass(4, 8.0, 30.0, 250.0).unwrap();
    let mut h = vec![0.0; 8192];
    h[0] = 1.0;
    f.apply_in_place(&mut h);
    for freq in [5.0, 10.0, 20.0, 45.0] {
        let w = 2.0 * PI * freq / 250.0;
        let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| {
            (re + v * (w * n as f64).cos(), im - v * (w * n as f64).sin())
        });
        let expected = f.response(freq);
        assert!(
            (re - expected.re).abs() < 1e-8 && (im - expected.im).abs() < 1e-8,
            "{freq} Hz"
        );
    }
}

#[test]
fn epoch_filtering_is_partition_independent() {
    let f = design_butterworth_bandpass(5, 8.0, 30.0, 250.0).unwrap();
    let trials: Vec<DMatrix<f64>> = (0..4)
        .map(|t| DMatrix::from_vec(3, 500, noise(1500, 10 + t)))
        .collect();
    let labels = vec![
        ClassLabel::LeftHand,
        ClassLabel::RightHand,
        ClassLabel::LeftHand,
        ClassLabel::RightHand,
    ];
    let set = EpochSet::new(trials.clone(), labels.clone(), 250.0, (3.0, 5.0)).unwrap();
    for mode in [FilterMode::Causal, FilterMode::ZeroPhase] {
        let all = filter_epochs(&f, &set, mode).unwrap();
        for (t, trial) in trials.iter().enumerate() {
            let one = EpochSet::new(vec![trial.clone()], vec![labels[t]], 250.0, (3.0, 5.0)).unwrap();
            let alone = filter_epochs(&f, &one, mode).unwrap();
            assert_eq!(alone.trials()[0], all.trials()[t]);
        }
    }
}

#[test]
fn welch_satisfies_parseval_for_white_noise() {
    let x = DMatrix::from_row_slice(1, 25_000, &noise(25_000, 5));
    let psd = welch_psd_matrix(&x, 250.0, PsdParams::default()).unwrap();
    let total: f64 = psd.power[0].iter().sum::<f64>() * psd.resolution();
    let variance = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((total / variance - 1.0).abs() < 0.03, "{total} vs {variance}");
}

#[test]
fn welch_places_a_sinusoid_in_its_bin_with_its_power() {
    let amp = 3.0;
    let x = DMatrix::from_fn(1, 1000, |_, n| amp * (2.0 * PI * 17.0 * n as f64 / 250.0).sin());
    let psd = welch_psd_matrix(&x, 250.0, PsdParams::default()).unwrap();
    assert_eq!(psd.freqs[psd.peak_bin(0)], 17.0);
    let band = psd.band_power(0, 14.0, 20.0);
    assert!((band / (amp * amp / 2.0) - 1.0).abs() < 0.01, "{band}");
}

#[test]
fn welch_ignores_trial_order() {
    let trials: Vec<DMatrix<f64>> = (0..6)
        .map(|t| DMatrix::from_vec(2, 1000, noise(2000, 40 + t)))
        .collect();
    let labels: Vec<ClassLabel> = (0..6)
        .map(|t| {
            if t % 2 == 0 {
                ClassLabel::LeftHand
            } else {
                ClassLabel::RightHand
            }
        })
        .collect();
    let set = EpochSet::new(trials.clone(), labels.clone(), 250.0, (3.0, 7.0)).unwrap();
    let order = [5, 3, 1, 4, 0, 2];
    let shuffled = EpochSet::new(
        order.iter().map(|&i| trials[i].clone()).collect(),
        order.iter().map(|&i| labels[i]).collect(),
        250.0,
        (3.0, 7.0),
    )
    .unwrap();
    for class in [None, Some(ClassLabel::RightHand)] {
        let (a, b) = (
            welch_psd(&set, class, PsdParams::default()).unwrap(),
            welch_psd(&shuffled, class, PsdParams::default()).unwrap(),
        );
        for (ra, rb) in a.power.iter().zip(&b.power) {
            for (va, vb) in ra.iter().zip(rb) {
                assert!((va - vb).abs() <= 1e-12 * va.abs().max(1e-300));
            }
        }
    }
}
