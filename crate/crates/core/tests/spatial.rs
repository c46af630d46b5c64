mod common;

use mibci_core::model::{ClassLabel, EpochSet, Montage};
use mibci_core::spatial::{
    class_covariance, csp_features, fit_csp, fit_csp_from_covariances, trial_covariance,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_epochs(channels: usize, trials_per_class: usize, rng: &mut ChaCha8Rng) -> EpochSet {
    let mix_r = DMatrix::from_fn(channels, channels, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mix_l = DMatrix::from_fn(channels, channels, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    for t in 0..2 * trials_per_class {
        let label = if t % 2 == 0 {
            ClassLabel::RightHand
        } else {
            ClassLabel::LeftHand
        };
        let mix = if label == ClassLabel::RightHand {
            &mix_r
        } else {
            &mix_l
        };
        let s = DMatrix::from_fn(channels, 200, |_, _| rng.sample::<f64, _>(StandardNormal));
        trials.push(mix * s);
        labels.push(label);
    }
    EpochSet::new(trials, labels, 250.0, (0.0, 0.8)).unwrap()
}

/// Roots of det(C_R - lambda (C_R + C_L)) in [0, 1] by sign-change bracketing
/// and bisection; independent of any eigen-solver.
fn generalized_eigvals_by_determinant(right: &DMatrix<f64>, left: &DMatrix<f64>) -> Vec<f64> {
    let composite = right + left;
    let det = |lambda: f64| (right - &composite * lambda).determinant();
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev = (0.0, det(0.0));
    for k in 1..=steps {
        let x = k as f64 / steps as f64;
        let cur = (x, det(x));
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1.signum() != cur.1.signum() && cur.1 != 0.0 {
            let (mut lo, mut hi) = (prev.0, cur.0);
            let flo = prev.1;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if det(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    if prev.1 == 0.0 {
        roots.push(prev.0);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

#[test]
fn analytic_two_channel_case() {
    let right = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0]) / 3.0;
    let left = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0]) / 3.0;
    let m = fit_csp_from_covariances(&right, &left, 1, 0.0).unwrap();
    assert!((m.eigvals[0] - 2.0 / 3.0).abs() < 1e-9);
    assert!((m.eigvals[1] - 1.0 / 3.0).abs() < 1e-9);
    assert!(m.full_w[(0, 1)].abs() < 1e-9 && m.full_w[(1, 0)].abs() < 1e-9);
}

#[test]
fn identical_classes_give_one_half_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = &a * a.transpose();
    let m = fit_csp_from_covariances(&c, &c, 2, 0.0).unwrap();
    assert!(
        m.eigvals.iter().all(|l| (l - 0.5).abs() < 1e-9),
        "{:?}",
        m.eigvals
    );
}

#[test]
fn eigenvalues_match_the_determinant_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..20 {
        let channels = 3 + case % 2;
        let epochs = random_epochs(channels, 6, &mut rng);
        let right = class_covariance(&epochs, ClassLabel::RightHand).unwrap();
        let left = class_covariance(&epochs, ClassLabel::LeftHand).unwrap();
        let model = fit_csp_from_covariances(&right, &left, 1, 0.0).unwrap();
        let oracle = generalized_eigvals_by_determinant(&right, &left);
        assert_eq!(oracle.len(), channels, "case {case}: {oracle:?}");
        for (a, b) in model.eigvals.iter().zip(&oracle) {
            assert!(
                (a - b).abs() < 1e-6,
                "case {case}: {:?} vs {oracle:?}",
                model.eigvals
            );
        }
    }
}

#[test]
fn simultaneous_diagonalization_and_pattern_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for channels in [2, 3, 5, 8] {
        let epochs = random_epochs(channels, 10, &mut rng);
        let right = class_covariance(&epochs, ClassLabel::RightHand).unwrap();
        let left = class_covariance(&epochs, ClassLabel::LeftHand).unwrap();
        let m = fit_csp_from_covariances(&right, &left, 1, 0.0).unwrap();
        let w = &m.full_w;
        let dr = w * &right * w.transpose();
        let dl = w * &left * w.transpose();
        assert!(max_off_diagonal(&dr) <= 1e-8 && max_off_diagonal(&dl) <= 1e-8);
        let sum = &dr + &dl;
        assert!((sum - DMatrix::identity(channels, channels)).amax() <= 1e-8);
        for (i, l) in m.eigvals.iter().enumerate() {
            assert!((dr[(i, i)] - l).abs() < 1e-10);
            assert!((l + dl[(i, i)] - 1.0).abs() < 1e-10);
        }
        assert!(m.eigvals.windows(2).all(|p| p[0] >= p[1]));
        assert!((w * &m.patterns - DMatrix::identity(channels, channels)).amax() <= 1e-8);
    }
}

#[test]
fn ridge_keeps_whitening_of_the_ridged_composite() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let epochs = random_epochs(6, 10, &mut rng);
    let m = fit_csp(&epochs, 3, 1e-3).unwrap();
    let right = class_covariance(&epochs, ClassLabel::RightHand).unwrap();
    let left = class_covariance(&epochs, ClassLabel::LeftHand).unwrap();
    let composite = &right + &left + DMatrix::identity(6, 6) * m.ridge_added;
    let whitened = &m.full_w * composite * m.full_w.transpose();
    assert!((whitened - DMatrix::identity(6, 6)).amax() <= 1e-8);
    assert!((m.ridge_added - 1e-3 * 2.0 / 6.0).abs() < 1e-15);
}

#[test]
fn eigenvalues_are_invariant_to_channel_mixing() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for channels in [3, 4, 6] {
        let epochs = random_epochs(channels, 8, &mut rng);
        let right = class_covariance(&epochs, ClassLabel::RightHand).unwrap();
        let left = class_covariance(&epochs, ClassLabel::LeftHand).unwrap();
        let mix = DMatrix::from_fn(channels, channels, |_, _| rng.sample::<f64, _>(StandardNormal));
        let before = fit_csp_from_covariances(&right, &left, 1, 0.0).unwrap();
        let after = fit_csp_from_covariances(
            &(&mix * &right * mix.transpose()),
            &(&mix * &left * mix.transpose()),
            1,
            0.0,
        )
        .unwrap();
        for (a, b) in before.eigvals.iter().zip(&after.eigvals) {
            assert!(
                (a - b).abs() < 1e-6,
                "{:?} vs {:?}",
                before.eigvals,
                after.eigvals
            );
        }
    }
}

#[test]
fn trace_normalisation_examples() {
    let c = trial_covariance(&DMatrix::identity(2, 2));
    assert_eq!(c, DMatrix::from_diagonal(&nalgebra::dvector![0.5, 0.5]));
    // rows scaled so that X Xᵀ / tr = diag(0.8, 0.2) and diag(0.6, 0.4)
    let trial = |a: f64, b: f64| {
        DMatrix::from_row_slice(
            2,
            4,
            &[a.sqrt(), a.sqrt(), 0.0, 0.0, 0.0, 0.0, b.sqrt(), b.sqrt()],
        )
    };
    let set = EpochSet::new(
        vec![trial(0.8, 0.2), trial(0.6, 0.4)],
        vec![ClassLabel::LeftHand; 2],
        250.0,
        (0.0, 1.0),
    )
    .unwrap();
    let mean = class_covariance(&set, ClassLabel::LeftHand).unwrap();
    assert!((mean - DMatrix::from_diagonal(&nalgebra::dvector![0.7, 0.3])).amax() < 1e-12);
}

#[test]
fn features_ignore_per_trial_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let epochs = random_epochs(5, 6, &mut rng);
    let model = fit_csp(&epochs, 2, 1e-8).unwrap();
    let scaled = epochs.map_trials(|t| t * 10.0);
    let (a, b) = (
        csp_features(&model, &epochs).unwrap(),
        csp_features(&model, &scaled).unwrap(),
    );
    assert!((a.rows - b.rows).amax() < 1e-12);
}

#[test]
fn synthetic_patterns_peak_over_the_motor_sources() {
    let montage = Montage::default_30();
    let (c3, c4) = (montage.index_of("C3").unwrap(), montage.index_of("C4").unwrap());
    let epochs = common::filtered_epochs(5, 0.8, 10.0);
    let model = fit_csp(&epochs, 3, 1e-8).unwrap();
    let n = model.n_channels();
    assert!(montage.is_at_or_adjacent(model.pattern_peak(0), c4));
    assert!(montage.is_at_or_adjacent(model.pattern_peak(n - 1), c3));
    let features = csp_features(&model, &epochs).unwrap();
    let mean_first = |label| {
        let rows: Vec<f64> = (0..features.len())
            .filter(|&t| features.labels[t] == label)
            .map(|t| features.rows[(t, 0)])
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    assert!(mean_first(ClassLabel::RightHand) > mean_first(ClassLabel::LeftHand));
}
