use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{predict, train_svm_standardized, DEFAULT_C, DEFAULT_TOL};
use crate::dsp::{design_butterworth_bandpass, filter_epochs, FilterMode};
use crate::error::{Error, Result};
use crate::model::{ClassLabel, EpochSet};
use crate::spatial::{fit_csp_from_covariances, TrialMoments, DEFAULT_PAIRS, DEFAULT_RIDGE};

/// Candidate values for inner-CV tuning of `c`.
pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
const INNER_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CSelection {
    Fixed(f64),
    /// Pick from [`C_GRID`] by stratified 5-fold CV inside each training fold.
    InnerCv,
}

impl Default for CSelection {
    fn default() -> Self {
        CSelection::Fixed(DEFAULT_C)
    }
}

/// Which trials the CSP, standardisation and SVM are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    #[default]
    TrainingFold,
    /// Fit on every trial, held-out ones included. Leaks labels; exists only
    /// to demonstrate what leakage does to accuracy.
    AllTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Band-pass applied to the epochs before CV; `None` when the epochs are
    /// already filtered.
    pub band: Option<(f64, f64)>,
    pub order: usize,
    pub mode: FilterMode,
    pub pairs: usize,
    pub ridge: f64,
    pub c: CSelection,
    pub tol: f64,
    pub fit_scope: FitScope,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            band: Some((8.0, 30.0)),
            order: 5,
            mode: FilterMode::ZeroPhase,
            pairs: DEFAULT_PAIRS,
            ridge: DEFAULT_RIDGE,
            c: CSelection::default(),
            tol: DEFAULT_TOL,
            fit_scope: FitScope::TrainingFold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    /// `[repeat][fold]`, fraction correct on the held-out fold.
    pub per_repeat_fold_accuracy: Vec<Vec<f64>>,
    /// Mean over every repeat and fold.
    pub mean_accuracy: f64,
    /// Sample standard deviation of the per-repeat mean accuracies.
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub predictions: Vec<ClassLabel>,
    pub accuracy: f64,
    pub c: f64,
}

/// Seeded shuffle within each class, then round-robin into `folds` folds.
/// Returns the fold index of every trial.
pub fn stratified_folds(labels: &[ClassLabel], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut assignment = vec![0; labels.len()];
    let mut slot = 0;
    for class in ClassLabel::BOTH {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            assignment[i] = slot % folds;
            slot += 1;
        }
    }
    assignment
}

fn check_folds(labels: &[ClassLabel], folds: usize) -> Result<()> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    for class in ClassLabel::BOTH {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < folds {
            return Err(Error::Config(format!(
                "{n} {class} trials cannot fill {folds} stratified folds"
            )));
        }
    }
    Ok(())
}

fn prepare(epochs: &EpochSet, cfg: &PipelineConfig) -> Result<EpochSet> {
    match cfg.band {
        Some((low, high)) => {
            let filter = design_butterworth_bandpass(cfg.order, low, high, epochs.sample_rate())?;
            filter_epochs(&filter, epochs, cfg.mode)
        }
        None => Ok(epochs.clone()),
    }
}

fn fit_and_predict(
    moments: &TrialMoments,
    labels: &[ClassLabel],
    train: &[usize],
    test: &[usize],
    cfg: &PipelineConfig,
    c: f64,
) -> Result<Vec<ClassLabel>> {
    let right = moments.class_covariance(train, labels, ClassLabel::RightHand)?;
    let left = moments.class_covariance(train, labels, ClassLabel::LeftHand)?;
    let csp = fit_csp_from_covariances(&right, &left, cfg.pairs, cfg.ridge)?;
    let train_features = moments.features(&csp, train, labels)?;
    let svm = train_svm_standardized(&train_features, c, cfg.tol)?;
    let test_features = moments.features(&csp, test, labels)?;
    Ok(predict(&svm, &test_features)?.0)
}

fn accuracy(predictions: &[ClassLabel], truth: impl Iterator<Item = ClassLabel>) -> f64 {
    let (mut hits, mut n) = (0usize, 0usize);
    for (p, t) in predictions.iter().zip(truth) {
        n += 1;
        hits += usize::from(*p == t);
    }
    hits as f64 / n.max(1) as f64
}

fn choose_c(
    moments: &TrialMoments,
    labels: &[ClassLabel],
    train: &[usize],
    cfg: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if let CSelection::Fixed(c) = cfg.c {
        return Ok(c);
    }
    let train_labels: Vec<ClassLabel> = train.iter().map(|&i| labels[i]).collect();
    check_folds(&train_labels, INNER_FOLDS)?;
    let inner = stratified_folds(&train_labels, INNER_FOLDS, rng);
    let mut best = (f64::NEG_INFINITY, C_GRID[0]);
    for c in C_GRID {
        let mut total = 0.0;
        for fold in 0..INNER_FOLDS {
            let (fit_idx, val_idx): (Vec<usize>, Vec<usize>) =
                (0..train.len()).partition(|&k| inner[k] != fold);
            let fit_idx: Vec<usize> = fit_idx.into_iter().map(|k| train[k]).collect();
            let val_idx: Vec<usize> = val_idx.into_iter().map(|k| train[k]).collect();
            let pred = fit_and_predict(moments, labels, &fit_idx, &val_idx, cfg, c)?;
            total += accuracy(&pred, val_idx.iter().map(|&i| labels[i]));
        }
        // strict comparison keeps the smaller c on ties
        if total > best.0 {
            best = (total, c);
        }
    }
    Ok(best.1)
}

fn run_split(
    moments: &TrialMoments,
    labels: &[ClassLabel],
    train: &[usize],
    test: &[usize],
    cfg: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FoldOutcome> {
    let fit_on: Vec<usize> = match cfg.fit_scope {
        FitScope::TrainingFold => train.to_vec(),
        FitScope::AllTrials => (0..labels.len()).collect(),
    };
    let c = choose_c(moments, labels, &fit_on, cfg, rng)?;
    let predictions = fit_and_predict(moments, labels, &fit_on, test, cfg, c)?;
    let accuracy = accuracy(&predictions, test.iter().map(|&i| labels[i]));
    Ok(FoldOutcome {
        predictions,
        accuracy,
        c,
    })
}

/// Fits the pipeline on `train` and predicts `test`. Labels of `test` trials
/// are only read to score the predictions.
pub fn evaluate_split(
    epochs: &EpochSet,
    train: &[usize],
    test: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let prepared = prepare(epochs, cfg)?;
    let moments = TrialMoments::compute(&prepared);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_split(&moments, epochs.labels(), train, test, cfg, &mut rng)
}

/// Repeated stratified k-fold CV. Every (repeat, fold) cell is independent and
/// lands in a fixed slot, so the report does not depend on scheduling.
pub fn cross_validate(
    epochs: &EpochSet,
    cfg: &PipelineConfig,
    repeats: usize,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let labels = epochs.labels();
    check_folds(labels, folds)?;
    let prepared = prepare(epochs, cfg)?;
    let moments = TrialMoments::compute(&prepared);

    let assignments: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            stratified_folds(labels, folds, &mut rng)
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..repeats)
        .flat_map(|r| (0..folds).map(move |f| (r, f)))
        .collect();
    let accuracies: Vec<f64> = cells
        .par_iter()
        .map(|&(r, f)| {
            let (train, test): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignments[r][i] != f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream((r * folds + f) as u64);
            run_split(&moments, labels, &train, &test, cfg, &mut rng).map(|o| o.accuracy)
        })
        .collect::<Result<_>>()?;

    let matrix: Vec<Vec<f64>> = accuracies.chunks(folds).map(<[f64]>::to_vec).collect();
    let mean_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let repeat_means: Vec<f64> = matrix
        .iter()
        .map(|row| row.iter().sum::<f64>() / folds as f64)
        .collect();
    let std_accuracy = if repeats > 1 {
        let m = repeat_means.iter().sum::<f64>() / repeats as f64;
        (repeat_means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(CvReport {
        repeats,
        folds,
        seed,
        per_repeat_fold_accuracy: matrix,
        mean_accuracy,
        std_accuracy,
    })
}
