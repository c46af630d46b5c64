//! Common spatial patterns.
//!
//! Class covariances are averages of trace-normalised trial covariances. The
//! composite covariance is whitened and the whitened right-hand covariance is
//! rotated onto its eigenbasis, which diagonalises both class covariances at
//! once. Rows of `full_w` are spatial filters, ordered so that the first
//! maximises right-hand variance relative to left-hand; columns of its inverse
//! are the spatial patterns.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, EpochSet, Montage};

pub const DEFAULT_PAIRS: usize = 3;
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// `X Xᵀ / trace(X Xᵀ)` for one channels x samples trial.
pub fn trial_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x * x.transpose();
    let tr = c.trace();
    if tr > 0.0 {
        c /= tr;
    }
    symmetrize(&mut c);
    c
}

/// Mean trace-normalised covariance of the trials with `label`.
pub fn class_covariance(epochs: &EpochSet, label: ClassLabel) -> Result<DMatrix<f64>> {
    let covs: Vec<DMatrix<f64>> = epochs
        .trials()
        .iter()
        .zip(epochs.labels())
        .filter(|(_, l)| **l == label)
        .map(|(x, _)| trial_covariance(x))
        .collect();
    mean_covariance(&covs, label)
}

pub(crate) fn mean_covariance(covs: &[DMatrix<f64>], label: ClassLabel) -> Result<DMatrix<f64>> {
    if covs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "class covariance for {label} needs at least 2 trials, found {}",
            covs.len()
        )));
    }
    let mut sum = DMatrix::zeros(covs[0].nrows(), covs[0].ncols());
    for c in covs {
        sum += c;
    }
    sum /= covs.len() as f64;
    symmetrize(&mut sum);
    Ok(sum)
}

fn symmetrize(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

/// Eigen-decomposition with eigenvalues sorted descending; equal values keep
/// the solver's original index order.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CspModel {
    /// Selected rows of `full_w`, `2 * pairs` x channels.
    pub filters: DMatrix<f64>,
    /// channels x channels; whitens the (ridged) composite covariance.
    pub full_w: DMatrix<f64>,
    /// Inverse of `full_w`; column `j` is the pattern of filter `j`.
    pub patterns: DMatrix<f64>,
    /// Right-hand share of variance per component, descending.
    pub eigvals: Vec<f64>,
    pub selected_indices: Vec<usize>,
    /// Absolute ridge added to the composite covariance diagonal.
    pub ridge_added: f64,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.full_w.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.filters.nrows()
    }

    pub fn pattern(&self, component: usize) -> Vec<f64> {
        self.patterns.column(component).iter().copied().collect()
    }

    /// Channel with the largest absolute pattern weight.
    pub fn pattern_peak(&self, component: usize) -> usize {
        self.patterns
            .column(component)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i)
    }

    pub fn to_file(&self, channels: &[String]) -> CspModelFile {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|r| m.row(r).iter().copied().collect())
                .collect()
        };
        CspModelFile {
            channels: channels.to_vec(),
            eigvals: self.eigvals.clone(),
            selected_indices: self.selected_indices.clone(),
            ridge_added: self.ridge_added,
            full_w: rows(&self.full_w),
            filters: rows(&self.filters),
            patterns: (0..self.patterns.ncols()).map(|c| self.pattern(c)).collect(),
        }
    }

    pub fn from_file(file: &CspModelFile) -> Result<Self> {
        let n = file.channels.len();
        let matrix = |rows: &[Vec<f64>], what: &str| -> Result<DMatrix<f64>> {
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Validation(format!("{what} rows must have {n} entries")));
            }
            Ok(DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]))
        };
        let full_w = matrix(&file.full_w, "full_w")?;
        let filters = matrix(&file.filters, "filters")?;
        let patterns_t = matrix(&file.patterns, "patterns")?;
        if full_w.nrows() != n || patterns_t.nrows() != n || file.eigvals.len() != n {
            return Err(Error::Validation(
                "csp model matrices must be square over the channels".into(),
            ));
        }
        if file.selected_indices.len() != filters.nrows() || file.selected_indices.iter().any(|&i| i >= n) {
            return Err(Error::Validation("selected_indices do not match filters".into()));
        }
        Ok(CspModel {
            filters,
            full_w,
            patterns: patterns_t.transpose(),
            eigvals: file.eigvals.clone(),
            selected_indices: file.selected_indices.clone(),
            ridge_added: file.ridge_added,
        })
    }

    /// `channel,x,y` followed by one column per selected pattern.
    pub fn write_patterns_csv<W: Write>(
        &self,
        w: &mut W,
        montage: &Montage,
        config_hash: Option<&str>,
    ) -> std::io::Result<()> {
        if let Some(h) = config_hash {
            writeln!(w, "# config={h}")?;
        }
        write!(w, "channel,x,y")?;
        for &j in &self.selected_indices {
            write!(w, ",pattern_{j}")?;
        }
        writeln!(w)?;
        for (ch, (name, [x, y])) in montage.channels().iter().zip(montage.coordinates()).enumerate() {
            write!(w, "{name},{x},{y}")?;
            for &j in &self.selected_indices {
                write!(w, ",{:e}", self.patterns[(ch, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// JSON form of a [`CspModel`]; `patterns[j]` is column `j` of the inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspModelFile {
    pub channels: Vec<String>,
    pub eigvals: Vec<f64>,
    pub selected_indices: Vec<usize>,
    pub ridge_added: f64,
    pub full_w: Vec<Vec<f64>>,
    pub filters: Vec<Vec<f64>>,
    pub patterns: Vec<Vec<f64>>,
}

pub fn fit_csp(epochs: &EpochSet, pairs: usize, ridge: f64) -> Result<CspModel> {
    epochs.require_both_classes()?;
    let right = class_covariance(epochs, ClassLabel::RightHand)?;
    let left = class_covariance(epochs, ClassLabel::LeftHand)?;
    fit_csp_from_covariances(&right, &left, pairs, ridge)
}

/// CSP from precomputed class covariances. `ridge` is relative: the diagonal
/// gains `ridge * trace(C) / channels` where `C` is the composite covariance.
pub fn fit_csp_from_covariances(
    right: &DMatrix<f64>,
    left: &DMatrix<f64>,
    pairs: usize,
    ridge: f64,
) -> Result<CspModel> {
    let n = right.nrows();
    if right.shape() != (n, n) || left.shape() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            found: left.nrows(),
        });
    }
    if pairs == 0 || 2 * pairs > n {
        return Err(Error::Parameter(format!(
            "pairs must lie in 1..={} for {n} channels, got {pairs}",
            n / 2
        )));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::Parameter(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }

    let mut composite = right + left;
    let ridge_added = ridge * composite.trace() / n as f64;
    for i in 0..n {
        composite[(i, i)] += ridge_added;
    }
    let (lambda, u) = sorted_eigen(composite);
    let largest = lambda[0];
    let smallest = lambda[n - 1];
    if !(smallest > largest.abs() * 1e-14 && smallest > 0.0) {
        return Err(Error::Conditioning {
            smallest_eigenvalue: smallest,
        });
    }
    // P = Λ^{-1/2} Uᵀ
    let mut whitening = u.transpose();
    for (r, l) in lambda.iter().enumerate() {
        whitening.row_mut(r).scale_mut(1.0 / l.sqrt());
    }
    let mut whitened_right = &whitening * right * whitening.transpose();
    symmetrize(&mut whitened_right);
    let (eigvals, rotation) = sorted_eigen(whitened_right);

    let mut full_w = rotation.transpose() * whitening;
    for r in 0..n {
        let mut row = full_w.row_mut(r);
        let peak = row
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if peak < 0.0 {
            row.neg_mut();
        }
    }
    let patterns = full_w.clone().try_inverse().ok_or(Error::Conditioning {
        smallest_eigenvalue: smallest,
    })?;

    let selected_indices: Vec<usize> = (0..pairs).chain(n - pairs..n).collect();
    let filters = DMatrix::from_fn(selected_indices.len(), n, |r, c| full_w[(selected_indices[r], c)]);
    Ok(CspModel {
        filters,
        full_w,
        patterns,
        eigvals,
        selected_indices,
        ridge_added,
    })
}

/// Trials x features matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: DMatrix<f64>,
    pub labels: Vec<ClassLabel>,
}

impl FeatureMatrix {
    pub fn new(rows: DMatrix<f64>, labels: Vec<ClassLabel>) -> Result<Self> {
        if rows.nrows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} feature rows but {} labels",
                rows.nrows(),
                labels.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "feature matrix contains non-finite values".into(),
            ));
        }
        Ok(FeatureMatrix { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: DMatrix::from_fn(indices.len(), self.dim(), |r, c| self.rows[(indices[r], c)]),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// `label,f0,f1,...` with labels `L`/`R`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "label")?;
        for j in 0..self.dim() {
            write!(w, ",f{j}")?;
        }
        writeln!(w)?;
        for (r, label) in self.labels.iter().enumerate() {
            write!(w, "{label}")?;
            for v in self.rows.row(r).iter() {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "empty feature file"))?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines {
            let loc = || format!("line {}", i + 1);
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::parse(loc(), format!("expected {} fields", dim + 1)));
            }
            labels.push(
                fields[0]
                    .parse::<ClassLabel>()
                    .map_err(|e| Error::parse(loc(), e.to_string()))?,
            );
            for f in &fields[1..] {
                values.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(loc(), format!("bad value {f:?}")))?,
                );
            }
        }
        FeatureMatrix::new(DMatrix::from_row_slice(labels.len(), dim, &values), labels)
    }
}

fn log_variance_row(variances: &[f64], trial: usize) -> Result<Vec<f64>> {
    let total: f64 = variances.iter().sum();
    if variances.iter().any(|v| v.is_nan() || *v <= 0.0) || !total.is_finite() {
        return Err(Error::DegenerateEpoch { trial });
    }
    Ok(variances.iter().map(|v| (v / total).ln()).collect())
}

/// Normalised log-variance of each filter's output:
/// `log(var(z_j) / sum_k var(z_k))`.
pub fn csp_features(model: &CspModel, epochs: &EpochSet) -> Result<FeatureMatrix> {
    if epochs.n_channels() != model.n_channels() {
        return Err(Error::Dimension {
            expected: model.n_channels(),
            found: epochs.n_channels(),
        });
    }
    let m = model.n_features();
    let mut rows = DMatrix::zeros(epochs.len(), m);
    for (t, x) in epochs.trials().iter().enumerate() {
        let z = &model.filters * x;
        let variances: Vec<f64> = (0..m).map(|j| sample_variance(z.row(j).iter())).collect();
        let feats = log_variance_row(&variances, t)?;
        rows.row_mut(t).copy_from_slice(&feats);
    }
    FeatureMatrix::new(rows, epochs.labels().to_vec())
}

fn sample_variance<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Per-trial second-moment summaries, computed once and reused across folds.
///
/// `normalized` feeds class covariances; `centered` (the mean-removed sample
/// covariance) gives filter output variances as `w C wᵀ`.
#[derive(Debug, Clone)]
pub struct TrialMoments {
    pub normalized: Vec<DMatrix<f64>>,
    pub centered: Vec<DMatrix<f64>>,
}

impl TrialMoments {
    pub fn compute(epochs: &EpochSet) -> Self {
        use rayon::prelude::*;
        let (normalized, centered) = epochs
            .trials()
            .par_iter()
            .map(|x| {
                let n = x.ncols();
                let mut centered_x = x.clone();
                for mut row in centered_x.row_iter_mut() {
                    let mean = row.sum() / n as f64;
                    row.add_scalar_mut(-mean);
                }
                let mut cov = &centered_x * centered_x.transpose() / (n.max(2) - 1) as f64;
                symmetrize(&mut cov);
                (trial_covariance(x), cov)
            })
            .unzip();
        TrialMoments { normalized, centered }
    }

    pub fn class_covariance(
        &self,
        indices: &[usize],
        labels: &[ClassLabel],
        label: ClassLabel,
    ) -> Result<DMatrix<f64>> {
        let covs: Vec<DMatrix<f64>> = indices
            .iter()
            .filter(|&&i| labels[i] == label)
            .map(|&i| self.normalized[i].clone())
            .collect();
        mean_covariance(&covs, label)
    }

    /// Same values as [`csp_features`] on the corresponding trials.
    pub fn features(
        &self,
        model: &CspModel,
        indices: &[usize],
        labels: &[ClassLabel],
    ) -> Result<FeatureMatrix> {
        let m = model.n_features();
        let mut rows = DMatrix::zeros(indices.len(), m);
        for (r, &t) in indices.iter().enumerate() {
            let projected = &model.filters * &self.centered[t];
            let variances: Vec<f64> = (0..m)
                .map(|j| projected.row(j).dot(&model.filters.row(j)))
                .collect();
            rows.row_mut(r).copy_from_slice(&log_variance_row(&variances, t)?);
        }
        FeatureMatrix::new(rows, indices.iter().map(|&i| labels[i]).collect())
    }
}
