//! Linear soft-margin SVM.
//!
//! Minimises `½‖w‖² + c Σ εᵢ` subject to `yᵢ(wᵀxᵢ + b) ≥ 1 − εᵢ`, `εᵢ ≥ 0`
//! by solving the dual with SMO pair updates (maximal-violating-pair first
//! index, second-order choice of the partner, no shrinking).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassLabel;
use crate::spatial::FeatureMatrix;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_PAIR_UPDATES: usize = 1_000_000;

const TAU: f64 = 1e-12;

/// Per-dimension affine map `z = (x - mean) / scale` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mean, scale) = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let sd = var.sqrt();
                (mean, if sd > 1e-12 { sd } else { 1.0 })
            })
            .unzip();
        Standardization { mean, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.scale[c]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Weights of the decision rule on raw (unstandardised) features.
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
    /// Dual variables; with standardisation these belong to the standardised problem,
    /// as do the objective values below.
    pub alphas: Vec<f64>,
    pub slacks: Vec<f64>,
    /// Primal objective `½‖w‖² + c Σ εᵢ`.
    pub objective: f64,
    /// Dual objective `Σ αᵢ − ½‖w‖²`.
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub standardization: Option<Standardization>,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

struct Problem {
    y: Vec<f64>,
    kernel: DMatrix<f64>,
    c: f64,
}

struct Solution {
    alphas: Vec<f64>,
    gradient: Vec<f64>,
    iterations: usize,
}

impl Problem {
    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.kernel[(i, j)]
    }

    fn dual_value(alphas: &[f64], gradient: &[f64]) -> f64 {
        // f(α) = ½ αᵀQα − eᵀα = ½ αᵀ(G − e)
        0.5 * alphas
            .iter()
            .zip(gradient)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>()
    }

    fn in_up(&self, alphas: &[f64], t: usize) -> bool {
        if self.y[t] > 0.0 {
            alphas[t] < self.c
        } else {
            alphas[t] > 0.0
        }
    }

    fn in_low(&self, alphas: &[f64], t: usize) -> bool {
        if self.y[t] > 0.0 {
            alphas[t] > 0.0
        } else {
            alphas[t] < self.c
        }
    }

    /// Returns `(i, j, violation)`; `None` for `i` when no index can move.
    fn select_pair(&self, alphas: &[f64], g: &[f64]) -> (Option<usize>, Option<usize>, f64) {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for (t, &gt) in g.iter().enumerate() {
            if self.in_up(alphas, t) && -self.y[t] * gt >= g_max {
                g_max = -self.y[t] * gt;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            return (None, None, 0.0);
        };
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for (t, &gt) in g.iter().enumerate() {
            if !self.in_low(alphas, t) {
                continue;
            }
            let yg = self.y[t] * gt;
            g_max2 = g_max2.max(yg);
            let grad_diff = g_max + yg;
            if grad_diff > 0.0 {
                let mut quad = self.kernel[(i, i)] + self.kernel[(t, t)] - 2.0 * self.kernel[(i, t)];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -grad_diff * grad_diff / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        (Some(i), j_sel, g_max + g_max2)
    }

    fn solve(&self, tol: f64, mut trace: Option<&mut Vec<f64>>) -> Result<Solution> {
        let n = self.y.len();
        let c = self.c;
        let mut a = vec![0.0; n];
        let mut g = vec![-1.0; n];
        if let Some(t) = trace.as_deref_mut() {
            t.push(0.0);
        }
        let mut iterations = 0;
        loop {
            let (i, j, violation) = self.select_pair(&a, &g);
            let (Some(i), Some(j)) = (i, j) else { break };
            if violation < tol {
                break;
            }
            if iterations >= MAX_PAIR_UPDATES {
                return Err(Error::NonConvergence {
                    iterations,
                    gap: violation,
                });
            }
            iterations += 1;

            let (old_i, old_j) = (a[i], a[j]);
            if self.y[i] != self.y[j] {
                let mut quad = self.q(i, i) + self.q(j, j) + 2.0 * self.q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-g[i] - g[j]) / quad;
                let diff = a[i] - a[j];
                a[i] += delta;
                a[j] += delta;
                if diff > 0.0 {
                    if a[j] < 0.0 {
                        a[j] = 0.0;
                        a[i] = diff;
                    }
                } else if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = -diff;
                }
                if diff > 0.0 {
                    if a[i] > c {
                        a[i] = c;
                        a[j] = c - diff;
                    }
                } else if a[j] > c {
                    a[j] = c;
                    a[i] = c + diff;
                }
            } else {
                let mut quad = self.q(i, i) + self.q(j, j) - 2.0 * self.q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (g[i] - g[j]) / quad;
                let sum = a[i] + a[j];
                a[i] -= delta;
                a[j] += delta;
                if sum > c {
                    if a[i] > c {
                        a[i] = c;
                        a[j] = sum - c;
                    }
                } else if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if sum > c {
                    if a[j] > c {
                        a[j] = c;
                        a[i] = sum - c;
                    }
                } else if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }

            let (di, dj) = (a[i] - old_i, a[j] - old_j);
            for (t, gt) in g.iter_mut().enumerate() {
                *gt += self.q(t, i) * di + self.q(t, j) * dj;
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(Self::dual_value(&a, &g));
            }
        }
        Ok(Solution {
            alphas: a,
            gradient: g,
            iterations,
        })
    }

    /// Mean of `−yᵢGᵢ` over free vectors, or the midpoint of the feasible
    /// interval when every αᵢ sits at a bound.
    fn bias(&self, s: &Solution) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in 0..self.y.len() {
            let yg = self.y[t] * s.gradient[t];
            let at_upper = s.alphas[t] >= self.c;
            let at_lower = s.alphas[t] <= 0.0;
            if at_upper {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else if at_lower {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg)
                } else {
                    lb = lb.max(yg)
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 {
            sum / free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }
}

fn validate(features: &FeatureMatrix, c: f64, tol: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Parameter(format!("c must be positive, got {c}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    for label in ClassLabel::BOTH {
        if !features.labels.contains(&label) {
            return Err(Error::InsufficientData(format!("no {label} samples to train on")));
        }
    }
    if features.rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("features must be finite".into()));
    }
    Ok(())
}

fn fit(
    x: &DMatrix<f64>,
    labels: &[ClassLabel],
    c: f64,
    tol: f64,
    trace: Option<&mut Vec<f64>>,
) -> Result<SvmModel> {
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let problem = Problem {
        kernel: x * x.transpose(),
        y,
        c,
    };
    let sol = problem.solve(tol, trace)?;
    let b = problem.bias(&sol);
    let dim = x.ncols();
    let mut w = vec![0.0; dim];
    for (t, a) in sol.alphas.iter().enumerate() {
        if *a != 0.0 {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += a * problem.y[t] * x[(t, k)];
            }
        }
    }
    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
    let slacks: Vec<f64> = (0..x.nrows())
        .map(|t| {
            let d: f64 = x.row(t).iter().zip(&w).map(|(v, wk)| v * wk).sum::<f64>() + b;
            (1.0 - problem.y[t] * d).max(0.0)
        })
        .collect();
    let objective = 0.5 * norm_sq + c * slacks.iter().sum::<f64>();
    let dual_objective = sol.alphas.iter().sum::<f64>() - 0.5 * norm_sq;
    Ok(SvmModel {
        w,
        b,
        c,
        alphas: sol.alphas,
        slacks,
        objective,
        dual_objective,
        duality_gap: objective - dual_objective,
        iterations: sol.iterations,
        standardization: None,
    })
}

/// Solves the soft-margin QP on the features as given.
pub fn train_svm(features: &FeatureMatrix, c: f64, tol: f64) -> Result<SvmModel> {
    validate(features, c, tol)?;
    fit(&features.rows, &features.labels, c, tol, None)
}

/// As [`train_svm`], also returning the dual objective (minimisation form)
/// at the start and after every pair update.
pub fn train_svm_traced(features: &FeatureMatrix, c: f64, tol: f64) -> Result<(SvmModel, Vec<f64>)> {
    validate(features, c, tol)?;
    let mut trace = Vec::new();
    let model = fit(&features.rows, &features.labels, c, tol, Some(&mut trace))?;
    Ok((model, trace))
}

/// Standardises each feature on the training data, trains, then folds the
/// standardisation into `w` and `b` so the model applies to raw features.
pub fn train_svm_standardized(features: &FeatureMatrix, c: f64, tol: f64) -> Result<SvmModel> {
    validate(features, c, tol)?;
    let std = Standardization::fit(&features.rows);
    let z = std.apply(&features.rows);
    let mut model = fit(&z, &features.labels, c, tol, None)?;
    let mut offset = 0.0;
    for (k, wk) in model.w.iter_mut().enumerate() {
        *wk /= std.scale[k];
        offset += *wk * std.mean[k];
    }
    model.b -= offset;
    model.standardization = Some(std);
    Ok(model)
}

/// Decision values `wᵀx + b` and their labels; a value of exactly zero is
/// labelled `RightHand`.
pub fn predict(model: &SvmModel, features: &FeatureMatrix) -> Result<(Vec<ClassLabel>, Vec<f64>)> {
    if features.dim() != model.w.len() {
        return Err(Error::Dimension {
            expected: model.w.len(),
            found: features.dim(),
        });
    }
    let decisions: Vec<f64> = (0..features.len())
        .map(|r| {
            let row: Vec<f64> = features.rows.row(r).iter().copied().collect();
            model.decision(&row)
        })
        .collect();
    let labels = decisions.iter().map(|&d| ClassLabel::from_decision(d)).collect();
    Ok((labels, decisions))
}
