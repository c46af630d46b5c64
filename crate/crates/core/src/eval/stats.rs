use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-12;
const CF_MAX_ITER: usize = 500;
const FPMIN: f64 = 1e-300;

/// Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Continued fraction for the incomplete beta function, modified Lentz.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)` for `a, b > 0`, `0 <= x <= 1`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fast for x < (a+1)/(a+b+2)
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t_statistic: f64,
    pub df: usize,
    pub p_two_tailed: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Paired-samples t-test on `x - y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<PairedTestResult> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Validation("paired samples must be finite".into()));
    }
    let n = diffs.len();
    let (mean_diff, sd_diff) = mean_sd(&diffs);
    let df = n - 1;
    if sd_diff == 0.0 {
        if mean_diff == 0.0 {
            return Ok(PairedTestResult {
                n,
                mean_diff,
                sd_diff,
                t_statistic: 0.0,
                df,
                p_two_tailed: 1.0,
            });
        }
        return Err(Error::DegenerateVariance { mean_diff });
    }
    let t = mean_diff / (sd_diff / (n as f64).sqrt());
    Ok(PairedTestResult {
        n,
        mean_diff,
        sd_diff,
        t_statistic: t,
        df,
        p_two_tailed: student_t_two_tailed_p(t, df as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleTestResult {
    pub t_statistic: f64,
    pub df: usize,
    pub p_two_tailed: f64,
}

/// Student's two-sample t-test with pooled variance.
pub fn two_sample_t_test(a: &[f64], b: &[f64]) -> Result<TwoSampleTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(
            "two-sample t-test needs at least 2 values per group".into(),
        ));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = a.len() + b.len() - 2;
    let pooled = (((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / df as f64).sqrt();
    if pooled == 0.0 {
        if ma == mb {
            return Ok(TwoSampleTestResult {
                t_statistic: 0.0,
                df,
                p_two_tailed: 1.0,
            });
        }
        return Err(Error::DegenerateVariance { mean_diff: ma - mb });
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb).sqrt());
    Ok(TwoSampleTestResult {
        t_statistic: t,
        df,
        p_two_tailed: student_t_two_tailed_p(t, df as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub responses: Vec<u8>,
    pub mean: f64,
    pub sd: f64,
}

impl std::fmt::Display for LikertSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}±{:.1}", self.mean, self.sd)
    }
}

/// Mean and sample standard deviation of 1-5 ratings.
pub fn likert_summary(responses: &[i64]) -> Result<LikertSummary> {
    if responses.is_empty() {
        return Err(Error::Validation("no Likert responses".into()));
    }
    if let Some(bad) = responses.iter().find(|r| !(1..=5).contains(*r)) {
        return Err(Error::Validation(format!("Likert response {bad} is outside 1-5")));
    }
    let values: Vec<f64> = responses.iter().map(|&r| r as f64).collect();
    let (mean, sd) = if values.len() == 1 {
        (values[0], 0.0)
    } else {
        mean_sd(&values)
    };
    Ok(LikertSummary {
        responses: responses.iter().map(|&r| r as u8).collect(),
        mean,
        sd,
    })
}
