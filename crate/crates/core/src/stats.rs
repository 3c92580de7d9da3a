//! Small statistics helpers: batch-means estimates and the two-sample
//! Kolmogorov-Smirnov test.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, std_err: 0.0 }
    }

    /// Whether `value` lies within `k` standard errors of the estimate.
    /// `floor` absorbs floating-point noise when the standard error vanishes.
    pub fn agrees_with(&self, value: f64, k: f64, floor: f64) -> bool {
        (self.mean - value).abs() <= (k * self.std_err).max(floor)
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6} ± {:.6}", self.mean, self.std_err)
    }
}

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 20;

/// Batch-means estimate of the mean of a (possibly correlated) sequence.
///
/// The sequence is split into [`BATCHES`] contiguous batches of equal length
/// (a remainder of fewer than `BATCHES` trailing values is dropped from the
/// error estimate but kept in the mean).
pub fn batch_means(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            std_err: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let per = n / BATCHES;
    if per == 0 {
        return Estimate {
            mean,
            std_err: f64::INFINITY,
        };
    }
    let batch: Vec<f64> = values
        .chunks_exact(per)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let bm = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Estimate {
        mean,
        std_err: (var / BATCHES as f64).sqrt(),
    }
}

/// Mean and standard error of independent samples.
pub fn mean_and_std_err(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate { mean, std_err: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        std_err: (var / n).sqrt(),
    }
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Largest distance between the two empirical distribution functions.
    pub statistic: f64,
    /// Asymptotic critical value at the requested significance.
    pub critical: f64,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.statistic > self.critical
    }
}

/// Two-sample KS test. Supported significance levels: 0.10, 0.05, 0.01, 0.001.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    let c_alpha = match alpha {
        x if (x - 0.10).abs() < 1e-12 => 1.224,
        x if (x - 0.05).abs() < 1e-12 => 1.358,
        x if (x - 0.01).abs() < 1e-12 => 1.628,
        x if (x - 0.001).abs() < 1e-12 => 1.949,
        _ => panic!("unsupported KS significance level {alpha}"),
    };
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        critical: c_alpha * ((na + nb) / (na * nb)).sqrt(),
    }
}

/// Formats `v` with 12 significant digits, `%g` style.
pub fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        // Rounding may carry into a new leading digit; that is still 12 digits.
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent present");
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    }
}
