//! Rank statistics: Spearman correlation and the Mann–Whitney U test.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two rank vectors given as doubled ranks, using exact integer sums.
fn rank_correlation(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len() as i128;
    let (sx, sy): (i128, i128) = (
        x.iter().map(|&v| v as i128).sum(),
        y.iter().map(|&v| v as i128).sum(),
    );
    let (mut sxy, mut sxx, mut syy) = (0i128, 0i128, 0i128);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a as i128, b as i128);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some((cov as f64 / ((vx as f64) * (vy as f64)).sqrt()).clamp(-1.0, 1.0))
}

/// Twice the average rank of every value (integers, so ties stay exact).
fn doubled_ranks(values: &[f64]) -> Vec<i64> {
    average_ranks(values)
        .iter()
        .map(|r| (r * 2.0) as i64)
        .collect()
}

/// Two-sided p-value of a Spearman coefficient via the t approximation with `n - 2` degrees of freedom.
pub fn spearman_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Spearman rank correlation and its two-sided p-value.
///
/// Needs at least five pairs. A constant series has no defined correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "spearman needs at least 5 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "spearman input contains non-finite values".into(),
        ));
    }
    let rho = rank_correlation(&doubled_ranks(x), &doubled_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant series".into()))?;
    Ok((rho, spearman_p(rho, x.len())))
}

/// Mann–Whitney U of `a` against `b` and the two-sided p-value.
///
/// `U` counts pairs with `a_i > b_j`, ties counting one half. The p-value
/// uses the normal approximation with tie correction and a continuity
/// correction of one half.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "mann-whitney needs at least 3 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "mann-whitney input contains non-finite values".into(),
        ));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;

    let n = n1 + n2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return Err(Error::Degenerate(
            "all values are equal across both samples".into(),
        ));
    }
    let mean = n1 * n2 / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0);
    Ok((u, p))
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
