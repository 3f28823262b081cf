//! Tendency curves, smoothed minimums and Student's two-sample t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 100;

/// One-tail 0.05 critical value used once the degrees of freedom exceed 1000.
pub const LARGE_DOF_CRITICAL: f64 = 1.645;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); zero for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

fn check_len(len: usize, window: usize) -> Result<()> {
    if len <= window {
        Err(Error::TooShort { window, len })
    } else {
        Ok(())
    }
}

/// Entry `i` is the mean of `values[i..=i + window]`; output has `len - window` entries.
pub fn tendency(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_len(values.len(), window)?;
    let width = (window + 1) as f64;
    Ok(values
        .windows(window + 1)
        .map(|w| w.iter().sum::<f64>() / width)
        .collect())
}

/// Entry `i` is the minimum of `values[i..=i + window]`.
pub fn smoothed_min(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_len(values.len(), window)?;
    Ok(values
        .windows(window + 1)
        .map(|w| w.iter().copied().fold(f64::INFINITY, f64::min))
        .collect())
}

/// Entry `i` is `min(values[i], values[i + window])`.
pub fn smoothed_min_two_point(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_len(values.len(), window)?;
    Ok((0..values.len() - window)
        .map(|i| values[i].min(values[i + window]))
        .collect())
}

/// Element-wise `a - b` over the common prefix.
pub fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_stat: f64,
    pub dof: usize,
    pub significant_one_tail_05: bool,
}

/// One-tail critical t value at the 0.05 level.
pub fn one_tail_critical(dof: usize) -> f64 {
    if dof > 1000 {
        return LARGE_DOF_CRITICAL;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.95)
}

/// Pooled-variance Student's t for `mean(a) - mean(b)`.
///
/// Significance means `t_stat` exceeds the one-tail critical value, i.e. the
/// test is directional in favour of `a`.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::SampleTooSmall(s.len()));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let dof = a.len() + b.len() - 2;
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / dof as f64;
    let diff = mean(a) - mean(b);
    let t_stat = if diff == 0.0 {
        0.0
    } else {
        diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt()
    };
    Ok(TTestResult {
        t_stat,
        dof,
        significant_one_tail_05: t_stat > one_tail_critical(dof),
    })
}
