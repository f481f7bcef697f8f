//! Deterministic reductions and resampling helpers.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum. Adding the same values in the same
/// order always gives the same bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = NeumaierSum::default();
    for x in xs {
        s.add(x);
    }
    s.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Delete-one jackknife for a statistic of the sample mean.
///
/// Returns `(stat(mean), standard error)`. `stat` is applied to the full
/// mean and to each leave-one-out mean.
pub fn jackknife_of_mean(xs: &[f64], stat: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Estimation("jackknife needs at least two replicas".into()));
    }
    let total = compensated_sum(xs.iter().copied());
    let nf = n as f64;
    let full = stat(total / nf);
    let loo: Vec<f64> = xs.iter().map(|&x| stat((total - x) / (nf - 1.0))).collect();
    let loo_mean = mean(&loo);
    let ss = compensated_sum(loo.iter().map(|&v| (v - loo_mean) * (v - loo_mean)));
    Ok((full, ((nf - 1.0) / nf * ss).sqrt()))
}

/// Ordinary least-squares fit `y ≈ a + b x`, returning `(a, b)`.
pub fn least_squares_line(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Estimation("line fit needs two or more paired points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = compensated_sum(x.iter().map(|&v| (v - mx) * (v - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    if sxx == 0.0 {
        return Err(Error::Estimation("line fit with a single abscissa".into()));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn compensation_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn jackknife_of_identity_is_standard_error() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let (m, se) = jackknife_of_mean(&xs, |v| v).unwrap();
        let n = xs.len() as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        assert!((se - (var / n).sqrt()).abs() < 1e-12);
        assert!(jackknife_of_mean(&[1.0], |v| v).is_err());
    }

    #[test]
    fn line_fit_exact() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = least_squares_line(&x, &y).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
        assert!(least_squares_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
