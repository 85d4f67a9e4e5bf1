//! Small statistical helpers: normal tails, streaming moments, least squares.

use serde::{Deserialize, Serialize};

/// Upper normal tail `1 - Φ(t)`, computed through `erfc` so it keeps full
/// relative accuracy for large `t`.
pub fn normal_upper_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// `Φ(t)`.
pub fn normal_cdf(t: f64) -> f64 {
    normal_upper_tail(-t)
}

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Weighted running sums for importance-sampling estimators.
///
/// Each sample contributes a value `v` (weight times integrand). Pools merge
/// exactly, so batches may be folded in any grouping and merged in a fixed
/// order for reproducible output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    mean: f64,
    m2: f64,
    sum_abs: f64,
    sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
        self.sum_abs += v.abs();
        self.sum_sq += v * v;
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
        self.sum_abs += other.sum_abs;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// `(Σ|v|)² / Σ v²`, the effective number of samples carrying the estimate.
    pub fn ess(&self) -> f64 {
        if self.sum_sq == 0.0 {
            0.0
        } else {
            (self.sum_abs * self.sum_abs / self.sum_sq).min(self.count as f64)
        }
    }
}

/// Ordinary least squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a line fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LineFit { slope, intercept, r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normal_tail_values() {
        assert_eq!(normal_upper_tail(0.0), 0.5);
        assert!((normal_upper_tail(1.96) - 0.024997895148220435).abs() < 1e-15);
        // far tail keeps relative accuracy: 1 - Φ(10) = 7.619853024160527e-24
        let far = normal_upper_tail(10.0);
        assert!((far / 7.619853024160527e-24 - 1.0).abs() < 1e-13, "{far:e}");
    }

    #[test]
    fn line_fit_exact() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(values in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(values.len());
            let mut whole = Accumulator::default();
            values.iter().for_each(|v| whole.push(*v));
            let (a, b) = values.split_at(split);
            let mut left = Accumulator::default();
            a.iter().for_each(|v| left.push(*v));
            let mut right = Accumulator::default();
            b.iter().for_each(|v| right.push(*v));
            left.merge(&right);
            prop_assert_eq!(left.count, whole.count);
            prop_assert!((left.mean() - whole.mean()).abs() < 1e-9);
            prop_assert!((left.variance() - whole.variance()).abs() < 1e-6 * (1.0 + whole.variance()));
            prop_assert!(left.ess() <= left.count as f64 + 1e-9);
        }
    }
}
