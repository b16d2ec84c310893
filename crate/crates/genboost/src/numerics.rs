//! Shared numerical primitives: stable log-space reductions, compensated
//! summation, and Gaussian/Bernoulli log-density building blocks.

pub const LN_2PI: f64 = 1.8378770664093453;

/// Neumaier-compensated accumulator. Exhaustive state enumerations sum
/// millions of terms; plain accumulation drifts past the 1e-12 agreement
/// the exact oracles promise.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator.
pub fn sum_compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// log(sum(exp(v))) with the max factored out and compensated accumulation.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add((v - max).exp());
    }
    max + acc.value().ln()
}

/// log(mean(exp(v))): the log-mean-exp reduction used by importance
/// estimators.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

/// Delta-method standard error of log-mean-exp over the given log terms.
/// Zero when only one term is available.
pub fn log_mean_exp_std_err(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let scaled: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let var = scaled.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt() / mean
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + exp(x)) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-density of a diagonal Gaussian.
pub fn diag_gaussian_log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), mean.len());
    debug_assert_eq!(x.len(), var.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - mean[i];
        acc += -0.5 * (LN_2PI + var[i].ln() + d * d / var[i]);
    }
    acc
}

/// Log-density of the standard normal in `d` dimensions.
pub fn std_normal_log_density(x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * (x.len() as f64 * LN_2PI + sq)
}

/// Weighted mean and a standard error that only reflects the Monte Carlo
/// noise of per-item estimates (`se_i`), not the spread across items.
pub fn weighted_mean_and_se(values: &[f64], std_errs: &[f64], weights: &[f64]) -> (f64, f64) {
    debug_assert_eq!(values.len(), weights.len());
    let total: f64 = weights.iter().sum();
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..values.len() {
        let w = weights[i] / total;
        mean += w * values[i];
        var += w * w * std_errs[i] * std_errs[i];
    }
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        // 1 + 1e-16 repeated: naive summation loses the small terms.
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1000.0 * 1e-16)).abs() < 1e-18);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [-1.0f64, -2.0, -3.0];
        let direct = (v.iter().map(|x| x.exp()).sum::<f64>()).ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
    }

    #[test]
    fn softplus_and_sigmoid_extremes() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn std_normal_at_origin() {
        assert!((std_normal_log_density(&[0.0, 0.0]) + LN_2PI).abs() < 1e-12);
    }
}
