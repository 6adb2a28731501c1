//! Numerically stable log-sum-exp and soft-max helpers.

/// `ln Σ exp(x_i)` with max subtraction. Returns `-inf` for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Annealed log-sum-exp `t · ln Σ exp(x_i / t)`; degenerates to `max` when `t == 0`.
pub fn soft_max_value(xs: &[f64], temperature: f64) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature == 0.0 || !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| ((x - max) / temperature).exp()).sum();
    max + temperature * sum.ln()
}

/// Streaming accumulator for `ln Σ exp(x_i)` that rescales as the running max grows.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExpAcc {
    max: f64,
    sum: f64,
}

impl Default for LogSumExpAcc {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExpAcc {
    #[inline]
    pub fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            if self.max.is_finite() {
                self.sum *= (self.max - x).exp();
            }
            self.sum += 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max.is_finite() {
            self.max + self.sum.ln()
        } else {
            self.max
        }
    }
}

/// Writes the annealed soft-max distribution of `scores` into `out`.
///
/// With `temperature == 0` the result is uniform over the entries within
/// `tie_tol` of the maximum.
pub fn annealed_softmax_into(scores: &[f64], temperature: f64, tie_tol: f64, out: &mut [f64]) {
    debug_assert_eq!(scores.len(), out.len());
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature == 0.0 {
        let mut count = 0usize;
        for (o, &s) in out.iter_mut().zip(scores) {
            *o = if max - s <= tie_tol {
                count += 1;
                1.0
            } else {
                0.0
            };
        }
        let inv = 1.0 / count as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        return;
    }
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = ((s - max) / temperature).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    out.iter_mut().for_each(|o| *o *= inv);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_of_zeros() {
        assert!((logsumexp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_large_values_do_not_overflow() {
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn annealed_value_limits() {
        assert_eq!(soft_max_value(&[1.0, 3.0, -2.0], 0.0), 3.0);
        let t = 2.0;
        let s = [0.5, -1.0];
        let direct = t * ((0.5f64 / t).exp() + (-1.0f64 / t).exp()).ln();
        assert!((soft_max_value(&s, t) - direct).abs() < 1e-14);
    }

    #[test]
    fn streaming_matches_batch() {
        let xs = [3.0, -1.0, 7.5, 7.5, 0.25, -30.0];
        let mut acc = LogSumExpAcc::default();
        xs.iter().for_each(|&x| acc.push(x));
        assert!((acc.value() - logsumexp(&xs)).abs() < 1e-13);
    }

    #[test]
    fn hard_softmax_splits_ties() {
        let mut out = [0.0; 4];
        annealed_softmax_into(&[1.0, 2.0, 2.0, 0.0], 0.0, 1e-12, &mut out);
        assert_eq!(out, [0.0, 0.5, 0.5, 0.0]);
    }
}
