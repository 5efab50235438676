//! Order-stable summation and sample statistics.
//!
//! Every reduction in the Monte Carlo engine goes through [`pairwise_sum`]
//! over a tree whose shape depends only on the input length, so serial and
//! parallel runs produce bit-identical results.

/// Pairwise (cascade) summation. Error grows as O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Running first and second raw moments of a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn from_slice(values: &[f64]) -> Self {
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        Moments {
            n: values.len(),
            sum: pairwise_sum(values),
            sum_sq: pairwise_sum(&sq),
        }
    }

    pub fn merge(self, other: Moments) -> Moments {
        Moments {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum / self.n as f64
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Merge a list of partial moments with a fixed pairwise tree.
pub fn merge_pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => {
            let mid = n / 2;
            merge_pairwise(&parts[..mid]).merge(merge_pairwise(&parts[mid..]))
        }
    }
}

/// Two-sided 95% normal quantile used for confidence intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Half-width of a 95% confidence interval for the mean of `values`.
pub fn ci95_half_width(values: &[f64]) -> f64 {
    Z95 * Moments::from_slice(values).stderr()
}

pub fn mean(values: &[f64]) -> f64 {
    Moments::from_slice(values).mean()
}
