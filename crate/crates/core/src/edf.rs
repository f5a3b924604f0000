//! Empirical distribution functions of a single gene's sample.

use crate::error::{Error, Result};

/// Right-continuous empirical CDF `F̂(t) = #{x_i ≤ t} / n` over a sorted copy
/// of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Edf {
    sorted: Vec<f64>,
}

/// Difference-quotient estimate of the density at the sample median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub f_hat: f64,
    pub bandwidth: f64,
}

impl Edf {
    pub fn new(values: &[f64]) -> Result<Self> {
        Self::from_vec(values.to_vec())
    }

    pub fn from_vec(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("an EDF needs at least one observation"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite observation {bad}")));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Edf { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of observations `≤ t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.sorted.partition_point(|&v| v <= t)
    }

    /// Number of observations `< t`.
    pub fn count_lt(&self, t: f64) -> usize {
        self.sorted.partition_point(|&v| v < t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.count_le(t) as f64 / self.len() as f64
    }

    /// Left limit `F̂(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        self.count_lt(t) as f64 / self.len() as f64
    }

    /// Generalized inverse `inf{x : F̂(x) ≥ q}`; no interpolation.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0, 1], got {q}"
            )));
        }
        Ok(self.sorted[self.quantile_rank(q) - 1])
    }

    /// Smallest `k ≥ 1` with `k / n ≥ q`.
    fn quantile_rank(&self, q: f64) -> usize {
        let n = self.len();
        let nf = n as f64;
        let mut k = ((q * nf).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / nf >= q {
            k -= 1;
        }
        while k < n && (k as f64) / nf < q {
            k += 1;
        }
        k
    }

    pub fn median(&self) -> f64 {
        self.sorted[self.quantile_rank(0.5) - 1]
    }

    /// `quantile(0.75) - quantile(0.25)` under the same infimum rule.
    pub fn iqr(&self) -> f64 {
        self.sorted[self.quantile_rank(0.75) - 1] - self.sorted[self.quantile_rank(0.25) - 1]
    }

    /// `f̂ = (F̂(ξ̂ + h) - F̂(ξ̂ - h)) / 2h` with the bandwidth `h = 2·IQR·n^(-1/5)`.
    pub fn density_at_median(&self) -> Result<DensityEstimate> {
        if self.len() < 2 {
            return Err(Error::domain(
                "density estimation needs at least two observations",
            ));
        }
        let iqr = self.iqr();
        if iqr <= 0.0 {
            return Err(Error::DegenerateDensity);
        }
        let bandwidth = 2.0 * iqr * (self.len() as f64).powf(-0.2);
        let xi = self.median();
        let mass = self.eval(xi + bandwidth) - self.eval(xi - bandwidth);
        Ok(DensityEstimate {
            f_hat: mass / (2.0 * bandwidth),
            bandwidth,
        })
    }

    /// `sup_t |F̂(t) - F(t)|` for a nondecreasing reference CDF. Between jumps
    /// both functions are monotone, so the supremum is attained at a jump
    /// `x`, either at `x` itself or in the left limit, where `F(x-)` is taken
    /// as `F` at the next float below `x`.
    pub fn sup_deviation<F>(&self, reference_cdf: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let nf = self.len() as f64;
        let mut sup = 0.0f64;
        let mut below = 0usize;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            let left = (below as f64 / nf - reference_cdf(next_below(x))).abs();
            let right = (j as f64 / nf - reference_cdf(x)).abs();
            sup = sup.max(left).max(right);
            below = j;
            i = j;
        }
        sup
    }
}

/// Largest float strictly below a finite `x`.
fn next_below(x: f64) -> f64 {
    if x == 0.0 {
        -f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}
