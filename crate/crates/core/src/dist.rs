//! Limiting null distributions for the marginal test statistics.
//!
//! * the standard normal law, used by the mean, median, signed-rank, sign and
//!   Wilcoxon statistics;
//! * the Kolmogorov law of `sup |B(t)|` for a standard Brownian bridge `B`,
//!   used by the two-sample Kolmogorov-Smirnov statistic;
//! * the law of `π⁻² Σ l⁻² Z_l²`, the Cramér-von Mises limit.
//!
//! Each CDF has a matching survival function. P-values are computed from the
//! survival functions, which keep full relative precision in the far tail
//! where a `1 - cdf` subtraction would not.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Absolute accuracy target for a CDF evaluation. The plain CDFs sum their
/// series to rounding level; the `_with` variants stop early once the
/// remaining terms fall below the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfAccuracy {
    abs_tol: f64,
}

impl CdfAccuracy {
    pub const NORMAL: CdfAccuracy = CdfAccuracy { abs_tol: 1e-6 };
    pub const KOLMOGOROV: CdfAccuracy = CdfAccuracy { abs_tol: 1e-4 };
    pub const CRAMER_VON_MISES: CdfAccuracy = CdfAccuracy { abs_tol: 2e-3 };

    pub fn new(abs_tol: f64) -> Result<Self> {
        if abs_tol.is_finite() && abs_tol > 0.0 {
            Ok(CdfAccuracy { abs_tol })
        } else {
            Err(Error::domain(format!(
                "CDF accuracy must be a positive finite number, got {abs_tol}"
            )))
        }
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }
}

/// Standard normal distribution function Φ.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Two-sided normal p-value `2Φ(-|z|)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() * FRAC_1_SQRT_2).min(1.0)
}

/// Below this point the Kolmogorov CDF is smaller than 1e-100 and the
/// alternating series is badly conditioned.
const KOLMOGOROV_ZERO_BELOW: f64 = 0.04;

/// Kolmogorov distribution `K(t) = 1 - 2 Σ_{l≥1} (-1)^{l-1} exp(-2 l² t²)`.
pub fn kolmogorov_cdf(t: f64) -> Result<f64> {
    check_nonnegative(t, "kolmogorov_cdf")?;
    Ok(1.0 - kolmogorov_sf(t)?)
}

pub fn kolmogorov_cdf_with(t: f64, accuracy: CdfAccuracy) -> Result<f64> {
    check_nonnegative(t, "kolmogorov_cdf")?;
    if t < KOLMOGOROV_ZERO_BELOW {
        return Ok(0.0);
    }
    let tail = kolmogorov_series(t, accuracy.abs_tol / 10.0);
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Upper tail `1 - K(t)`, accurate to full relative precision for large `t`.
pub fn kolmogorov_sf(t: f64) -> Result<f64> {
    check_nonnegative(t, "kolmogorov_sf")?;
    if t < KOLMOGOROV_ZERO_BELOW {
        return Ok(1.0);
    }
    Ok(kolmogorov_series(t, 0.0).clamp(0.0, 1.0))
}

/// `2 Σ (-1)^{l-1} exp(-2 l² t²)`, stopped once the next term drops below
/// `term_tol` (or below the rounding level of the partial sum).
fn kolmogorov_series(t: f64, term_tol: f64) -> f64 {
    let t2 = t * t;
    let mut sum = 0.0f64;
    for l in 1..=100_000u32 {
        let lf = f64::from(l);
        let term = 2.0 * (-2.0 * lf * lf * t2).exp();
        if term < term_tol || term <= f64::EPSILON * 0.25 * sum.abs() || term == 0.0 {
            break;
        }
        if l % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// Below this point the Cramér-von Mises limit CDF is below 1e-12.
const CVM_ZERO_BELOW: f64 = 0.004;

/// CDF of `π⁻² Σ_{l≥1} l⁻² Z_l²` for i.i.d. standard normal `Z_l`.
pub fn cvm_limit_cdf(t: f64) -> Result<f64> {
    check_nonnegative(t, "cvm_limit_cdf")?;
    Ok(1.0 - cvm_limit_sf(t)?)
}

pub fn cvm_limit_cdf_with(t: f64, accuracy: CdfAccuracy) -> Result<f64> {
    check_nonnegative(t, "cvm_limit_cdf")?;
    if t < CVM_ZERO_BELOW {
        return Ok(0.0);
    }
    let tail = smirnov_series(t, accuracy.abs_tol / 10.0);
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Upper tail of the Cramér-von Mises limit law.
pub fn cvm_limit_sf(t: f64) -> Result<f64> {
    check_nonnegative(t, "cvm_limit_sf")?;
    if t < CVM_ZERO_BELOW {
        return Ok(1.0);
    }
    Ok(smirnov_series(t, 0.0).clamp(0.0, 1.0))
}

/// Smirnov's representation of the tail of the ω² limit law:
///
/// ```text
/// P(W > t) = (1/π) Σ_{k≥1} (-1)^{k+1} ∫_{(2k-1)π}^{2kπ} (2/s) sqrt(-s / sin s) exp(-s² t / 2) ds
/// ```
///
/// Each integral has inverse-square-root singularities at both ends. The
/// substitution `s = a + π(1 - cos φ)/2` cancels them, leaving a smooth
/// integrand on `[0, π]` that Gauss-Legendre handles to rounding level.
fn smirnov_series(t: f64, term_tol: f64) -> f64 {
    let rule = gauss_legendre();
    let mut sum = 0.0;
    for k in 1..=10_000u32 {
        let a = f64::from(2 * k - 1) * PI;
        let b = a + PI;
        let mut integral = 0.0;
        for &(node, weight) in rule {
            // map [-1, 1] onto [0, π]
            let phi = 0.5 * PI * (node + 1.0);
            let half = 0.5 * phi;
            // sin(s) computed from the distance to the nearest endpoint, where
            // sin(a + δ) = -sin δ and sin(b - ε) = -sin ε.
            let (s, sin_abs) = if phi <= 0.5 * PI {
                let delta = PI * half.sin().powi(2);
                (a + delta, delta.sin())
            } else {
                let eps = PI * half.cos().powi(2);
                (b - eps, eps.sin())
            };
            let jacobian = 0.5 * PI * phi.sin();
            let f = 2.0 / s * (s / sin_abs).sqrt() * (-0.5 * s * s * t).exp();
            integral += weight * f * jacobian;
        }
        integral *= 0.5 * PI;
        let term = integral / PI;
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < term_tol || term <= f64::EPSILON * 0.25 * sum.abs() || term == 0.0 {
            break;
        }
    }
    sum
}

const GAUSS_LEGENDRE_POINTS: usize = 48;

/// Nodes and weights on `[-1, 1]`, by Newton iteration on the Legendre
/// polynomial roots.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_LEGENDRE_POINTS;
        let nf = n as f64;
        let mut rule = vec![(0.0, 0.0); n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                derivative = nf * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / derivative;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
            rule[i] = (-x, w);
            rule[n - 1 - i] = (x, w);
        }
        rule
    })
}

fn check_nonnegative(t: f64, what: &str) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::domain(format!(
            "{what} requires a nonnegative argument, got {t}"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Φ(x) - 1/2 by composite Simpson integration of the normal density.
    fn normal_cdf_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let pdf = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let mut acc = pdf(0.0) + pdf(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(i as f64 * h);
        }
        0.5 + acc * h / 3.0
    }

    /// Jacobi-theta form of the Kolmogorov law, an algebraically independent
    /// route to the same function.
    fn kolmogorov_theta(t: f64) -> f64 {
        let c = (2.0 * PI).sqrt() / t;
        (1..200)
            .map(|k| {
                let m = f64::from(2 * k - 1);
                (-m * m * PI * PI / (8.0 * t * t)).exp()
            })
            .sum::<f64>()
            * c
    }

    #[test]
    fn normal_cdf_examples() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(40.0), 1.0, epsilon = 1e-12);
        let oracle = normal_cdf_by_quadrature(-1.959964);
        assert_abs_diff_eq!(oracle, 0.025, epsilon = 1e-6);
        assert_abs_diff_eq!(std_normal_cdf(-1.959964), oracle, epsilon = 1e-9);
    }

    #[test]
    fn normal_cdf_symmetry_and_quadrature() {
        for i in -80..=80 {
            let x = f64::from(i) * 0.1;
            assert_abs_diff_eq!(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(
                std_normal_cdf(x),
                normal_cdf_by_quadrature(x),
                epsilon = 1e-10
            );
            let p = normal_two_sided_p(x);
            assert!((0.0..=1.0).contains(&p));
            assert_abs_diff_eq!(p, 2.0 * std_normal_cdf(-x.abs()), epsilon = 1e-15);
        }
    }

    #[test]
    fn kolmogorov_examples() {
        assert_eq!(kolmogorov_cdf(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(kolmogorov_cdf(10.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kolmogorov_cdf(1.3581).unwrap(), 0.95, epsilon = 1e-4);
        assert!(kolmogorov_cdf(-0.1).is_err());
        assert!(kolmogorov_sf(f64::NAN).is_err());
    }

    #[test]
    fn kolmogorov_matches_theta_form() {
        for i in 1..=300 {
            let t = 0.05 + f64::from(i) * 0.01;
            let theta = kolmogorov_theta(t);
            assert_abs_diff_eq!(kolmogorov_cdf(t).unwrap(), theta, epsilon = 1e-5);
            assert_abs_diff_eq!(kolmogorov_sf(t).unwrap(), 1.0 - theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn kolmogorov_sf_far_tail_is_relative() {
        let t = 4.0;
        let expected = 2.0 * (-32.0f64).exp();
        let got = kolmogorov_sf(t).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cvm_examples() {
        assert_eq!(cvm_limit_cdf(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(cvm_limit_cdf(50.0).unwrap(), 1.0, epsilon = 1e-6);
        assert!(cvm_limit_cdf(-1.0).is_err());
        // classical tabulated upper points of the ω² limit law
        assert_abs_diff_eq!(cvm_limit_cdf(0.46136).unwrap(), 0.95, epsilon = 1e-5);
        assert_abs_diff_eq!(cvm_limit_cdf(0.74346).unwrap(), 0.99, epsilon = 1e-5);
        assert_abs_diff_eq!(cvm_limit_cdf(1.16786).unwrap(), 0.999, epsilon = 1e-5);
    }

    #[test]
    fn cvm_mean_is_one_sixth() {
        // E[W] = ∫ sf(t) dt over [0, ∞); trapezoid on a fine grid
        let h = 1e-3;
        let mut mean = 0.0;
        let mut prev = 1.0;
        for i in 1..=8000 {
            let cur = cvm_limit_sf(f64::from(i) * h).unwrap();
            mean += 0.5 * (prev + cur) * h;
            prev = cur;
        }
        assert_abs_diff_eq!(mean, 1.0 / 6.0, epsilon = 1e-5);
    }

    #[test]
    fn cdfs_are_monotone_on_fine_grids() {
        let grid = |lo: f64, hi: f64, i: u32| lo + (hi - lo) * f64::from(i) / 10_000.0;
        let mut prev = (0.0, 0.0, 0.0);
        for i in 0..=10_000 {
            let cur = (
                std_normal_cdf(grid(-8.0, 8.0, i)),
                kolmogorov_cdf(grid(0.0, 3.0, i)).unwrap(),
                cvm_limit_cdf(grid(0.0, 2.0, i)).unwrap(),
            );
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1 - 1e-12 && cur.2 >= prev.2 - 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn accuracy_rejects_nonpositive() {
        assert!(CdfAccuracy::new(0.0).is_err());
        assert!(CdfAccuracy::new(f64::NAN).is_err());
        assert_eq!(CdfAccuracy::new(1e-3).unwrap().abs_tol(), 1e-3);
    }
}
