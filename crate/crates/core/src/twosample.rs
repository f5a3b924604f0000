//! Two-sample marginal tests.
//!
//! The mean and median tests compare location estimates with asymptotic
//! normal p-values. The Wilcoxon, Kolmogorov-Smirnov and Cramér-von Mises
//! tests are functionals of the scaled EDF difference
//! `Ĝ = √(n₁n₂/n) (F̂⁽¹⁾ - F̂⁽²⁾)` integrated against the pooled EDF `F̂⁽⁰⁾`.
//!
//! Integrals `∫ h(Ĝ) dF̂⁽⁰⁾` are evaluated as `Σ_s h(Ĝ(s)) ΔF̂⁽⁰⁾(s)` over the
//! distinct pooled values `s`, with `Ĝ` taken right-continuously at the jump.
//! This makes every EDF statistic a function of pooled ranks only.

use crate::dist::{cvm_limit_sf, kolmogorov_sf};
use crate::edf::Edf;
use crate::error::{Error, Result};
use crate::onesample::{is_constant, mean_sd, GeneTestResult, TestStatus};

/// The two groups of one gene.
#[derive(Debug, Clone, Copy)]
pub struct TwoSampleInput<'a> {
    x1: &'a [f64],
    x2: &'a [f64],
}

impl<'a> TwoSampleInput<'a> {
    pub fn new(x1: &'a [f64], x2: &'a [f64]) -> Result<Self> {
        for (label, x) in [("group 1", x1), ("group 2", x2)] {
            if x.len() < 2 {
                return Err(Error::domain(format!(
                    "{label} needs at least 2 observations, got {}",
                    x.len()
                )));
            }
            if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "{label}: non-finite observation {bad}"
                )));
            }
        }
        Ok(TwoSampleInput { x1, x2 })
    }

    pub fn x1(&self) -> &'a [f64] {
        self.x1
    }

    pub fn x2(&self) -> &'a [f64] {
        self.x2
    }

    pub fn n1(&self) -> usize {
        self.x1.len()
    }

    pub fn n2(&self) -> usize {
        self.x2.len()
    }

    pub fn swapped(&self) -> TwoSampleInput<'a> {
        TwoSampleInput {
            x1: self.x2,
            x2: self.x1,
        }
    }
}

/// Whether the group-2 EDF is shrunk by `n₂/(n₂+1)` before forming `Ĝ`.
/// The shrunken version takes more distinct values, which reduces the
/// granularity of the rank statistics in small balanced designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GranularityMode {
    #[default]
    Standard,
    Adjusted,
}

impl GranularityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GranularityMode::Standard => "standard",
            GranularityMode::Adjusted => "adjusted",
        }
    }
}

impl std::str::FromStr for GranularityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(GranularityMode::Standard),
            "adjusted" => Ok(GranularityMode::Adjusted),
            other => Err(Error::domain(format!(
                "unknown granularity mode `{other}` (expected standard or adjusted)"
            ))),
        }
    }
}

/// `Ĝ` and `F̂⁽⁰⁾` as right-continuous step functions, stored by their values
/// at the distinct pooled observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledProcess {
    jumps: Vec<f64>,
    g: Vec<f64>,
    f0: Vec<f64>,
}

impl PooledProcess {
    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// `Ĝ(s)` at each jump point.
    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    /// `F̂⁽⁰⁾(s)` at each jump point.
    pub fn f0_values(&self) -> &[f64] {
        &self.f0
    }

    fn step_index(&self, t: f64) -> Option<usize> {
        self.jumps.partition_point(|&s| s <= t).checked_sub(1)
    }

    pub fn g_at(&self, t: f64) -> f64 {
        self.step_index(t).map_or(0.0, |i| self.g[i])
    }

    pub fn f0_at(&self, t: f64) -> f64 {
        self.step_index(t).map_or(0.0, |i| self.f0[i])
    }

    fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0.iter().scan(0.0, |prev, &cur| {
            let mass = cur - *prev;
            *prev = cur;
            Some(mass)
        })
    }

    pub fn sup_abs(&self) -> f64 {
        self.g.iter().fold(0.0, |acc, g| acc.max(g.abs()))
    }

    /// `∫ Ĝ dF̂⁽⁰⁾`
    pub fn integral(&self) -> f64 {
        self.g.iter().zip(self.masses()).map(|(g, m)| g * m).sum()
    }

    /// `∫ Ĝ² dF̂⁽⁰⁾`
    pub fn integral_sq(&self) -> f64 {
        self.g
            .iter()
            .zip(self.masses())
            .map(|(g, m)| g * g * m)
            .sum()
    }
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

pub fn pooled_processes(input: &TwoSampleInput<'_>, mode: GranularityMode) -> PooledProcess {
    let a = sorted(input.x1);
    let b = sorted(input.x2);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let scale = (n1 * n2 / n).sqrt();
    let shrink = match mode {
        GranularityMode::Standard => 1.0,
        GranularityMode::Adjusted => n2 / (n2 + 1.0),
    };

    let capacity = a.len() + b.len();
    let mut jumps = Vec::with_capacity(capacity);
    let mut g = Vec::with_capacity(capacity);
    let mut f0 = Vec::with_capacity(capacity);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let s = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == s {
            i += 1;
        }
        while j < b.len() && b[j] == s {
            j += 1;
        }
        let f1 = i as f64 / n1;
        let f2 = j as f64 / n2;
        jumps.push(s);
        g.push(scale * (f1 - shrink * f2));
        f0.push((i + j) as f64 / n);
    }
    PooledProcess { jumps, g, f0 }
}

/// `T* = √(n₁n₂ / (n₁σ̂₂² + n₂σ̂₁²)) (X̄₁ - X̄₂)`.
pub fn mean_test2(input: &TwoSampleInput<'_>) -> GeneTestResult {
    if is_constant(input.x1) || is_constant(input.x2) {
        return GeneTestResult::degenerate(TestStatus::DegenerateVariance);
    }
    let (m1, s1) = mean_sd(input.x1);
    let (m2, s2) = mean_sd(input.x2);
    let (n1, n2) = (input.n1() as f64, input.n2() as f64);
    let t = (n1 * n2 / (n1 * s2 * s2 + n2 * s1 * s1)).sqrt() * (m1 - m2);
    GeneTestResult::normal(t)
}

/// `U# = 2√(n₁n₂ / (n₁/f̂₂² + n₂/f̂₁²)) (ξ̂₁ - ξ̂₂)`.
pub fn median_test2(input: &TwoSampleInput<'_>) -> GeneTestResult {
    let e1 = Edf::from_vec(input.x1.to_vec()).expect("validated input");
    let e2 = Edf::from_vec(input.x2.to_vec()).expect("validated input");
    let (Ok(d1), Ok(d2)) = (e1.density_at_median(), e2.density_at_median()) else {
        return GeneTestResult::degenerate(TestStatus::DegenerateDensity);
    };
    let (n1, n2) = (input.n1() as f64, input.n2() as f64);
    let scale = (n1 * n2 / (n1 / (d2.f_hat * d2.f_hat) + n2 / (d1.f_hat * d1.f_hat))).sqrt();
    GeneTestResult::normal(2.0 * scale * (e1.median() - e2.median()))
}

/// Rank-sum statistic `T*₁ = √12 ∫ Ĝ dF̂⁽⁰⁾` with a normal p-value.
pub fn wilcoxon_test2(input: &TwoSampleInput<'_>, mode: GranularityMode) -> GeneTestResult {
    let process = pooled_processes(input, mode);
    GeneTestResult::normal(12f64.sqrt() * process.integral())
}

/// `T*₂ = sup |Ĝ|`, p = 1 - K(T*₂) for the Kolmogorov law `K`.
pub fn ks_test2(input: &TwoSampleInput<'_>, mode: GranularityMode) -> GeneTestResult {
    let t = pooled_processes(input, mode).sup_abs();
    let p = kolmogorov_sf(t).expect("sup |G| is nonnegative");
    GeneTestResult::ok(t, p)
}

/// `T*₃ = ∫ Ĝ² dF̂⁽⁰⁾`, p from the Cramér-von Mises limit law.
pub fn cvm_test2(input: &TwoSampleInput<'_>, mode: GranularityMode) -> GeneTestResult {
    let t = pooled_processes(input, mode).integral_sq();
    let p = cvm_limit_sf(t).expect("integral of G² is nonnegative");
    GeneTestResult::ok(t, p)
}
