//! Simulated expression matrices with a known set of differentially expressed
//! genes.
//!
//! Every random draw comes from a ChaCha8 stream selected by
//! `(seed, replicate, purpose, array)`, so a replicate is reproducible on its
//! own and independent of how replicates are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dist::std_normal_cdf;
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Independent genes, `X = H(Z)`.
    M1,
    /// Windowed sums with the default window `k = 10`, step `m = 7`.
    M2,
    /// Windowed sums with the default window `k = 10`, step `m = 3`.
    M3,
    /// Two-sample design with `X ~ U[-1, 1]`.
    M4,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::M1, Model::M2, Model::M3, Model::M4];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::M1 => "m1",
            Model::M2 => "m2",
            Model::M3 => "m3",
            Model::M4 => "m4",
        }
    }

    /// Default `(k, m)` window.
    pub fn default_window(self) -> (usize, usize) {
        match self {
            Model::M2 => (10, 7),
            Model::M3 => (10, 3),
            Model::M1 | Model::M4 => (1, 1),
        }
    }

    pub fn is_two_sample(self) -> bool {
        self == Model::M4
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Scenario(format!(
                    "unknown model `{s}`; expected one of m1, m2, m3, m4"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NoiseShape {
    /// Independent `U[-ε, ε]` per cell.
    #[default]
    UniformPm,
    /// One `U[-ε, ε]` offset per array, shared by all its genes.
    ConstantPerArray,
}

impl NoiseShape {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseShape::UniformPm => "uniform_pm",
            NoiseShape::ConstantPerArray => "constant_per_array",
        }
    }
}

impl FromStr for NoiseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_pm" => Ok(NoiseShape::UniformPm),
            "constant_per_array" => Ok(NoiseShape::ConstantPerArray),
            _ => Err(Error::Scenario(format!(
                "unknown noise shape `{s}`; expected uniform_pm or constant_per_array"
            ))),
        }
    }
}

/// Perturbation applied on top of the true matrix, bounded by `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub shape: NoiseShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSizes {
    One { n: usize },
    Two { n1: usize, n2: usize },
}

impl SampleSizes {
    pub fn total(self) -> usize {
        match self {
            SampleSizes::One { n } => n,
            SampleSizes::Two { n1, n2 } => n1 + n2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub model: Model,
    pub sizes: SampleSizes,
    pub p: usize,
    pub k: usize,
    pub m: usize,
    pub n_effect_genes: usize,
    pub effect_range: (f64, f64),
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
}

const DEFAULT_EFFECT_GENES: usize = 40;
const DEFAULT_EFFECT_RANGE: (f64, f64) = (-2.0, 2.0);

impl SimScenario {
    /// One-sample scenario for models 1–3 with the model's default window.
    pub fn one_sample(model: Model, n: usize, p: usize, seed: u64) -> Self {
        let (k, m) = model.default_window();
        SimScenario {
            model,
            sizes: SampleSizes::One { n },
            p,
            k,
            m,
            n_effect_genes: DEFAULT_EFFECT_GENES,
            effect_range: DEFAULT_EFFECT_RANGE,
            noise: None,
            seed,
        }
    }

    /// Model 4 scenario with group sizes `n1`, `n2`.
    pub fn two_sample(n1: usize, n2: usize, p: usize, seed: u64) -> Self {
        SimScenario {
            model: Model::M4,
            sizes: SampleSizes::Two { n1, n2 },
            p,
            k: 1,
            m: 1,
            n_effect_genes: DEFAULT_EFFECT_GENES,
            effect_range: DEFAULT_EFFECT_RANGE,
            noise: None,
            seed,
        }
    }

    pub fn with_effect_genes(mut self, count: usize) -> Self {
        self.n_effect_genes = count;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_window(mut self, k: usize, m: usize) -> Self {
        self.k = k;
        self.m = m;
        self
    }

    pub fn arrays(&self) -> usize {
        self.sizes.total()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        match (self.model.is_two_sample(), self.sizes) {
            (true, SampleSizes::One { .. }) => return bad("model m4 needs n1 and n2".into()),
            (false, SampleSizes::Two { .. }) => {
                return bad(format!(
                    "model {} is one-sample; give n, not n1/n2",
                    self.model
                ))
            }
            _ => {}
        }
        match self.sizes {
            SampleSizes::One { n } if n < 2 => {
                return bad(format!("n must be at least 2, got {n}"))
            }
            SampleSizes::Two { n1, n2 } if n1 < 2 || n2 < 2 => {
                return bad(format!("n1 and n2 must be at least 2, got {n1} and {n2}"))
            }
            _ => {}
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.k == 0 || self.m == 0 {
            return bad(format!(
                "window k and step m must be at least 1, got k={} m={}",
                self.k, self.m
            ));
        }
        if matches!(self.model, Model::M1 | Model::M4) && (self.k, self.m) != (1, 1) {
            return bad(format!(
                "model {} has no window; k and m must be 1",
                self.model
            ));
        }
        if self.n_effect_genes > self.p {
            return bad(format!(
                "n_effect_genes = {} exceeds p = {}",
                self.n_effect_genes, self.p
            ));
        }
        let (lo, hi) = self.effect_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("effect range [{lo}, {hi}] is empty or not finite"));
        }
        if let Some(noise) = self.noise {
            if !(noise.epsilon >= 0.0 && noise.epsilon.is_finite()) {
                return bad(format!(
                    "noise epsilon must be finite and ≥ 0, got {}",
                    noise.epsilon
                ));
            }
        }
        Ok(())
    }

    /// Length of the normal stream each array consumes.
    pub fn stream_len(&self) -> usize {
        (self.p - 1) * self.m + self.k
    }
}

/// Number of `Z` indices shared by adjacent genes under window `k`, step `m`.
pub fn window_overlap(k: usize, m: usize) -> usize {
    k.saturating_sub(m)
}

/// `H = 2Φ - 1`, mapping a standard normal to `U[-1, 1]`.
pub fn link(z: f64) -> f64 {
    2.0 * std_normal_cdf(z) - 1.0
}

/// One generated replicate.
#[derive(Debug, Clone)]
pub struct SimData {
    /// Data with effects injected and no noise.
    pub truth: DataMatrix,
    /// Effect per gene; zero outside the first `n_effect_genes`.
    pub beta: Vec<f64>,
    /// `truth` plus noise, when the scenario has a noise spec.
    pub perturbed: Option<DataMatrix>,
    /// Array indices of group 1 and group 2 for two-sample scenarios.
    pub groups: Option<(Vec<usize>, Vec<usize>)>,
}

impl SimData {
    /// The matrix an analyst would observe.
    pub fn observed(&self) -> &DataMatrix {
        self.perturbed.as_ref().unwrap_or(&self.truth)
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Data = 0,
    Effects = 1,
    Noise = 2,
}

fn stream(seed: u64, replicate: u64, purpose: Purpose, index: usize) -> ChaCha8Rng {
    assert!(replicate < 1 << 30, "replicate index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 34) | ((purpose as u64) << 32) | index as u64);
    rng
}

pub fn generate(s: &SimScenario, replicate: u64) -> Result<SimData> {
    s.validate()?;
    let (p, n) = (s.p, s.arrays());
    let mut values = vec![0.0; p * n];

    let mut z = vec![0.0; s.stream_len()];
    let scale = 1.0 / (s.k as f64).sqrt();
    for i in 0..n {
        let mut rng = stream(s.seed, replicate, Purpose::Data, i);
        if s.model == Model::M4 {
            for j in 0..p {
                values[j * n + i] = rng.gen_range(-1.0..1.0);
            }
            continue;
        }
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for j in 0..p {
            let start = j * s.m;
            let sum: f64 = z[start..start + s.k].iter().sum();
            values[j * n + i] = link(sum * scale);
        }
    }

    let mut beta = vec![0.0; p];
    let mut rng = stream(s.seed, replicate, Purpose::Effects, 0);
    let (lo, hi) = s.effect_range;
    for b in beta.iter_mut().take(s.n_effect_genes) {
        *b = if lo < hi { rng.gen_range(lo..hi) } else { lo };
    }
    let (shifted, groups) = match s.sizes {
        SampleSizes::One { .. } => (0..n, None),
        SampleSizes::Two { n1, .. } => (0..n1, Some(((0..n1).collect(), (n1..n).collect()))),
    };
    for (j, &b) in beta.iter().enumerate().take(s.n_effect_genes) {
        for i in shifted.clone() {
            values[j * n + i] += b;
        }
    }
    let truth = DataMatrix::new(p, n, values)?;

    let perturbed = s.noise.map(|noise| {
        let mut out = truth.clone();
        let eps = noise.epsilon;
        for i in 0..n {
            let mut rng = stream(s.seed, replicate, Purpose::Noise, i);
            match noise.shape {
                NoiseShape::UniformPm => {
                    for j in 0..p {
                        out.gene_mut(j)[i] += rng.gen_range(-eps..=eps);
                    }
                }
                NoiseShape::ConstantPerArray => {
                    let c = rng.gen_range(-eps..=eps);
                    for j in 0..p {
                        out.gene_mut(j)[i] += c;
                    }
                }
            }
        }
        out
    });

    Ok(SimData {
        truth,
        beta,
        perturbed,
        groups,
    })
}

/// `key = value` lines; `#` starts a comment. Keys: `model`, `n` or
/// `n1`/`n2`, `p`, `k`, `m`, `n_effect_genes`, `effect_min`, `effect_max`,
/// `noise_epsilon`, `noise_shape`, `seed`.
impl fmt::Display for SimScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model = {}", self.model)?;
        match self.sizes {
            SampleSizes::One { n } => writeln!(f, "n = {n}")?,
            SampleSizes::Two { n1, n2 } => {
                writeln!(f, "n1 = {n1}")?;
                writeln!(f, "n2 = {n2}")?;
            }
        }
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "n_effect_genes = {}", self.n_effect_genes)?;
        writeln!(f, "effect_min = {:?}", self.effect_range.0)?;
        writeln!(f, "effect_max = {:?}", self.effect_range.1)?;
        if let Some(noise) = self.noise {
            writeln!(f, "noise_epsilon = {:?}", noise.epsilon)?;
            writeln!(f, "noise_shape = {}", noise.shape.as_str())?;
        }
        writeln!(f, "seed = {}", self.seed)
    }
}

impl FromStr for SimScenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(idx + 1, format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::parse(idx + 1, format!("duplicate key `{key}`")));
            }
            entries.push((idx + 1, key, value.trim()));
        }

        fn get<T: FromStr>(entries: &[(usize, &str, &str)], key: &str) -> Result<Option<T>>
        where
            T::Err: fmt::Display,
        {
            match entries.iter().find(|(_, k, _)| *k == key) {
                None => Ok(None),
                Some((line, _, v)) => v
                    .parse()
                    .map(Some)
                    .map_err(|e| Error::parse(*line, format!("bad value for `{key}`: {e}"))),
            }
        }

        const KEYS: [&str; 12] = [
            "model",
            "n",
            "n1",
            "n2",
            "p",
            "k",
            "m",
            "n_effect_genes",
            "effect_min",
            "effect_max",
            "noise_epsilon",
            "noise_shape",
        ];
        if let Some((line, key, _)) = entries
            .iter()
            .find(|(_, k, _)| !KEYS.contains(k) && *k != "seed")
        {
            return Err(Error::parse(*line, format!("unknown key `{key}`")));
        }

        let model: Model =
            get(&entries, "model")?.ok_or_else(|| Error::Scenario("missing key `model`".into()))?;
        let p: usize =
            get(&entries, "p")?.ok_or_else(|| Error::Scenario("missing key `p`".into()))?;
        let seed: u64 = get(&entries, "seed")?.unwrap_or(0);
        let mut s = match (
            get::<usize>(&entries, "n")?,
            get(&entries, "n1")?,
            get(&entries, "n2")?,
        ) {
            (Some(n), None, None) => SimScenario::one_sample(model, n, p, seed),
            (None, Some(n1), Some(n2)) => {
                let mut s = SimScenario::two_sample(n1, n2, p, seed);
                s.model = model;
                s
            }
            _ => {
                return Err(Error::Scenario(
                    "give either `n` or both `n1` and `n2`".into(),
                ))
            }
        };
        s.model = model;
        if let Some(k) = get(&entries, "k")? {
            s.k = k;
        }
        if let Some(m) = get(&entries, "m")? {
            s.m = m;
        }
        if let Some(g) = get(&entries, "n_effect_genes")? {
            s.n_effect_genes = g;
        }
        if let Some(lo) = get(&entries, "effect_min")? {
            s.effect_range.0 = lo;
        }
        if let Some(hi) = get(&entries, "effect_max")? {
            s.effect_range.1 = hi;
        }
        match (
            get::<f64>(&entries, "noise_epsilon")?,
            get::<String>(&entries, "noise_shape")?,
        ) {
            (Some(epsilon), shape) => {
                let shape = shape.map(|v| v.parse()).transpose()?.unwrap_or_default();
                s.noise = Some(NoiseSpec { epsilon, shape });
            }
            (None, Some(_)) => {
                return Err(Error::Scenario(
                    "`noise_shape` given without `noise_epsilon`".into(),
                ))
            }
            (None, None) => {}
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf::Edf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn link_is_odd() {
        assert_eq!(link(0.0), 0.0);
        assert_abs_diff_eq!(link(1.3), -link(-1.3), epsilon = 1e-15);
    }

    #[test]
    fn overlap_arithmetic() {
        // gene 1 uses Z_1..Z_10, gene 2 uses Z_8..Z_17 when m = 7
        let first: Vec<usize> = (1..=10).collect();
        let second: Vec<usize> = (8..=17).collect();
        let shared = first.iter().filter(|i| second.contains(i)).count();
        assert_eq!(shared, 3);
        assert_eq!(window_overlap(10, 7), 3);
        assert_eq!(window_overlap(10, 3), 7);
        assert_eq!(window_overlap(1, 1), 0);
    }

    #[test]
    fn marginals_are_uniform() {
        let uniform = |t: f64| ((t + 1.0) / 2.0).clamp(0.0, 1.0);
        for model in [Model::M1, Model::M2, Model::M3] {
            let s = SimScenario::one_sample(model, 50, 2000, 11).with_effect_genes(0);
            let d = generate(&s, 0).unwrap();
            assert_eq!(d.truth.values().len(), 100_000);
            let dev = Edf::new(d.truth.values()).unwrap().sup_deviation(uniform);
            assert!(dev <= 0.01, "{model}: sup deviation {dev}");
        }
        let s = SimScenario::two_sample(25, 25, 2000, 11).with_effect_genes(0);
        let dev = Edf::new(generate(&s, 0).unwrap().truth.values())
            .unwrap()
            .sup_deviation(uniform);
        assert!(dev <= 0.01, "m4: sup deviation {dev}");
    }

    fn inverse_link(x: f64) -> f64 {
        // invert H by bisection; only used to recover the Gaussian inputs
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if link(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn adjacent_gene_correlation_matches_overlap() {
        for (model, expected) in [(Model::M2, 0.3), (Model::M3, 0.7)] {
            // 10^5 pairs: 50 adjacent-gene pairs per array, 2000 arrays
            let s = SimScenario::one_sample(model, 2000, 51, 5).with_effect_genes(0);
            let d = generate(&s, 0).unwrap();
            let (mut sxy, mut sxx, mut syy, mut count) = (0.0, 0.0, 0.0, 0);
            for j in 0..50 {
                for i in 0..2000 {
                    let a = inverse_link(d.truth.get(j, i));
                    let b = inverse_link(d.truth.get(j + 1, i));
                    sxy += a * b;
                    sxx += a * a;
                    syy += b * b;
                    count += 1;
                }
            }
            assert_eq!(count, 100_000);
            let r = sxy / (sxx * syy).sqrt();
            assert!(
                (r - expected).abs() <= 0.02,
                "{model}: r = {r}, want {expected}"
            );
        }
    }

    #[test]
    fn effects_hit_only_the_first_genes() {
        let s = SimScenario::one_sample(Model::M1, 10, 100, 3);
        let d = generate(&s, 0).unwrap();
        assert!(d.beta[..40]
            .iter()
            .all(|b| (-2.0..2.0).contains(b) && *b != 0.0));
        assert!(d.beta[40..].iter().all(|&b| b == 0.0));

        let s = SimScenario::two_sample(5, 5, 100, 3);
        let with = generate(&s, 0).unwrap();
        let without = generate(&s.clone().with_effect_genes(0), 0).unwrap();
        for j in 0..40 {
            for i in 0..10 {
                let diff = with.truth.get(j, i) - without.truth.get(j, i);
                let want = if i < 5 { with.beta[j] } else { 0.0 };
                assert_abs_diff_eq!(diff, want, epsilon = 1e-12);
            }
        }
        assert_eq!(with.groups.unwrap(), ((0..5).collect(), (5..10).collect()));
    }

    #[test]
    fn noise_is_bounded() {
        for shape in [NoiseShape::UniformPm, NoiseShape::ConstantPerArray] {
            let eps = 0.037;
            let s = SimScenario::one_sample(Model::M1, 30, 500, 9).with_noise(NoiseSpec {
                epsilon: eps,
                shape,
            });
            let d = generate(&s, 2).unwrap();
            let pert = d.perturbed.as_ref().unwrap();
            let dev = pert.max_abs_diff(&d.truth);
            assert!(dev <= eps && dev > 0.0);
            if shape == NoiseShape::ConstantPerArray {
                let offset = pert.get(0, 3) - d.truth.get(0, 3);
                assert_abs_diff_eq!(
                    pert.get(400, 3) - d.truth.get(400, 3),
                    offset,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn deterministic_per_replicate() {
        let s = SimScenario::one_sample(Model::M2, 20, 300, 42);
        let a = generate(&s, 7).unwrap();
        let b = generate(&s, 7).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.beta, b.beta);
        assert_ne!(generate(&s, 8).unwrap().truth, a.truth);
        let other_seed = SimScenario { seed: 43, ..s };
        assert_ne!(generate(&other_seed, 7).unwrap().truth, a.truth);
    }

    #[test]
    fn config_round_trip() {
        let s = SimScenario::one_sample(Model::M3, 20, 2000, 123).with_noise(NoiseSpec {
            epsilon: 0.1 / 3.0,
            shape: NoiseShape::ConstantPerArray,
        });
        let back: SimScenario = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        let s = SimScenario::two_sample(10, 12, 500, u64::MAX);
        assert_eq!(s.to_string().parse::<SimScenario>().unwrap(), s);
    }

    #[test]
    fn config_minimal_and_errors() {
        let s: SimScenario = "# table row\nmodel = m2\nn = 20\np = 2000\nseed = 1\n"
            .parse()
            .unwrap();
        assert_eq!((s.k, s.m, s.n_effect_genes), (10, 7, 40));
        assert!("model = m5\nn = 3\np = 4".parse::<SimScenario>().is_err());
        assert!("model = m1\nn = 3".parse::<SimScenario>().is_err());
        assert!("model = m1\nn = 20\np = 10".parse::<SimScenario>().is_err());
        assert!("model = m4\nn = 20\np = 100"
            .parse::<SimScenario>()
            .is_err());
        assert!(matches!(
            "model = m1\nn 20".parse::<SimScenario>(),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!("model = m1\nn = 20\np = 100\ncolour = red"
            .parse::<SimScenario>()
            .is_err());
    }

    #[test]
    fn validation() {
        let s = SimScenario::one_sample(Model::M2, 20, 100, 0).with_window(0, 3);
        assert!(s.validate().is_err());
        let s = SimScenario::one_sample(Model::M1, 20, 100, 0).with_window(10, 3);
        assert!(s.validate().is_err());
        let mut s = SimScenario::one_sample(Model::M1, 20, 100, 0);
        s.effect_range = (1.0, -1.0);
        assert!(s.validate().is_err());
        s.effect_range = (0.5, 0.5);
        let d = generate(&s, 0).unwrap();
        assert!(d.beta[..40].iter().all(|&b| b == 0.5));
    }
}
