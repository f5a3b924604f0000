//! Running marginal tests over whole matrices, scoring selections against a
//! known truth, and summarizing simulation studies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::multiplicity::{bh_select_results, FdrSelection};
use crate::onesample::{
    mean_test, median_test, sign_test, signed_rank_test, GeneTestResult, SignedRankConfig,
};
use crate::simgen::{generate, SampleSizes, SimScenario};
use crate::twosample::{
    cvm_test2, ks_test2, mean_test2, median_test2, wilcoxon_test2, GranularityMode, TwoSampleInput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestId {
    Mean,
    Median,
    SignedRank,
    Sign,
    Mean2,
    Median2,
    Wilcoxon,
    Ks,
    Cvm,
}

impl TestId {
    pub const ALL: [TestId; 9] = [
        TestId::Mean,
        TestId::Median,
        TestId::SignedRank,
        TestId::Sign,
        TestId::Mean2,
        TestId::Median2,
        TestId::Wilcoxon,
        TestId::Ks,
        TestId::Cvm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestId::Mean => "mean",
            TestId::Median => "median",
            TestId::SignedRank => "signed-rank",
            TestId::Sign => "sign",
            TestId::Mean2 => "mean2",
            TestId::Median2 => "median2",
            TestId::Wilcoxon => "wilcoxon",
            TestId::Ks => "ks",
            TestId::Cvm => "cvm",
        }
    }

    pub fn is_two_sample(self) -> bool {
        matches!(
            self,
            TestId::Mean2 | TestId::Median2 | TestId::Wilcoxon | TestId::Ks | TestId::Cvm
        )
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = TestId::ALL.iter().map(|t| t.as_str()).collect();
                Error::domain(format!(
                    "unknown test `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Knobs shared by all tests.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestOptions {
    /// Null location for the one-sample mean and median tests.
    pub mu0: f64,
    pub signed_rank: SignedRankConfig,
    /// `None` picks adjusted mode for equal group sizes, standard otherwise.
    pub granularity: Option<GranularityMode>,
}

impl TestOptions {
    pub fn granularity_for(&self, n1: usize, n2: usize) -> GranularityMode {
        self.granularity.unwrap_or(if n1 == n2 {
            GranularityMode::Adjusted
        } else {
            GranularityMode::Standard
        })
    }
}

/// Which arrays form the sample(s) for each gene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Design {
    OneSample,
    TwoSample {
        group1: Vec<usize>,
        group2: Vec<usize>,
    },
}

impl Design {
    pub fn two_sample(group1: Vec<usize>, group2: Vec<usize>) -> Self {
        Design::TwoSample { group1, group2 }
    }

    fn check(&self, test: TestId, arrays: usize) -> Result<()> {
        match (self, test.is_two_sample()) {
            (Design::OneSample, true) => Err(Error::domain(format!(
                "test `{test}` compares two groups and needs group labels"
            ))),
            (Design::TwoSample { .. }, false) => Err(Error::domain(format!(
                "test `{test}` is a one-sample test and takes no group labels"
            ))),
            (Design::TwoSample { group1, group2 }, true) => {
                if let Some(&bad) = group1.iter().chain(group2).find(|&&i| i >= arrays) {
                    return Err(Error::domain(format!("array index {bad} out of range")));
                }
                Ok(())
            }
            (Design::OneSample, false) => Ok(()),
        }
    }
}

fn one_gene(
    test: TestId,
    design: &Design,
    row: &[f64],
    opts: &TestOptions,
) -> Result<GeneTestResult> {
    match design {
        Design::OneSample => match test {
            TestId::Mean => mean_test(row, opts.mu0),
            TestId::Median => median_test(row, opts.mu0),
            TestId::SignedRank => signed_rank_test(row, opts.signed_rank),
            TestId::Sign => sign_test(row),
            _ => unreachable!("design checked before dispatch"),
        },
        Design::TwoSample { group1, group2 } => {
            let x1: Vec<f64> = group1.iter().map(|&i| row[i]).collect();
            let x2: Vec<f64> = group2.iter().map(|&i| row[i]).collect();
            let input = TwoSampleInput::new(&x1, &x2)?;
            let mode = opts.granularity_for(x1.len(), x2.len());
            Ok(match test {
                TestId::Mean2 => mean_test2(&input),
                TestId::Median2 => median_test2(&input),
                TestId::Wilcoxon => wilcoxon_test2(&input, mode),
                TestId::Ks => ks_test2(&input, mode),
                TestId::Cvm => cvm_test2(&input, mode),
                _ => unreachable!("design checked before dispatch"),
            })
        }
    }
}

/// Runs `test` on every gene, in parallel; results are in gene order.
pub fn run_tests(
    matrix: &DataMatrix,
    design: &Design,
    test: TestId,
    opts: &TestOptions,
) -> Result<Vec<GeneTestResult>> {
    design.check(test, matrix.arrays())?;
    (0..matrix.genes())
        .into_par_iter()
        .map(|j| one_gene(test, design, matrix.gene(j), opts))
        .collect()
}

/// `|rejected \ truth| / max(|rejected|, 1)`.
pub fn empirical_fdr(rejected: &[usize], truth: &[usize]) -> f64 {
    let false_rejections = rejected.iter().filter(|g| !truth.contains(g)).count();
    false_rejections as f64 / rejected.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateSummary {
    pub total_identified: usize,
    pub true_positives: usize,
    pub empirical_fdr: f64,
    pub degenerate_genes: usize,
}

impl ReplicateSummary {
    /// Scores a selection when the true effects are genes `0..n_effect_genes`.
    pub fn score(
        selection: &FdrSelection,
        results: &[GeneTestResult],
        n_effect_genes: usize,
    ) -> Self {
        let truth: Vec<usize> = (0..n_effect_genes).collect();
        let true_positives = selection
            .rejected
            .iter()
            .filter(|&&g| g < n_effect_genes)
            .count();
        ReplicateSummary {
            total_identified: selection.rejected.len(),
            true_positives,
            empirical_fdr: empirical_fdr(&selection.rejected, &truth),
            degenerate_genes: results.iter().filter(|r| !r.is_ok()).count(),
        }
    }
}

/// What a replicate without rejections contributes to the mean EFDR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroRejectionPolicy {
    /// EFDR 0, from the `max(total, 1)` denominator.
    #[default]
    CountAsZero,
    /// Left out of the EFDR mean; Tot and Pos still average over all replicates.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub tests: Vec<TestId>,
    pub q: f64,
    pub replicates: usize,
    pub options: TestOptions,
    pub zero_rejections: ZeroRejectionPolicy,
}

impl StudyConfig {
    pub fn new(tests: Vec<TestId>, q: f64, replicates: usize) -> Self {
        StudyConfig {
            tests,
            q,
            replicates,
            options: TestOptions::default(),
            zero_rejections: ZeroRejectionPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSummary {
    pub test: TestId,
    pub mean_total: f64,
    pub mean_true_positives: f64,
    /// NaN when every replicate was skipped under [`ZeroRejectionPolicy::Skip`].
    pub mean_efdr: f64,
    pub efdr_replicates: usize,
    pub mean_degenerate_genes: f64,
    pub replicates: Vec<ReplicateSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub scenario: SimScenario,
    pub q: f64,
    pub replicates: usize,
    pub tests: Vec<TestSummary>,
}

impl StudySummary {
    pub fn get(&self, test: TestId) -> Option<&TestSummary> {
        self.tests.iter().find(|t| t.test == test)
    }

    /// One header line and one data line, with `tot`, `pos`, `efdr` columns
    /// per test.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "model\tn\tp\tq\treplicates")?;
        for t in &self.tests {
            write!(out, "\t{0}_tot\t{0}_pos\t{0}_efdr", t.test)?;
        }
        writeln!(out)?;
        let n = match self.scenario.sizes {
            SampleSizes::One { n } => n.to_string(),
            SampleSizes::Two { n1, n2 } => format!("{n1}/{n2}"),
        };
        write!(
            out,
            "{}\t{n}\t{}\t{}\t{}",
            self.scenario.model, self.scenario.p, self.q, self.replicates
        )?;
        for t in &self.tests {
            write!(
                out,
                "\t{:.2}\t{:.2}\t{:.3}",
                t.mean_total, t.mean_true_positives, t.mean_efdr
            )?;
        }
        writeln!(out)
    }
}

/// Generates replicate `replicate` and scores each test on the observed
/// matrix (perturbed when the scenario carries noise).
pub fn run_replicate(
    scenario: &SimScenario,
    replicate: u64,
    tests: &[TestId],
    q: f64,
    opts: &TestOptions,
) -> Result<Vec<ReplicateSummary>> {
    let data = generate(scenario, replicate)?;
    let design = match &data.groups {
        None => Design::OneSample,
        Some((g1, g2)) => Design::two_sample(g1.clone(), g2.clone()),
    };
    tests
        .iter()
        .map(|&test| {
            let results = run_tests(data.observed(), &design, test, opts)?;
            let selection = bh_select_results(&results, q)?;
            Ok(ReplicateSummary::score(
                &selection,
                &results,
                scenario.n_effect_genes,
            ))
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        },
        count,
    )
}

/// Runs replicates `0..replicates` in parallel and averages per test. The
/// reduction happens in replicate order, so the result does not depend on
/// the thread count.
pub fn run_study(scenario: &SimScenario, config: &StudyConfig) -> Result<StudySummary> {
    scenario.validate()?;
    if config.replicates == 0 {
        return Err(Error::domain("a study needs at least one replicate"));
    }
    if config.tests.is_empty() {
        return Err(Error::domain("a study needs at least one test"));
    }
    let per_replicate: Vec<Vec<ReplicateSummary>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(scenario, r, &config.tests, config.q, &config.options))
        .collect::<Result<_>>()?;

    let tests = config
        .tests
        .iter()
        .enumerate()
        .map(|(k, &test)| {
            let reps: Vec<ReplicateSummary> = per_replicate.iter().map(|r| r[k]).collect();
            let (mean_total, _) = mean(reps.iter().map(|r| r.total_identified as f64));
            let (mean_true_positives, _) = mean(reps.iter().map(|r| r.true_positives as f64));
            let (mean_degenerate_genes, _) = mean(reps.iter().map(|r| r.degenerate_genes as f64));
            let (mean_efdr, efdr_replicates) = mean(
                reps.iter()
                    .filter(|r| {
                        config.zero_rejections == ZeroRejectionPolicy::CountAsZero
                            || r.total_identified > 0
                    })
                    .map(|r| r.empirical_fdr),
            );
            TestSummary {
                test,
                mean_total,
                mean_true_positives,
                mean_efdr,
                efdr_replicates,
                mean_degenerate_genes,
                replicates: reps,
            }
        })
        .collect();

    Ok(StudySummary {
        scenario: scenario.clone(),
        q: config.q,
        replicates: config.replicates,
        tests,
    })
}

/// Largest `|p(perturbed) - p(truth)|` over genes where both tests are
/// non-degenerate.
pub fn max_pvalue_shift(
    truth: &DataMatrix,
    perturbed: &DataMatrix,
    design: &Design,
    test: TestId,
    opts: &TestOptions,
) -> Result<f64> {
    let a = run_tests(truth, design, test, opts)?;
    let b = run_tests(perturbed, design, test, opts)?;
    Ok(a.iter()
        .zip(&b)
        .filter_map(|(x, y)| Some((x.p()? - y.p()?).abs()))
        .fold(0.0, f64::max))
}

/// Kendall's tau-b between two paired vectors, in `O(n log n)`.
///
/// Errors when the lengths differ, fewer than two pairs are given, a value
/// is NaN, or either vector is constant (tau-b is then undefined).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "kendall tau needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::domain("kendall tau needs at least two pairs"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::domain("kendall tau input contains NaN"));
    }
    let cmp = |x: &f64, y: &f64| x.partial_cmp(y).expect("NaN excluded");
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| cmp(&a[i], &a[j]).then(cmp(&b[i], &b[j])));

    let pairs = |t: u64| t * (t.saturating_sub(1)) / 2;
    let (mut ties_a, mut ties_joint) = (0u64, 0u64);
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if a[i] == a[j] {
            run_a += 1;
            if b[i] == b[j] {
                run_ab += 1;
            } else {
                ties_joint += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_joint += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_joint += pairs(run_ab);

    let mut ys: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let swaps = count_inversions(&mut ys);
    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let n0 = pairs(n as u64);
    let numerator =
        n0 as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    let denominator = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if denominator == 0.0 {
        return Err(Error::domain(
            "kendall tau is undefined for a constant vector",
        ));
    }
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

/// Sorts `v` and returns the number of pairs `i < j` with `v[i] > v[j]`.
fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        for start in (0..n).step_by(2 * width) {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + end - j].copy_from_slice(&v[j..end]);
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}
