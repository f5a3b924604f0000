//! Benjamini-Hochberg step-up selection over marginal p-values.

use crate::error::{Error, Result};
use crate::onesample::GeneTestResult;

/// Outcome of the step-up rule.
///
/// `rejected` holds the genes with the `g_tilde` smallest p-values, in
/// ascending p order (ties broken by gene index).
#[derive(Debug, Clone, PartialEq)]
pub struct FdrSelection {
    pub q_target: f64,
    pub g_tilde: usize,
    pub total_genes: usize,
    pub rejected: Vec<usize>,
    pub sorted_pvalues: Vec<(usize, f64)>,
}

impl FdrSelection {
    /// Per-gene rejection flags in gene order.
    pub fn rejection_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total_genes];
        for &g in &self.rejected {
            mask[g] = true;
        }
        mask
    }
}

/// Rejects the genes behind `π₍₁₎ ≤ … ≤ π₍g̃₎`, where `g̃` is the largest `g`
/// with `π₍g₎ ≤ g q / p`.
///
/// `None` entries are degenerate genes: they are never rejected but still
/// count toward the total `p`.
pub fn bh_select(pvalues: &[Option<f64>], q: f64) -> Result<FdrSelection> {
    if pvalues.is_empty() {
        return Err(Error::domain("BH selection needs at least one p-value"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "target FDR must lie in (0, 1), got {q}"
        )));
    }
    let mut sorted: Vec<(usize, f64)> = Vec::with_capacity(pvalues.len());
    for (gene, p) in pvalues.iter().enumerate() {
        if let Some(p) = *p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "p-value {p} of gene {gene} is outside [0, 1]"
                )));
            }
            sorted.push((gene, p));
        }
    }
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let total = pvalues.len() as f64;
    let g_tilde = sorted
        .iter()
        .enumerate()
        .rev()
        .find(|(i, (_, p))| *p <= (*i + 1) as f64 / total * q)
        .map_or(0, |(i, _)| i + 1);

    Ok(FdrSelection {
        q_target: q,
        g_tilde,
        total_genes: pvalues.len(),
        rejected: sorted[..g_tilde].iter().map(|&(g, _)| g).collect(),
        sorted_pvalues: sorted,
    })
}

pub fn bh_select_results(results: &[GeneTestResult], q: f64) -> Result<FdrSelection> {
    let p: Vec<Option<f64>> = results.iter().map(GeneTestResult::p).collect();
    bh_select(&p, q)
}
