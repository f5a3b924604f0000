//! Fixtures shared by the benchmarks.

use marginal_core::{generate, DataMatrix, Design, Model, SimScenario};

/// Model 1 matrix with `p` genes and `n` arrays.
pub fn one_sample_matrix(n: usize, p: usize) -> DataMatrix {
    let s = SimScenario::one_sample(Model::M1, n, p, 1).with_effect_genes(0);
    generate(&s, 0).expect("valid scenario").truth
}

/// Model 4 matrix with two groups of `n` arrays, and its design.
pub fn two_sample_matrix(n: usize, p: usize) -> (DataMatrix, Design) {
    let s = SimScenario::two_sample(n, n, p, 1).with_effect_genes(0);
    let data = generate(&s, 0).expect("valid scenario");
    let (g1, g2) = data.groups.expect("two-sample scenario");
    (data.truth, Design::two_sample(g1, g2))
}
