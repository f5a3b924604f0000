//! Marginal inference for genes × arrays expression matrices.
//!
//! Per-gene one- and two-sample tests built on empirical distribution
//! functions, Benjamini-Hochberg selection across genes, and a deterministic
//! simulation harness for studying discovery counts and empirical FDR.

pub mod dist;
pub mod edf;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod multiplicity;
pub mod onesample;
pub mod simgen;
pub mod twosample;

pub use edf::{DensityEstimate, Edf};
pub use error::{Error, Result};
pub use harness::{
    empirical_fdr, kendall_tau, run_study, run_tests, Design, ReplicateSummary, StudyConfig,
    StudySummary, TestId, TestOptions, TestSummary, ZeroRejectionPolicy,
};
pub use io::GroupLabels;
pub use matrix::DataMatrix;
pub use multiplicity::{bh_select, bh_select_results, FdrSelection};
pub use onesample::{GeneTestResult, SignedRankConfig, TestStatus, VarianceFormula};
pub use simgen::{generate, Model, NoiseShape, NoiseSpec, SampleSizes, SimData, SimScenario};
pub use twosample::{GranularityMode, TwoSampleInput};
