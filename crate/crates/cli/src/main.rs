use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use marginal_core::io::{read_labels_path, read_matrix_path, write_pvalue_table, write_results};
use marginal_core::{
    bh_select_results, kendall_tau, run_study, run_tests, Design, GranularityMode, Model,
    NoiseShape, NoiseSpec, SignedRankConfig, SimScenario, StudyConfig, TestId, TestOptions,
    VarianceFormula, ZeroRejectionPolicy,
};

/// Per-gene marginal tests with FDR control, simulation studies and
/// p-value concordance.
#[derive(Parser)]
#[command(name = "marginal", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one test on every gene of a matrix and select genes by BH.
    Test(TestCmd),
    /// Run a simulation study and print its summary table.
    Simulate(SimulateCmd),
    /// Run several tests on one matrix and compare their p-values.
    Concordance(ConcordanceCmd),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestArg {
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

impl From<TestArg> for TestId {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Mean => TestId::Mean,
            TestArg::Median => TestId::Median,
            TestArg::SignedRank => TestId::SignedRank,
            TestArg::Sign => TestId::Sign,
            TestArg::Mean2 => TestId::Mean2,
            TestArg::Median2 => TestId::Median2,
            TestArg::Wilcoxon => TestId::Wilcoxon,
            TestArg::Ks => TestId::Ks,
            TestArg::Cvm => TestId::Cvm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Standard,
    Adjusted,
    /// Adjusted when the two groups have equal size, standard otherwise.
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceArg {
    Paper,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    M1,
    M2,
    M3,
    M4,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseShapeArg {
    UniformPm,
    ConstantPerArray,
}

#[derive(Args)]
struct TestFlags {
    /// Two-sample EDF granularity mode.
    #[arg(long, value_enum, default_value = "auto")]
    granularity: GranularityArg,

    /// Variance of the signed-rank statistic.
    #[arg(long, value_enum, default_value = "paper")]
    variance_formula: VarianceArg,

    /// Null location for the one-sample mean and median tests.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu0: f64,
}

impl TestFlags {
    fn options(&self) -> TestOptions {
        TestOptions {
            mu0: self.mu0,
            signed_rank: SignedRankConfig {
                variance_formula: match self.variance_formula {
                    VarianceArg::Paper => VarianceFormula::Paper,
                    VarianceArg::Classical => VarianceFormula::Classical,
                },
            },
            granularity: match self.granularity {
                GranularityArg::Standard => Some(GranularityMode::Standard),
                GranularityArg::Adjusted => Some(GranularityMode::Adjusted),
                GranularityArg::Auto => None,
            },
        }
    }
}

#[derive(Args)]
struct MatrixInput {
    /// Tab- or comma-separated matrix: header of array ids, one row per gene.
    #[arg(long)]
    matrix: PathBuf,

    /// Array id and group (1 or 2) per line; required for two-sample tests.
    #[arg(long)]
    labels: Option<PathBuf>,

    /// Take log2 of every cell before testing.
    #[arg(long)]
    log2: bool,
}

#[derive(Args)]
struct TestCmd {
    #[command(flatten)]
    input: MatrixInput,

    #[arg(long, value_enum)]
    test: TestArg,

    /// Target FDR.
    #[arg(long, default_value_t = 0.1)]
    q: f64,

    #[command(flatten)]
    flags: TestFlags,

    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateCmd {
    /// Scenario file in key = value form; other scenario flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_enum)]
    model: Option<ModelArg>,

    /// Arrays per replicate (models m1-m3).
    #[arg(long)]
    n: Option<usize>,

    /// Group sizes (model m4).
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,

    /// Genes per replicate.
    #[arg(long)]
    p: Option<usize>,

    /// Window length and step for models m2 and m3.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,

    #[arg(long)]
    n_effect_genes: Option<usize>,

    #[arg(long)]
    noise_epsilon: Option<f64>,

    #[arg(long, value_enum)]
    noise_shape: Option<NoiseShapeArg>,

    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated tests to run on each replicate.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    tests: Vec<TestArg>,

    /// Target FDR.
    #[arg(long, default_value_t = 0.2)]
    q: f64,

    #[arg(long, default_value_t = 100)]
    replicates: usize,

    /// Leave replicates without rejections out of the mean empirical FDR.
    #[arg(long)]
    skip_zero_rejections: bool,

    #[command(flatten)]
    flags: TestFlags,

    /// Write the effective scenario in config form to this file.
    #[arg(long)]
    save_config: Option<PathBuf>,

    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcordanceCmd {
    #[command(flatten)]
    input: MatrixInput,

    /// Comma-separated tests, at least two.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    tests: Vec<TestArg>,

    #[command(flatten)]
    flags: TestFlags,

    /// Per-gene p-value table.
    #[arg(long)]
    pvalues: Option<PathBuf>,

    /// Pairwise Kendall tau table (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<marginal_core::Error> for Failure {
    fn from(e: marginal_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn io_failure(path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::Data(format!("{}: {e}", p.display())),
        None => Failure::Data(format!("stdout: {e}")),
    }
}

fn with_output(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CmdResult {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(|e| io_failure(Some(p), e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_failure(path, e))
}

fn load_design(
    input: &MatrixInput,
    tests: &[TestId],
) -> Result<(marginal_core::DataMatrix, Design), Failure> {
    let two_sample = tests.iter().filter(|t| t.is_two_sample()).count();
    if two_sample != 0 && two_sample != tests.len() {
        return Err(Failure::Usage(
            "one-sample and two-sample tests cannot be mixed".into(),
        ));
    }
    let two_sample = two_sample > 0;
    match (&input.labels, two_sample) {
        (Some(_), false) => return Err(Failure::Usage(
            "--labels is only accepted for two-sample tests (mean2, median2, wilcoxon, ks, cvm)"
                .into(),
        )),
        (None, true) => return Err(Failure::Usage("two-sample tests need --labels".into())),
        _ => {}
    }
    let mut matrix = read_matrix_path(&input.matrix)?;
    if input.log2 {
        matrix.log2_transform()?;
    }
    let design = match &input.labels {
        Some(path) => {
            let (g1, g2) = read_labels_path(path)?
                .split(&matrix)
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            Design::two_sample(g1, g2)
        }
        None => Design::OneSample,
    };
    Ok((matrix, design))
}

fn cmd_test(cmd: TestCmd) -> CmdResult {
    let test = TestId::from(cmd.test);
    let (matrix, design) = load_design(&cmd.input, &[test])?;
    let results = run_tests(&matrix, &design, test, &cmd.flags.options())?;
    let selection = bh_select_results(&results, cmd.q)?;
    let degenerate = results.iter().filter(|r| !r.is_ok()).count();
    with_output(cmd.out.as_deref(), |out| {
        write_results(
            out,
            &matrix.gene_ids(),
            &results,
            &selection.rejection_mask(),
        )
    })?;
    eprintln!(
        "{test}: {} of {} genes rejected at q = {} ({degenerate} degenerate)",
        selection.g_tilde,
        matrix.genes(),
        cmd.q
    );
    Ok(())
}

fn scenario_from(cmd: &SimulateCmd) -> Result<SimScenario, Failure> {
    let mut s = match &cmd.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(Some(path), e))?;
            text.parse::<SimScenario>()
                .map_err(|e| Failure::Data(e.with_path(path).to_string()))?
        }
        None => {
            let model = match cmd.model {
                Some(m) => model_of(m),
                None => return Err(Failure::Usage("give --config or --model".into())),
            };
            let p = cmd
                .p
                .ok_or_else(|| Failure::Usage("--p is required without --config".into()))?;
            match (cmd.n, cmd.n1, cmd.n2) {
                (Some(n), None, None) if !model.is_two_sample() => {
                    SimScenario::one_sample(model, n, p, 0)
                }
                (None, Some(n1), Some(n2)) if model.is_two_sample() => {
                    SimScenario::two_sample(n1, n2, p, 0)
                }
                _ => {
                    return Err(Failure::Usage(
                        "models m1-m3 take --n; model m4 takes --n1 and --n2".into(),
                    ))
                }
            }
        }
    };
    if cmd.config.is_some()
        && (cmd.model.is_some()
            || cmd.n.is_some()
            || cmd.n1.is_some()
            || cmd.n2.is_some()
            || cmd.p.is_some())
    {
        return Err(Failure::Usage(
            "--model, --n, --n1, --n2 and --p cannot be combined with --config".into(),
        ));
    }
    if let Some(k) = cmd.k {
        s.k = k;
    }
    if let Some(m) = cmd.m {
        s.m = m;
    }
    if let Some(g) = cmd.n_effect_genes {
        s.n_effect_genes = g;
    }
    if let Some(seed) = cmd.seed {
        s.seed = seed;
    }
    match (cmd.noise_epsilon, cmd.noise_shape) {
        (Some(epsilon), shape) => {
            let shape = match shape {
                Some(NoiseShapeArg::ConstantPerArray) => NoiseShape::ConstantPerArray,
                Some(NoiseShapeArg::UniformPm) => NoiseShape::UniformPm,
                None => s.noise.map(|n| n.shape).unwrap_or_default(),
            };
            s.noise = Some(NoiseSpec { epsilon, shape });
        }
        (None, Some(_)) => {
            return Err(Failure::Usage("--noise-shape needs --noise-epsilon".into()))
        }
        (None, None) => {}
    }
    s.validate()?;
    Ok(s)
}

fn model_of(m: ModelArg) -> Model {
    match m {
        ModelArg::M1 => Model::M1,
        ModelArg::M2 => Model::M2,
        ModelArg::M3 => Model::M3,
        ModelArg::M4 => Model::M4,
    }
}

fn cmd_simulate(cmd: SimulateCmd) -> CmdResult {
    let scenario = scenario_from(&cmd)?;
    let tests: Vec<TestId> = cmd.tests.iter().copied().map(TestId::from).collect();
    if let Some(bad) = tests
        .iter()
        .find(|t| t.is_two_sample() != scenario.model.is_two_sample())
    {
        return Err(Failure::Usage(format!(
            "test `{bad}` does not fit model {}",
            scenario.model
        )));
    }
    if let Some(path) = &cmd.save_config {
        std::fs::write(path, scenario.to_string()).map_err(|e| io_failure(Some(path), e))?;
    }
    let config = StudyConfig {
        tests,
        q: cmd.q,
        replicates: cmd.replicates,
        options: cmd.flags.options(),
        zero_rejections: if cmd.skip_zero_rejections {
            ZeroRejectionPolicy::Skip
        } else {
            ZeroRejectionPolicy::CountAsZero
        },
    };
    let summary = run_study(&scenario, &config)?;
    with_output(cmd.out.as_deref(), |out| summary.write_tsv(out))
}

fn cmd_concordance(cmd: ConcordanceCmd) -> CmdResult {
    if cmd.tests.len() < 2 {
        return Err(Failure::Usage(
            "concordance needs at least two tests".into(),
        ));
    }
    let tests: Vec<TestId> = cmd.tests.iter().copied().map(TestId::from).collect();
    let (matrix, design) = load_design(&cmd.input, &tests)?;
    let opts = cmd.flags.options();
    let columns = tests
        .iter()
        .map(|&t| run_tests(&matrix, &design, t, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(path) = &cmd.pvalues {
        let names: Vec<&str> = tests.iter().map(|t| t.as_str()).collect();
        with_output(Some(path), |out| {
            write_pvalue_table(out, &matrix.gene_ids(), &names, &columns)
        })?;
    }
    with_output(cmd.out.as_deref(), |out| {
        writeln!(out, "test_a\ttest_b\tgenes\ttau")?;
        for a in 0..tests.len() {
            for b in a + 1..tests.len() {
                let (pa, pb): (Vec<f64>, Vec<f64>) = columns[a]
                    .iter()
                    .zip(&columns[b])
                    .filter_map(|(x, y)| Some((x.p()?, y.p()?)))
                    .unzip();
                let tau =
                    kendall_tau(&pa, &pb).map_or_else(|_| "NA".to_string(), |t| format!("{t:.6}"));
                writeln!(out, "{}\t{}\t{}\t{tau}", tests[a], tests[b], pa.len())?;
            }
        }
        Ok(())
    })?;
    for (t, col) in tests.iter().zip(&columns) {
        let mut ps: Vec<f64> = col.iter().filter_map(|r| r.p()).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        eprintln!(
            "{t}: {} distinct p-values over {} genes",
            ps.len(),
            col.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Test(cmd) => cmd_test(cmd),
        Command::Simulate(cmd) => cmd_simulate(cmd),
        Command::Concordance(cmd) => cmd_concordance(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
