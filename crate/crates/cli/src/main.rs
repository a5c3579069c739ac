use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abcgof::gof::{gfit_post, Replicates};
use abcgof::harness::{emit_pvalue_histogram, run_calibration, run_power, PowerStudyConfig};
use abcgof::pca::{envelope, pca_fit};
use abcgof::ppc::{histograms_to_tsv, ppc_histogram_data, ppc_report};
use abcgof::sim::{simulate_table, ModelKind, ModelSpec, StatSet};
use abcgof::{fit_scaling, gfit, load_observed, load_reference_table, Error, ReferenceTable, Seed, StatisticKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "abcgof", version, about = "Goodness-of-fit tests for approximate Bayesian computation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a reference table from a built-in model.
    Simulate(SimulateArgs),
    /// D_prior test of an observed dataset against a reference table.
    Gfit(GfitArgs),
    /// D_post test using a built-in simulator for posterior replicates.
    GfitPost(PostArgs),
    /// Per-statistic posterior predictive checks.
    Ppc(PpcArgs),
    /// PCA projection of the table with a coverage envelope.
    Gfitpca(PcaArgs),
    /// Type I error and power studies.
    Study {
        #[command(subcommand)]
        kind: StudyCommand,
    },
}

#[derive(Subcommand, Debug)]
enum StudyCommand {
    /// Datasets drawn from the null model itself.
    Calibrate(StudyArgs),
    /// Datasets drawn from a different truth model.
    Power(StudyArgs),
}

/// Flags shared by every subcommand; neither enters the manifest.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "ABCGOF_THREADS")]
    threads: Option<usize>,
    /// Directory receiving the output files and manifest.json; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    /// toy-gaussian, toy-laplace, constant, bottleneck or expansion.
    #[arg(long)]
    model: ModelKind,
    /// Statistic set of the coalescent models: pi-tajima or sfs.
    #[arg(long, default_value = "pi-tajima")]
    stats: StatSet,
    /// Sample size of the toy models.
    #[arg(long, default_value_t = 50)]
    sample_size: usize,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        spec_of(self.model, self.stats, self.sample_size)
    }
}

fn spec_of(kind: ModelKind, stats: StatSet, sample_size: usize) -> ModelSpec {
    ModelSpec {
        kind,
        sample_size,
        stats,
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of simulations.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Reference table (TSV with param_ and stat_ columns).
    #[arg(long)]
    table: PathBuf,
    /// Observed statistics (TSV, one row).
    #[arg(long)]
    observed: PathBuf,
    /// Acceptance rate of the rejection step.
    #[arg(long, default_value_t = 0.01)]
    rate: f64,
}

#[derive(Args, Debug, Serialize)]
struct GfitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Pseudo-observed datasets in the null distribution.
    #[arg(long = "M", default_value_t = 1000)]
    #[serde(rename = "M")]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct PostArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "M", default_value_t = 200)]
    #[serde(rename = "M")]
    m: usize,
    /// Posterior replicates per dataset.
    #[arg(long, default_value_t = 100)]
    n_prime: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct PpcArgs {
    #[command(flatten)]
    post: PostArgs,
    /// Histogram bins per statistic.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Args, Debug, Serialize)]
struct PcaArgs {
    /// Reference table (TSV with param_ and stat_ columns).
    #[arg(long)]
    table: PathBuf,
    /// Observed statistics (TSV, one row).
    #[arg(long)]
    observed: PathBuf,
    /// Fraction of simulations inside the envelope.
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StatArg {
    Prior,
    Post,
}

#[derive(Args, Debug, Serialize)]
struct StudyArgs {
    /// Model the reference table is simulated from.
    #[arg(long)]
    null: ModelKind,
    /// Model the datasets are drawn from; defaults to the null model.
    #[arg(long)]
    truth: Option<ModelKind>,
    #[arg(long, default_value = "pi-tajima")]
    stats: StatSet,
    #[arg(long, default_value_t = 50)]
    sample_size: usize,
    #[arg(long, value_enum, default_value_t = StatArg::Prior)]
    stat: StatArg,
    /// Simulations in the reference table.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    rate: f64,
    /// Null distribution size; 1000 for prior and 200 for post by default.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    m: Option<usize>,
    #[arg(long, default_value_t = 100)]
    n_prime: usize,
    /// Datasets evaluated.
    #[arg(long, default_value_t = 500)]
    datasets: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// P-value histogram bins.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    seed: u64,
    flags: &'a T,
    input_sha256: BTreeMap<String, String>,
}

/// Named output files; the first one goes to stdout when `--out` is absent.
type Outputs = Vec<(&'static str, String)>;

fn digest(path: &Path) -> Result<String, Error> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn emit<T: Serialize>(
    name: &str,
    flags: &T,
    seed: u64,
    inputs: &[&Path],
    common: &Common,
    outputs: Outputs,
) -> Result<(), Error> {
    let Some(dir) = &common.out else {
        print!("{}", outputs[0].1);
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    for (file, content) in &outputs {
        fs::write(dir.join(file), content)?;
    }
    let input_sha256 = inputs
        .iter()
        .map(|p| Ok((p.display().to_string(), digest(p)?)))
        .collect::<Result<_, Error>>()?;
    let manifest = Manifest {
        subcommand: name,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        flags,
        input_sha256,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest is always serializable");
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn replicates_tsv(names: &[String], reps: &Replicates) -> String {
    let mut out = names.iter().map(|n| format!("stat_{n}")).collect::<Vec<_>>().join("\t");
    out.push('\n');
    for r in reps {
        let row: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join("\t")).expect("writing to a String cannot fail");
    }
    out
}

fn load(table: &Path, observed: &Path) -> Result<(ReferenceTable, abcgof::ObservedStats), Error> {
    let t = load_reference_table(table)?;
    let o = load_observed(observed, &t)?;
    Ok((t, o))
}

fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let sim = args.model.spec().build()?;
    let table = simulate_table(sim.as_ref(), args.n, Seed(args.seed))?;
    emit("simulate", args, args.seed, &[], &args.common, vec![("table.tsv", table.to_tsv())])
}

fn run_gfit(args: &GfitArgs) -> Result<(), Error> {
    let (table, observed) = load(&args.input.table, &args.input.observed)?;
    let result = gfit(&table, &observed, args.input.rate, args.m, Seed(args.seed))?;
    let inputs = [args.input.table.as_path(), args.input.observed.as_path()];
    emit("gfit", args, args.seed, &inputs, &args.common, vec![("gfit.json", with_newline(result.to_json()))])
}

fn post_fit(args: &PostArgs) -> Result<(ReferenceTable, abcgof::ObservedStats, abcgof::gof::PostFit), Error> {
    let (table, observed) = load(&args.input.table, &args.input.observed)?;
    let sim = args.model.spec().build()?;
    let fit = gfit_post(&table, &observed, args.input.rate, sim.as_ref(), args.n_prime, args.m, Seed(args.seed))?;
    Ok((table, observed, fit))
}

fn run_gfit_post(args: &PostArgs) -> Result<(), Error> {
    let (table, _, fit) = post_fit(args)?;
    let inputs = [args.input.table.as_path(), args.input.observed.as_path()];
    emit(
        "gfit-post",
        args,
        args.seed,
        &inputs,
        &args.common,
        vec![
            ("gfit_post.json", with_newline(fit.result.to_json())),
            ("replicates.tsv", replicates_tsv(table.stat_names(), &fit.replicates)),
        ],
    )
}

fn run_ppc(args: &PpcArgs) -> Result<(), Error> {
    let (_, observed, fit) = post_fit(&args.post)?;
    let report = ppc_report(&fit.replicates, &observed)?;
    let hist = ppc_histogram_data(&fit.replicates, &observed, args.bins)?;
    let inputs = [args.post.input.table.as_path(), args.post.input.observed.as_path()];
    emit(
        "ppc",
        args,
        args.post.seed,
        &inputs,
        &args.post.common,
        vec![
            ("ppc.json", with_newline(report.to_json())),
            ("ppc_histograms.tsv", histograms_to_tsv(&hist)),
        ],
    )
}

#[derive(Serialize)]
struct PcaSummary {
    observed_score: [f64; 2],
    explained_fraction: [f64; 2],
    coverage: f64,
    kept: usize,
    contains_observed: bool,
}

fn run_pca(args: &PcaArgs) -> Result<(), Error> {
    let (table, observed) = load(&args.table, &args.observed)?;
    let scaling = fit_scaling(&table)?;
    let pca = pca_fit(&table, &scaling, &observed)?;
    let obs = pca.observed_score.expect("pca_fit projects the observed point");
    let env = envelope(&pca.scores, obs, args.coverage)?;
    let summary = PcaSummary {
        observed_score: obs,
        explained_fraction: pca.explained_fraction,
        coverage: env.coverage,
        kept: env.kept,
        contains_observed: env.contains_observed,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary is always serializable");
    let inputs = [args.table.as_path(), args.observed.as_path()];
    emit(
        "gfitpca",
        args,
        0,
        &inputs,
        &args.common,
        vec![
            ("pca.json", with_newline(json)),
            ("pca_scores.tsv", pca.scores_tsv()),
            ("envelope.tsv", env.polygon_tsv()),
        ],
    )
}

fn run_study(args: &StudyArgs, power: bool) -> Result<(), Error> {
    let statistic = match args.stat {
        StatArg::Prior => StatisticKind::Prior,
        StatArg::Post => StatisticKind::Post,
    };
    let null = spec_of(args.null, args.stats, args.sample_size);
    let truth = spec_of(args.truth.unwrap_or(args.null), args.stats, args.sample_size);
    let config = PowerStudyConfig {
        n_sims: args.n,
        acceptance_rate: args.rate,
        m: args.m.unwrap_or(match statistic {
            StatisticKind::Prior => 1000,
            StatisticKind::Post => 200,
        }),
        n_prime: args.n_prime,
        n_datasets: args.datasets,
        alpha: args.alpha,
        ..PowerStudyConfig::new(null, truth, statistic, Seed(args.seed))
    };
    let result = if power { run_power(&config)? } else { run_calibration(&config)? };
    let name = if power { "study power" } else { "study calibrate" };
    emit(
        name,
        args,
        args.seed,
        &[],
        &args.common,
        vec![
            ("study.json", with_newline(result.to_json())),
            ("pvalue_histogram.tsv", emit_pvalue_histogram(&result, args.bins)?),
        ],
    )
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Simulate(a) => &a.common,
        Command::Gfit(a) => &a.common,
        Command::GfitPost(a) => &a.common,
        Command::Ppc(a) => &a.post.common,
        Command::Gfitpca(a) => &a.common,
        Command::Study { kind: StudyCommand::Calibrate(a) | StudyCommand::Power(a) } => &a.common,
    }
}

fn dispatch(cmd: &Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Gfit(a) => run_gfit(a),
        Command::GfitPost(a) => run_gfit_post(a),
        Command::Ppc(a) => run_ppc(a),
        Command::Gfitpca(a) => run_pca(a),
        Command::Study { kind: StudyCommand::Calibrate(a) } => run_study(a, false),
        Command::Study { kind: StudyCommand::Power(a) } => run_study(a, true),
    }
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::Io(_) => "E_IO",
        Error::Parse { .. } | Error::InvalidTable(_) => "E_PARSE",
        Error::Simulation { .. } => "E_SIM",
        Error::InvalidArgument(_) => "E_ARG",
        _ => "E_DATA",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let threads = common(&cli.command).threads;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error[E_ARG]: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    if threads == Some(0) {
        eprintln!("error[E_ARG]: --threads must be at least 1");
        return ExitCode::from(1);
    }
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", error_code(&e));
            ExitCode::from(2)
        }
    }
}
