use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jointdep::causal::{enumerate_dags, parse_candidates, select_dag, SemTestOptions, SplineConfig};
use jointdep::inference::{bootstrap_joint_test, choose_c_data_driven, energy_normality_test, c_from_pvalue};
use jointdep::metrics::{
    centered_matrices, dcov_sq_high_order, distance_cumulant, jdcov_sq, jdcov_sq_rank, jdcov_sq_scaled, t_mt,
};
use jointdep::simulate::{run_experiment, ExperimentConfig};
use jointdep::{
    rng, BootstrapConfig, CenteredMatrix, Dataset, Estimator, GroupSpec, NormalityTestConfig, PValueRule, Statistic,
};

mod json;

use json::{nums, Num, SCHEMA};

#[derive(Parser)]
#[command(name = "jointdep", version, about = "Joint distance covariance tests and additive SEM diagnostics")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Debug logging on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a dependence metric.
    Compute(ComputeArgs),
    /// Bootstrap test of mutual independence of the groups.
    Test(TestArgs),
    /// Rank candidate DAGs by residual-bootstrap p-value.
    DagSelect(DagArgs),
    /// Run a Monte Carlo experiment from a TOML config.
    Simulate(SimulateArgs),
    /// Energy test of joint normality of all columns.
    Normality(NormalityArgs),
}

#[derive(Clone, Copy, Debug)]
enum CArg {
    Auto,
    Value(f64),
}

fn parse_c(s: &str) -> Result<CArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(CArg::Auto);
    }
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is neither a number nor 'auto'"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("c must be nonnegative, got {s}"));
    }
    Ok(CArg::Value(v))
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("alpha must lie in (0,1), got {s}"));
    }
    Ok(v)
}

fn parse_groups(s: &str) -> Result<GroupSpec, String> {
    s.parse::<GroupSpec>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Metric {
    Dcov,
    Jdcov,
    JdcovS,
    JdcovR,
    Cumulant,
    Tmt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TestStatistic {
    Jdcov,
    JdcovS,
    JdcovR,
    Dcov,
    Tmt,
}

impl TestStatistic {
    fn name(self) -> &'static str {
        match self {
            Self::Jdcov => "jdcov",
            Self::JdcovS => "jdcov-s",
            Self::JdcovR => "jdcov-r",
            Self::Dcov => "dcov",
            Self::Tmt => "tmt",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    U,
    V,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::U => Estimator::U,
            EstimatorArg::V => Estimator::V,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Strict,
    AddOne,
}

impl From<RuleArg> for PValueRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Strict => PValueRule::Strict,
            RuleArg::AddOne => PValueRule::AddOne,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    csv: PathBuf,
    /// Group spec such as `x:1-2,y:3,z:4-6` (1-based columns). Default: one group per column.
    #[arg(long, value_parser = parse_groups)]
    groups: Option<GroupSpec>,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        Dataset::load_csv(&self.csv, self.groups.clone()).with_context(|| format!("loading {}", self.csv.display()))
    }
}

#[derive(Args)]
struct SeedArgs {
    /// RNG seed; falls back to JOINTDEP_SEED, then 0.
    #[arg(long, env = "JOINTDEP_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NormalityOpts {
    /// Parametric bootstrap size of the normality test behind `--c auto`.
    #[arg(long, default_value_t = NormalityTestConfig::default().b_param)]
    normality_b: usize,
    /// Monte Carlo draws for expected distances to the normal law.
    #[arg(long, default_value_t = NormalityTestConfig::default().mc_draws)]
    mc_draws: usize,
}

impl NormalityOpts {
    fn config(&self, seed: u64) -> NormalityTestConfig {
        NormalityTestConfig {
            b_param: self.normality_b,
            mc_draws: self.mc_draws,
            seed,
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "jdcov")]
    metric: Metric,
    /// Weight `c ≥ 0`, or `auto` to choose it from a normality test.
    #[arg(long, default_value = "1", value_parser = parse_c, allow_hyphen_values = true)]
    c: CArg,
    #[arg(long, value_enum, default_value = "u")]
    estimator: EstimatorArg,
    /// Level used by `--c auto`.
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    alpha: f64,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    normality: NormalityOpts,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "jdcov")]
    statistic: TestStatistic,
    /// Weight `c ≥ 0`, or `auto` to choose it from a normality test.
    #[arg(long, default_value = "1", value_parser = parse_c, allow_hyphen_values = true)]
    c: CArg,
    #[arg(long, value_enum, default_value = "u")]
    estimator: EstimatorArg,
    /// Bootstrap replicates.
    #[arg(long = "B", visible_alias = "b", default_value_t = BootstrapConfig::DEFAULT_B)]
    b: usize,
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "strict")]
    p_value_rule: RuleArg,
    /// Include every bootstrap replicate in the output.
    #[arg(long)]
    replicates: bool,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    normality: NormalityOpts,
}

#[derive(Args)]
struct DagArgs {
    #[command(flatten)]
    data: DataArgs,
    /// File with one candidate per line, e.g. `b<-a;c<-a,b`.
    #[arg(long, conflicts_with = "enumerate", required_unless_present = "enumerate")]
    candidates: Option<PathBuf>,
    /// Test every labeled DAG on the groups (at most 4).
    #[arg(long)]
    enumerate: bool,
    #[arg(long, value_enum, default_value = "jdcov")]
    statistic: TestStatistic,
    #[arg(long, default_value = "1", value_parser = parse_c, allow_hyphen_values = true)]
    c: CArg,
    #[arg(long, value_enum, default_value = "u")]
    estimator: EstimatorArg,
    #[arg(long = "B", visible_alias = "b", default_value_t = BootstrapConfig::DEFAULT_B)]
    b: usize,
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "strict")]
    p_value_rule: RuleArg,
    /// Skip the refit step and bootstrap the fitted residuals directly (diagnostic only).
    #[arg(long)]
    no_refit: bool,
    /// Center each variable and scale it to norm √n before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = SplineConfig::default().degree)]
    degree: usize,
    #[arg(long, default_value_t = SplineConfig::default().interior_knots)]
    knots: usize,
    #[arg(long, default_value_t = SplineConfig::default().ridge)]
    ridge: f64,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides the config's seed; falls back to JOINTDEP_SEED.
    #[arg(long, env = "JOINTDEP_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct NormalityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    alpha: f64,
    #[command(flatten)]
    normality: NormalityOpts,
    #[command(flatten)]
    seed: SeedArgs,
}

/// Seed of the normality test run on behalf of `--c auto`.
fn normality_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, &[u64::MAX - 1])
}

struct ResolvedC {
    c: f64,
    auto: bool,
}

fn resolve_c(arg: CArg, ds: &Dataset, alpha: f64, seed: u64, opts: &NormalityOpts) -> anyhow::Result<ResolvedC> {
    Ok(match arg {
        CArg::Value(c) => ResolvedC { c, auto: false },
        CArg::Auto => {
            let c = choose_c_data_driven(ds, alpha, &opts.config(normality_seed(seed)))?;
            log::info!("data-driven c = {c}");
            ResolvedC { c, auto: true }
        }
    })
}

fn announce_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

#[derive(Serialize)]
struct ComputeOut {
    schema: u32,
    command: &'static str,
    metric: String,
    value: Num,
    c: Option<Num>,
    c_auto: bool,
    estimator: Estimator,
    n: usize,
    d: usize,
    seed: u64,
}

fn cmd_compute(a: &ComputeArgs) -> anyhow::Result<()> {
    let ds = a.data.load()?;
    ds.validate_joint()?;
    announce_seed(a.seed.seed);
    let est: Estimator = a.estimator.into();
    let uses_c = matches!(a.metric, Metric::Jdcov | Metric::JdcovS | Metric::JdcovR);
    let c = if uses_c {
        Some(resolve_c(a.c, &ds, a.alpha, a.seed.seed, &a.normality)?)
    } else {
        None
    };
    let cval = c.as_ref().map_or(0.0, |r| r.c);
    let est_for = |m: Metric| if matches!(m, Metric::Cumulant) { Estimator::V } else { est };
    let mats: Vec<CenteredMatrix> = match a.metric {
        Metric::JdcovR | Metric::Tmt => Vec::new(),
        m => centered_matrices(&ds, est_for(m))?,
    };
    let refs: Vec<&CenteredMatrix> = mats.iter().collect();
    let (name, value) = match a.metric {
        Metric::Dcov => (format!("dcov{}", ds.d()), dcov_sq_high_order(&refs, est)?),
        Metric::Jdcov => ("jdcov".into(), jdcov_sq(&refs, cval, est)?),
        Metric::JdcovS => ("jdcov-s".into(), jdcov_sq_scaled(&refs, cval, est)?),
        Metric::JdcovR => ("jdcov-r".into(), jdcov_sq_rank(&ds, cval, est)?),
        Metric::Cumulant => ("cumulant".into(), distance_cumulant(&refs)?),
        Metric::Tmt => ("tmt".into(), t_mt(&ds, est)?),
    };
    json::print(&ComputeOut {
        schema: SCHEMA,
        command: "compute",
        metric: name,
        value: Num(value.value),
        c: c.as_ref().map(|r| Num(r.c)),
        c_auto: c.as_ref().is_some_and(|r| r.auto),
        estimator: value.estimator,
        n: ds.n(),
        d: ds.d(),
        seed: a.seed.seed,
    })
}

#[derive(Serialize)]
struct TestOut {
    schema: u32,
    command: &'static str,
    statistic: String,
    c: Option<Num>,
    c_auto: bool,
    estimator: Estimator,
    n: usize,
    d: usize,
    #[serde(rename = "B")]
    b: usize,
    seed: u64,
    alpha: Num,
    p_value_rule: PValueRule,
    statistic_value: Num,
    p_value: Num,
    threshold: Num,
    reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<Vec<Num>>,
}

fn uses_c(stat: TestStatistic) -> bool {
    matches!(stat, TestStatistic::Jdcov | TestStatistic::JdcovS | TestStatistic::JdcovR)
}

fn cmd_test(a: &TestArgs) -> anyhow::Result<()> {
    let ds = a.data.load()?;
    ds.validate_joint()?;
    let seed = a.seed.seed;
    announce_seed(seed);
    let c = if uses_c(a.statistic) {
        Some(resolve_c(a.c, &ds, a.alpha, seed, &a.normality)?)
    } else {
        None
    };
    let stat = Statistic::from_name(a.statistic.name(), c.as_ref().map_or(1.0, |r| r.c), a.estimator.into())?;
    let cfg = BootstrapConfig::new(stat, a.b, seed, a.alpha)?.with_rule(a.p_value_rule.into());
    let r = bootstrap_joint_test(&ds, &cfg)?;
    json::print(&TestOut {
        schema: SCHEMA,
        command: "test",
        statistic: stat.label(),
        c: c.as_ref().map(|r| Num(r.c)),
        c_auto: c.as_ref().is_some_and(|r| r.auto),
        estimator: stat.estimator(),
        n: ds.n(),
        d: ds.d(),
        b: r.b,
        seed,
        alpha: Num(r.alpha),
        p_value_rule: cfg.p_value_rule,
        statistic_value: Num(r.statistic),
        p_value: Num(r.p_value),
        threshold: Num(r.threshold),
        reject: r.reject,
        replicates: a.replicates.then(|| nums(&r.replicates)),
    })
}

#[derive(Serialize)]
struct DagRow {
    rank: usize,
    candidate: usize,
    model: String,
    edges: usize,
    statistic: Num,
    p_value: Num,
}

#[derive(Serialize)]
struct SplineOut {
    degree: usize,
    interior_knots: usize,
    ridge: Num,
}

#[derive(Serialize)]
struct DagOut {
    schema: u32,
    command: &'static str,
    statistic: String,
    #[serde(rename = "B")]
    b: usize,
    seed: u64,
    alpha: Num,
    p_value_rule: PValueRule,
    no_refit: bool,
    standardize: bool,
    spline: SplineOut,
    candidates: usize,
    models: Vec<DagRow>,
}

fn cmd_dag_select(a: &DagArgs) -> anyhow::Result<()> {
    let ds = a.data.load()?;
    ds.validate_joint()?;
    let seed = a.seed.seed;
    announce_seed(seed);
    let names: Vec<String> = ds.groups().groups().iter().map(|g| g.name.clone()).collect();
    let candidates = if a.enumerate {
        enumerate_dags(ds.d())?
    } else {
        let path = a.candidates.as_deref().expect("clap requires one of the two");
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_candidates(&text, &names)?
    };
    let c = match a.c {
        CArg::Value(c) => c,
        CArg::Auto => bail!("--c auto is not supported for dag-select; pass a number"),
    };
    let stat = Statistic::from_name(a.statistic.name(), c, a.estimator.into())?;
    let boot = BootstrapConfig::new(stat, a.b, seed, a.alpha)?.with_rule(a.p_value_rule.into());
    let scfg = SplineConfig {
        degree: a.degree,
        interior_knots: a.knots,
        ridge: a.ridge,
    };
    let opts = SemTestOptions {
        refit: !a.no_refit,
        standardize: a.standardize,
    };
    let ranked = select_dag(&ds, &candidates, &boot, &scfg, &opts)?;
    let models = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| DagRow {
            rank: i + 1,
            candidate: r.candidate,
            model: r.model.format_with(&names),
            edges: r.edges,
            statistic: Num(r.statistic),
            p_value: Num(r.p_value),
        })
        .collect();
    json::print(&DagOut {
        schema: SCHEMA,
        command: "dag-select",
        statistic: stat.label(),
        b: a.b,
        seed,
        alpha: Num(a.alpha),
        p_value_rule: boot.p_value_rule,
        no_refit: a.no_refit,
        standardize: a.standardize,
        spline: SplineOut {
            degree: scfg.degree,
            interior_knots: scfg.interior_knots,
            ridge: Num(scfg.ridge),
        },
        candidates: candidates.len(),
        models,
    })
}

#[derive(Serialize)]
struct SimRow {
    generator: String,
    example: String,
    variant: usize,
    n: usize,
    test: String,
    level: Num,
    rejections: usize,
    proportion: Num,
}

#[derive(Serialize)]
struct SimOut {
    schema: u32,
    command: &'static str,
    config: String,
    seed: u64,
    reps: usize,
    bootstrap: usize,
    rows: Vec<SimRow>,
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    announce_seed(cfg.seed);
    let report = run_experiment(&cfg)?;
    eprintln!("elapsed: {:.1}s", report.elapsed.as_secs_f64());
    if let Some(path) = &a.csv {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.write_csv(file)?;
    }
    let config = Path::new(&a.config)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    json::print(&SimOut {
        schema: SCHEMA,
        command: "simulate",
        config,
        seed: report.seed,
        reps: report.reps,
        bootstrap: report.bootstrap,
        rows: report
            .rows
            .iter()
            .map(|r| SimRow {
                generator: r.generator.clone(),
                example: r.example.clone(),
                variant: r.variant,
                n: r.n,
                test: r.test.clone(),
                level: Num(r.level),
                rejections: r.rejections,
                proportion: Num(r.proportion),
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct NormalityOut {
    schema: u32,
    command: &'static str,
    n: usize,
    p: usize,
    #[serde(rename = "B")]
    b: usize,
    mc_draws: usize,
    seed: u64,
    statistic: Num,
    p_value: Num,
    alpha: Num,
    /// The `c` this p-value maps to.
    c: Num,
}

fn cmd_normality(a: &NormalityArgs) -> anyhow::Result<()> {
    let ds = a.data.load()?;
    let seed = a.seed.seed;
    announce_seed(seed);
    let ncfg = a.normality.config(seed);
    let r = energy_normality_test(ds.values(), ds.n(), ds.p(), &ncfg)?;
    json::print(&NormalityOut {
        schema: SCHEMA,
        command: "normality",
        n: ds.n(),
        p: ds.p(),
        b: ncfg.b_param,
        mc_draws: ncfg.mc_draws,
        seed,
        statistic: Num(r.statistic),
        p_value: Num(r.p_value),
        alpha: Num(a.alpha),
        c: Num(c_from_pvalue(r.p_value, a.alpha)),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Compute(a) => cmd_compute(a),
        Command::Test(a) => cmd_test(a),
        Command::DagSelect(a) => cmd_dag_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Normality(a) => cmd_normality(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
