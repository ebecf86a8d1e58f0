use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dualtrack_core::components::{read_scenarios, RemoteLargeModel, Scenario, TabularSmallModel};
use dualtrack_core::config::RunConfig;
use dualtrack_core::math::{
    coherence_loss, connective_prior, curriculum_plan, prior_regularization_loss, read_samples,
    style_consistency_loss, total_loss, CurriculumOrder, DialogueSample, LossWeights, ModelRole,
    PairScoring, TabularOracle,
};
use dualtrack_core::metrics::{
    aggregate, latency_breakdown, plot_data, plot_reduction, render, render_stratified, stratify,
    LatencyBreakdown, ReportFormat,
};
use dualtrack_core::miner::{
    dataset_stats, mine, read_records, read_tagged, render_stats_row, split_dataset, write_records,
    Lexicons, MineOptions, MinerError,
};
use dualtrack_core::orchestrator::{
    run_batch, write_traces, BatchOptions, Clock, SessionTrace, StandardFactory, Strategy,
};

/// Dual-track streaming dialogue simulator and data tools.
#[derive(Parser)]
#[command(name = "dualtrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios under one or all strategies and write traces and reports.
    Simulate(SimulateArgs),
    /// Run all strategies and write a side-by-side latency table.
    Compare(CompareArgs),
    /// Extract connectives from a tagged corpus, optionally annotating the rest with a model.
    Mine(MineArgs),
    /// Connective statistics of a mined dataset.
    Stats(StatsArgs),
    /// Seeded train/validation/test split of a JSONL file.
    Split(SplitArgs),
    /// Per-sample training losses over tabular oracles, as CSV.
    Loss(LossArgs),
    /// Curriculum plan for a dataset, as JSON.
    Curriculum(CurriculumArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenarios: PathBuf,
    /// ssc, sdc, ddtsr or all.
    #[arg(long, default_value = "all")]
    strategy: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run on the wall clock; requires --llm-endpoint.
    #[arg(long)]
    realtime: bool,
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Sessions run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory with meta_verbs.txt, abstract_nouns.txt and concrete_entities.txt.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Calibration examples appended to the annotation prompt.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    max_tokens: usize,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Dataset label in the table.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "8,1,1")]
    ratios: String,
}

#[derive(Args)]
struct LossArgs {
    /// Trained small-model table.
    #[arg(long)]
    oracle: PathBuf,
    /// Pretrained small-model table.
    #[arg(long)]
    oracle_base: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// lambda_con,lambda_coh,lambda_prior.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, value_parser = parse_scoring, default_value = "connective_and_response")]
    scoring: PairScoring,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CurriculumArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    stages: Option<usize>,
    /// Comma-separated epochs per stage.
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_scoring(s: &str) -> Result<PairScoring, String> {
    match s {
        "connective_and_response" => Ok(PairScoring::ConnectiveAndResponse),
        "response_only" => Ok(PairScoring::ResponseOnly),
        _ => Err(format!("unknown scoring {s:?}")),
    }
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 2, err }
    }
}

fn invalid(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        err: err.into(),
    }
}

fn remote(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        err: err.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Mine(a) => mine_cmd(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Loss(a) => loss(a),
        Command::Curriculum(a) => curriculum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p)
            .with_context(|| format!("loading config {}", p.display()))
            .map_err(invalid),
        None => Ok(RunConfig::default()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(invalid)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn strategies(arg: &str) -> Result<Vec<Strategy>, Failure> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    arg.parse::<Strategy>()
        .map(|s| vec![s])
        .map_err(|e| invalid(anyhow!("--strategy: {e}")))
}

struct Batch {
    scenarios: Vec<Scenario>,
    factory: StandardFactory,
    cfg: RunConfig,
}

fn prepare(scenarios: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<Batch, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let scenarios = read_scenarios(open(scenarios)?)
        .with_context(|| format!("reading {}", scenarios.display()))
        .map_err(invalid)?;
    let mut factory = StandardFactory::new(cfg.policy.h_max);
    let shared: Option<TabularSmallModel> = match &cfg.paths.small_dataset {
        Some(p) => {
            let samples = read_samples(open(p)?)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(invalid)?;
            Some(
                TabularSmallModel::from_samples(&samples)
                    .ok_or_else(|| invalid(anyhow!("{} has no connectives", p.display())))?,
            )
        }
        None => StandardFactory::tabular_from_scenarios(&scenarios),
    };
    if let Some(m) = shared {
        factory = factory.with_small(Arc::new(m));
    }
    Ok(Batch {
        scenarios,
        factory,
        cfg,
    })
}

/// Runs every strategy and returns traces with the breakdowns of the sessions
/// that completed. Failed sessions are logged.
fn run_all(
    batch: &Batch,
    list: &[Strategy],
    clock: Clock,
    jobs: usize,
) -> (Vec<SessionTrace>, Vec<LatencyBreakdown>, Vec<String>) {
    let mut traces = Vec::new();
    for &strategy in list {
        let opts = BatchOptions {
            strategy,
            policy: batch.cfg.policy,
            timing: batch.cfg.timing(),
            seed: batch.cfg.seed,
            clock,
            jobs,
        };
        traces.extend(run_batch(&batch.scenarios, &batch.factory, &opts));
    }
    let mut breakdowns = Vec::new();
    let mut failures = Vec::new();
    for t in &traces {
        match latency_breakdown(t) {
            Ok(b) => breakdowns.push(b),
            Err(e) => {
                log::warn!("{} {}: {e}", t.strategy, t.session);
                failures.push(t.error().map(String::from).unwrap_or_else(|| e.to_string()));
            }
        }
    }
    (traces, breakdowns, failures)
}

fn session_failure(failures: &[String]) -> CmdResult {
    if failures.is_empty() {
        return Ok(());
    }
    let err = anyhow!(
        "{} session(s) failed; first: {}",
        failures.len(),
        failures[0]
    );
    if failures.iter().any(|f| f.starts_with("remote model")) {
        Err(remote(err))
    } else {
        Err(err.into())
    }
}

fn simulate(a: SimulateArgs) -> CmdResult {
    let list = strategies(&a.strategy)?;
    let clock = match (a.realtime, &a.llm_endpoint) {
        (true, None) => return Err(invalid(anyhow!("--realtime requires --llm-endpoint"))),
        (false, Some(_)) => return Err(invalid(anyhow!("--llm-endpoint requires --realtime"))),
        (true, Some(_)) => Clock::Realtime,
        (false, None) => Clock::Virtual,
    };
    let mut batch = prepare(&a.scenarios, a.config.as_deref(), a.seed)?;
    if let Some(url) = &a.llm_endpoint {
        let client = RemoteLargeModel::new(url.clone(), batch.cfg.llm.timeout_ms);
        batch.factory = batch.factory.with_remote(client);
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (traces, breakdowns, failures) = run_all(&batch, &list, clock, a.jobs);

    let mut w = create(&a.out.join("traces.jsonl"))?;
    write_traces(&mut w, &traces).context("writing traces")?;
    w.flush().context("flushing output")?;
    write_latencies(&a.out.join("latencies.csv"), &breakdowns)?;
    let report = aggregate(
        &breakdowns,
        &batch.cfg.report.dataset,
        &batch.cfg.report.model,
    );
    write_file(
        &a.out.join("report.md"),
        &render(&report, ReportFormat::Markdown),
    )?;
    write_file(
        &a.out.join("report.csv"),
        &render(&report, ReportFormat::Csv),
    )?;
    let strat = stratify(&breakdowns);
    write_file(&a.out.join("stratified.md"), &render_stratified(&strat))?;
    write_file(&a.out.join("plot.csv"), &plot_data(&strat))?;
    write_file(&a.out.join("plot_reduction.csv"), &plot_reduction(&strat))?;
    log::info!("{} sessions, {} failed", traces.len(), failures.len());
    session_failure(&failures)
}

fn write_latencies(path: &Path, rows: &[LatencyBreakdown]) -> anyhow::Result<()> {
    let mut out = String::from(
        "session,strategy,input_audio_ms,connective,perception_ms,reaction_ms,waiting_ms\n",
    );
    for b in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.session,
            b.strategy,
            b.input_audio_ms,
            b.connective_emitted,
            b.perception_ms,
            b.reaction_ms,
            b.waiting_ms
        ));
    }
    write_file(path, &out)
}

fn compare(a: CompareArgs) -> CmdResult {
    let batch = prepare(&a.scenarios, a.config.as_deref(), a.seed)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (_, breakdowns, failures) = run_all(&batch, &Strategy::ALL, Clock::Virtual, a.jobs);
    let report = aggregate(
        &breakdowns,
        &batch.cfg.report.dataset,
        &batch.cfg.report.model,
    );
    let table = render(&report, ReportFormat::Markdown);
    write_file(&a.out.join("compare.md"), &table)?;
    print!("{table}");
    session_failure(&failures)
}

fn mine_cmd(a: MineArgs) -> CmdResult {
    let turns = read_tagged(open(&a.input)?)
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(invalid)?;
    let lexicons = match &a.lexicons {
        Some(dir) => Lexicons::load_dir(dir).map_err(invalid)?,
        None => Lexicons::builtin(),
    };
    let calibration = match &a.calibration {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(invalid)?,
        ),
        None => None,
    };
    let progress = a.llm_endpoint.as_ref().map(|_| {
        let mut p = a.out.clone().into_os_string();
        p.push(".progress");
        PathBuf::from(p)
    });
    let opts = MineOptions {
        lexicons,
        max_tokens: a.max_tokens,
        remote: a
            .llm_endpoint
            .map(|u| RemoteLargeModel::new(u, a.timeout_ms)),
        calibration,
        concurrency: a.concurrency,
        progress,
    };
    let (records, report) = mine(&turns, &opts).map_err(|e| match e {
        MinerError::Remote(_) => remote(e),
        MinerError::Invalid(_) | MinerError::Parse { .. } => invalid(e),
        other => Failure::from(anyhow::Error::from(other)),
    })?;
    let mut w = create(&a.out)?;
    write_records(&mut w, &records).context("writing records")?;
    w.flush().context("flushing output")?;
    eprintln!(
        "{} records: {} extracted, {} generated, {} without connective, {} skipped",
        records.len(),
        report.extracted,
        report.generated,
        report.without_connective,
        report.skipped.len()
    );
    Ok(())
}

fn stats(a: StatsArgs) -> CmdResult {
    let records = read_records(open(&a.input)?)
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(invalid)?;
    let s = dataset_stats(&records);
    if a.json {
        println!(
            "{}",
            serde_json::to_string(&s).context("serializing stats")?
        );
    } else {
        let default_name = a
            .input
            .file_stem()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = a.name.unwrap_or(default_name);
        print!("{}", render_stats_row(&[(name.as_str(), &s)]));
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| invalid(anyhow!("{flag}: cannot parse {s:?}")))
}

fn split(a: SplitArgs) -> CmdResult {
    let parts: Vec<f64> = parse_list("--ratios", &a.ratios)?;
    let total: f64 = parts.iter().sum();
    if parts.len() != 3 || total.is_nan() || total <= 0.0 {
        return Err(invalid(anyhow!(
            "--ratios needs three non-negative parts, got {:?}",
            a.ratios
        )));
    }
    let ratios = [parts[0] / total, parts[1] / total, parts[2] / total];
    let text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))
        .map_err(invalid)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (train, val, test) = split_dataset(&lines, ratios, a.seed).map_err(invalid)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (name, part) in [("train", train), ("validation", val), ("test", test)] {
        let mut body = part.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        write_file(&a.out.join(format!("{name}.jsonl")), &body)?;
    }
    Ok(())
}

fn loss(a: LossArgs) -> CmdResult {
    let cfg = load_config(a.config.as_deref())?;
    let weights = match &a.weights {
        Some(w) => {
            let v: Vec<f64> = parse_list("--weights", w)?;
            if v.len() != 3 {
                return Err(invalid(anyhow!("--weights needs three values, got {w:?}")));
            }
            LossWeights::new(v[0], v[1], v[2]).map_err(invalid)?
        }
        None => cfg.loss,
    };
    let load = |role, p: &Path| {
        TabularOracle::load(role, p)
            .with_context(|| format!("loading {}", p.display()))
            .map_err(invalid)
    };
    let small = load(ModelRole::Small, &a.oracle)?;
    let base = load(ModelRole::SmallBase, &a.oracle_base)?;
    let samples = read_samples(open(&a.data)?)
        .with_context(|| format!("reading {}", a.data.display()))
        .map_err(invalid)?;
    let mut candidates: Vec<Vec<String>> = samples
        .iter()
        .filter(|s| !s.connective.is_empty())
        .map(|s| s.connective.clone())
        .collect();
    candidates.sort();
    candidates.dedup();

    let mut out = String::from("id,l_con,l_coh,l_prior,total\n");
    let mut sums = [0.0; 4];
    for s in &samples {
        let row = sample_losses(s, &small, &base, &candidates, a.scoring, &weights)
            .with_context(|| format!("sample {}", s.id))?;
        for (acc, v) in sums.iter_mut().zip(row) {
            *acc += v;
        }
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.id, row[0], row[1], row[2], row[3]
        ));
    }
    if !samples.is_empty() {
        let n = samples.len() as f64;
        out.push_str(&format!(
            "mean,{},{},{},{}\n",
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n
        ));
    }
    print!("{out}");
    Ok(())
}

fn sample_losses(
    s: &DialogueSample,
    small: &TabularOracle,
    base: &TabularOracle,
    candidates: &[Vec<String>],
    scoring: PairScoring,
    w: &LossWeights,
) -> anyhow::Result<[f64; 4]> {
    let l_con = style_consistency_loss(small, &s.user, &s.connective, &s.response)?;
    let small_response = s.small_response.as_ref().unwrap_or(&s.response);
    let l_coh = coherence_loss(
        small,
        base,
        &s.user,
        &s.connective,
        &s.response,
        small_response,
        scoring,
    )?;
    let l_prior = if candidates.len() > 1 {
        let p = connective_prior(small, &s.user, candidates)?;
        let q = connective_prior(base, &s.user, candidates)?;
        prior_regularization_loss(&p, &q)?
    } else {
        0.0
    };
    let total = total_loss(l_con, l_coh, l_prior, w)?;
    Ok([l_con, l_coh, l_prior, total])
}

fn curriculum(a: CurriculumArgs) -> CmdResult {
    let cfg = load_config(a.config.as_deref())?;
    let epochs: Vec<u32> = match &a.epochs {
        Some(e) => parse_list("--epochs", e)?,
        None => cfg.curriculum.epochs.clone(),
    };
    if let Some(n) = a.stages {
        if n != epochs.len() {
            return Err(invalid(anyhow!(
                "--stages {n} does not match {} epoch values",
                epochs.len()
            )));
        }
    }
    let order: CurriculumOrder = match &a.order {
        Some(o) => o.parse().map_err(|e| invalid(anyhow!("--order: {e}")))?,
        None => cfg.curriculum.order,
    };
    let samples = read_samples(open(&a.data)?)
        .with_context(|| format!("reading {}", a.data.display()))
        .map_err(invalid)?;
    let plan =
        curriculum_plan(&samples, &epochs, order, a.seed.unwrap_or(cfg.seed)).map_err(invalid)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&plan).context("serializing plan")?
    );
    Ok(())
}
