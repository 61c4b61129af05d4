//! `replica-rank`: ingest RTT samples, enumerate and rank replica
//! deployments, and compare rankings.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 internal error.
//! Errors are printed to stderr as `{"errors": [...]}`.

mod config;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use replica_rank::ranking::evaluate_all;
use replica_rank::{
    compare, estimate_detailed, estimate_simple, load_matrix, load_reference, simulate,
    store_matrix, validate_inputs, AcceptTiming, Aggregation, ClientSet, Deployment,
    DeploymentSpace, EstimatorVariant, FaultModel, IngestError, Mode, ProtocolParams, Ranking,
    RankingError, RttMatrix, SiteCatalog, ValidationError,
};
use serde_json::json;

use crate::config::{default_f, ConfigFile, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration (exit 1).
    Input(Vec<String>),
    /// Anything else (exit 2).
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(vec![msg.into()])
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn messages(&self) -> Vec<String> {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Internal(m) => vec![m.clone()],
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Input(e.issues.iter().map(ToString::to_string).collect())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Invalid(v) => v.into(),
            IngestError::Io(e) => CliError::Internal(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

fn ranking_error(e: RankingError, catalog: &SiteCatalog) -> CliError {
    match e {
        RankingError::Mismatch(m) => {
            CliError::input(format!("rankings cover different deployments: {}", m.describe(catalog)))
        }
        RankingError::Invalid(v) => v.into(),
        RankingError::WorkerPool(msg) => CliError::Internal(msg),
        RankingError::Io(e) => CliError::Internal(e.to_string()),
        other => CliError::input(other.to_string()),
    }
}

fn write_failed(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "replica-rank", version, about = "Rank replica deployments for geo-replicated SMR by estimated latency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate RTT samples (src,dst,timestamp,rtt_ms) into a matrix CSV.
    Ingest(IngestArgs),
    /// Count or list candidate deployments.
    Enumerate(EnumerateArgs),
    /// Estimate the latency of one deployment.
    Estimate(EstimateArgs),
    /// Rank every candidate deployment and write a ranking CSV.
    Rank(RankArgs),
    /// Compare an estimated ranking with a reference ranking.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Sample CSV.
    #[arg(long)]
    samples: PathBuf,
    /// Matrix CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Site order in the matrix (comma-separated); defaults to first appearance.
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<String>>,
    /// Drop the top and bottom 10% of samples per pair before averaging.
    #[arg(long)]
    trimmed: bool,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    /// Only print the number of deployments.
    #[arg(long)]
    count: bool,
    /// Matrix CSV supplying the site catalog.
    #[arg(long, conflicts_with = "site_count", required_unless_present = "site_count")]
    matrix: Option<PathBuf>,
    /// Use N anonymous sites instead of a matrix.
    #[arg(long)]
    site_count: Option<usize>,
    /// Candidate replica sites (comma-separated); default all.
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<String>>,
    /// Replica count.
    #[arg(long)]
    n: usize,
    /// Deployments are plain site sets with no leader.
    #[arg(long)]
    leaderless: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum EstimatorArg {
    Detailed,
    Simple,
}

impl From<EstimatorArg> for EstimatorVariant {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Detailed => EstimatorVariant::ModSmartDetailed,
            EstimatorArg::Simple => EstimatorVariant::ModSmartSimple,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AcceptArg {
    SenderBased,
    PaperLiteral,
}

impl From<AcceptArg> for AcceptTiming {
    fn from(a: AcceptArg) -> Self {
        match a {
            AcceptArg::SenderBased => AcceptTiming::SenderBased,
            AcceptArg::PaperLiteral => AcceptTiming::PaperLiteral,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    leader: String,
    /// Follower sites (comma-separated).
    #[arg(long)]
    followers: String,
    /// Client sites as `Name:count,...`.
    #[arg(long)]
    clients: String,
    /// Fault bound; defaults to the largest tolerable for n.
    #[arg(long)]
    f: Option<usize>,
    #[arg(long, value_enum, default_value = "detailed")]
    estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "sender-based")]
    accept_timing: AcceptArg,
    /// Use the crash-fault bound n >= 2f + 1.
    #[arg(long)]
    cft: bool,
    /// Print the full phase trace as JSON.
    #[arg(long)]
    verbose: bool,
    /// Also run the discrete-event simulation and print its result.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Debug)]
struct RankArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Candidate replica sites (comma-separated); default all.
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<String>>,
    /// Client sites as `Name:count,...`.
    #[arg(long)]
    clients: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    f: Option<usize>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    accept_timing: Option<AcceptArg>,
    #[arg(long)]
    cft: bool,
    /// Ranking CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Estimated ranking CSV.
    #[arg(long)]
    estimated: PathBuf,
    /// Reference: ranking CSV, `deployment,latency_ms`, or raw `deployment,sample_ms`.
    #[arg(long)]
    reference: PathBuf,
    /// Matrix CSV supplying the site catalog.
    #[arg(long)]
    matrix: PathBuf,
    /// Scatter CSV to write.
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Also print the correlation of raw latencies.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let usage = CliError::Input(vec![e.render().to_string().trim_end().to_owned()]);
            eprintln!("{}", json!({ "errors": usage.messages() }));
            return ExitCode::from(usage.exit_code());
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "errors": e.messages() }));
            ExitCode::from(e.exit_code())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<(SiteCatalog, RttMatrix), CliError> {
    load_matrix(open(path)?).map_err(|e| match CliError::from(e) {
        CliError::Input(msgs) => CliError::Input(
            msgs.into_iter()
                .map(|m| format!("{}: {m}", path.display()))
                .collect(),
        ),
        other => other,
    })
}

/// Writes through a temporary sibling file so a failed run leaves no partial output.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    let file = File::create(&tmp).map_err(|e| write_failed(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| write_failed(path, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| write_failed(path, e))
}

fn cmd_ingest(a: IngestArgs) -> Result<(), CliError> {
    let samples = replica_rank::parse_samples(open(&a.samples)?)?;
    let names = match a.sites {
        Some(names) => names,
        None => {
            let mut names: Vec<String> = Vec::new();
            for s in &samples {
                for n in [&s.src, &s.dst] {
                    if !names.contains(n) {
                        names.push(n.clone());
                    }
                }
            }
            names
        }
    };
    let catalog = SiteCatalog::from_names(names)?;
    let how = if a.trimmed { Aggregation::TrimmedMean10 } else { Aggregation::Mean };
    let matrix = replica_rank::aggregate(&samples, &catalog, how)?;
    write_file(&a.out, |w| store_matrix(&catalog, &matrix, w).map_err(CliError::from))?;
    println!("wrote {}x{} matrix from {} samples to {}", catalog.len(), catalog.len(), samples.len(), a.out.display());
    Ok(())
}

fn candidate_sites(catalog: &SiteCatalog, sites: Option<&[String]>) -> Result<Vec<replica_rank::SiteId>, CliError> {
    match sites {
        None => Ok(catalog.ids().collect()),
        Some(names) => {
            let mut ids = Vec::new();
            let mut errors = Vec::new();
            for name in names {
                match catalog.lookup(name.trim()) {
                    Some(id) => ids.push(id),
                    None => errors.push(format!("unknown site {name:?}")),
                }
            }
            if errors.is_empty() {
                Ok(ids)
            } else {
                Err(CliError::Input(errors))
            }
        }
    }
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<(), CliError> {
    let catalog = match (&a.matrix, a.site_count) {
        (Some(path), _) => read_matrix(path)?.0,
        (None, Some(k)) => SiteCatalog::from_names((0..k).map(|i| format!("site{i}")))?,
        (None, None) => return Err(CliError::input("either --matrix or --site-count is required")),
    };
    let allowed = candidate_sites(&catalog, a.sites.as_deref())?;
    let mode = if a.leaderless { Mode::Leaderless } else { Mode::LeaderBased };
    let space = DeploymentSpace::new(&catalog, allowed, a.n, mode)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let res = if a.count {
        writeln!(out, "{}", space.count())
    } else {
        space.iter().try_for_each(|d| writeln!(out, "{}", d.label(&catalog)))
    };
    res.and_then(|_| out.flush())
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), CliError> {
    let (catalog, matrix) = read_matrix(&a.matrix)?;
    let leader = catalog
        .lookup(a.leader.trim())
        .ok_or_else(|| CliError::input(format!("unknown site {:?}", a.leader)))?;
    let followers = replica_rank::model::parse_site_list(&a.followers, ',', &catalog)?;
    let deployment = Deployment::leader_based(leader, followers)?;
    let clients = ClientSet::parse(&a.clients, &catalog)?;
    let model = if a.cft { FaultModel::Cft } else { FaultModel::Bft };
    let n = deployment.n();
    let params = ProtocolParams::bft(n, a.f.unwrap_or_else(|| default_f(n, model)))
        .with_fault_model(model)
        .with_variant(a.estimator.into())
        .with_accept_timing(a.accept_timing.into());
    validate_inputs(&catalog, &matrix, &clients, &params)?;

    let label = deployment.label(&catalog);
    let name = |id| catalog.name(id).unwrap_or("?");
    let estimate_err = |e: replica_rank::EstimateError| CliError::input(e.to_string());
    let mut report = match params.variant {
        EstimatorVariant::ModSmartDetailed => {
            let (latency, t) = estimate_detailed(&deployment, &clients, &matrix, &params).map_err(estimate_err)?;
            let mut report = json!({ "deployment": label, "estimator": "detailed", "latency_ms": latency });
            if a.verbose {
                report["trace"] = json!({
                    "replicas": t.replicas.iter().map(|&r| name(r)).collect::<Vec<_>>(),
                    "s_req": t.s_req,
                    "s_pro": t.s_pro,
                    "s_wrt": t.s_wrt,
                    "s_acc": t.s_acc,
                    "responses": t.responses.iter().map(|r| json!({
                        "site": name(r.site),
                        "count": r.count,
                        "latency_ms": r.latency_ms,
                    })).collect::<Vec<_>>(),
                    "latency_ms": t.latency_ms,
                });
            }
            report
        }
        EstimatorVariant::ModSmartSimple => {
            let latency = estimate_simple(&deployment, &clients, &matrix).map_err(estimate_err)?;
            json!({ "deployment": label, "estimator": "simple", "latency_ms": latency })
        }
    };
    if a.oracle {
        let sim = simulate(&deployment, &clients, &matrix, &params).map_err(estimate_err)?;
        report["oracle_latency_ms"] = json!(sim.latency_ms);
        report["oracle_events"] = json!(sim.events.len());
    }
    if a.verbose || a.oracle {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?);
    } else {
        println!("{}", report["latency_ms"]);
    }
    Ok(())
}

fn cmd_rank(a: RankArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        matrix: a.matrix,
        sites: a.sites,
        clients: a.clients,
        n: a.n,
        f: a.f,
        estimator: a.estimator.map(Into::into),
        accept_timing: a.accept_timing.map(Into::into),
        fault_model: a.cft.then_some(FaultModel::Cft),
        output: a.out,
        workers: a.workers,
    };
    let cfg = file.merge(flags).resolve()?;
    run_rank(&cfg)
}

fn run_rank(cfg: &RunConfig) -> Result<(), CliError> {
    let (catalog, matrix) = read_matrix(&cfg.matrix)?;
    let clients = ClientSet::parse(&cfg.clients, &catalog)?;
    let params = ProtocolParams::bft(cfg.n, cfg.f)
        .with_fault_model(cfg.fault_model)
        .with_variant(cfg.estimator)
        .with_accept_timing(cfg.accept_timing);
    let allowed = candidate_sites(&catalog, cfg.sites.as_deref())?;

    let mut errors: Vec<String> = Vec::new();
    if let Err(e) = validate_inputs(&catalog, &matrix, &clients, &params) {
        errors.extend(e.issues.iter().map(ToString::to_string));
    }
    let space = match DeploymentSpace::new(&catalog, allowed, cfg.n, Mode::LeaderBased) {
        Ok(space) => Some(space),
        Err(e) => {
            errors.extend(e.issues.iter().map(ToString::to_string));
            None
        }
    };
    let space = match space {
        Some(space) if errors.is_empty() => space,
        _ => {
            errors.dedup();
            return Err(CliError::Input(errors));
        }
    };

    let start = Instant::now();
    let evaluated = evaluate_all(&space, &clients, &matrix, &params, cfg.workers)
        .map_err(|e| ranking_error(e, &catalog))?;
    let evaluation = start.elapsed();

    let start = Instant::now();
    let ranking = Ranking::from_latencies(evaluated).map_err(|e| ranking_error(e, &catalog))?;
    write_file(&cfg.output, |w| {
        ranking.write_csv(&catalog, w).map_err(|e| write_failed(&cfg.output, e))
    })?;
    let finishing = start.elapsed();

    let count = ranking.len();
    println!("deployments: {count}");
    println!(
        "evaluation: {:.3} s ({:.3} us per deployment, {} worker(s))",
        evaluation.as_secs_f64(),
        evaluation.as_secs_f64() * 1e6 / count.max(1) as f64,
        cfg.workers
    );
    println!("sort+output: {:.3} s", finishing.as_secs_f64());
    if let Some(best) = ranking.best() {
        println!("best: {} ({} ms)", best.deployment.label(&catalog), best.latency_ms);
    }
    println!("wrote {}", cfg.output.display());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let (catalog, _) = read_matrix(&a.matrix)?;
    let load = |path: &Path| -> Result<Ranking, CliError> {
        load_reference(open(path)?, &catalog).map_err(|e| match ranking_error(e, &catalog) {
            CliError::Input(msgs) => CliError::Input(
                msgs.into_iter()
                    .map(|m| format!("{}: {m}", path.display()))
                    .collect(),
            ),
            other => other,
        })
    };
    let estimated = load(&a.estimated)?;
    let reference = load(&a.reference)?;
    let cmp = compare(&estimated, &reference).map_err(|e| ranking_error(e, &catalog))?;
    println!("deployments: {}", cmp.pairs.len());
    println!("rmse: {}", cmp.rmse);
    println!("cc: {}", cmp.cc);
    if a.verbose {
        match cmp.latency_cc {
            Some(cc) => println!("latency_cc: {cc}"),
            None => println!("latency_cc: undefined"),
        }
    }
    if let Some(path) = &a.scatter {
        write_file(path, |w| cmp.write_scatter_csv(&catalog, w).map_err(|e| write_failed(path, e)))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
