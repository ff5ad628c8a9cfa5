mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use config::{pick, Config};
use dcacert::certificates::{certify, CertificateReport};
use dcacert::engine::{run_dca, RunOptions, StopMeasure, SubproblemSolver, Trajectory};
use dcacert::interpolation::{check_interpolation, parse_triplets, Tolerance, DEFAULT_TOL};
use dcacert::probe::{probe, PepVariables, ProbeConfig};
use dcacert::regimes::{asymptotic_constants, regime_map, thresholds, write_regime_csv, GridSpec};
use dcacert::{classify_any, CurvatureClass, DcInstance, DcParams, ExtReal, SubgradPolicy};

#[derive(Parser)]
#[command(name = "dcacert", about = "DCA runs, per-regime decrease certificates and worst-case probes")]
#[command(disable_version_flag = true)]
struct Cli {
    /// Print the version and the formula-table revision.
    #[arg(short = 'V', long)]
    version: bool,
    /// Worker threads for grids, batches and probe starts.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML file with default settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Regime and one-step coefficients for a parameter tuple.
    Classify(ClassifyArgs),
    /// Regime index over a (mu1, mu2) grid, as CSV.
    RegimeMap(MapArgs),
    /// Run DCA on an instance file.
    Run(RunArgs),
    /// Check a saved trajectory against its certificates.
    Certify(CertifyArgs),
    /// Check triplet data against a curvature class.
    InterpCheck(InterpArgs),
    /// Search for worst-case data at fixed parameters.
    Probe(ProbeArgs),
    /// Run and certify several instances, one summary row each.
    Report(ReportArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// JSON file with {"mu1", "L1", "mu2", "L2"}.
    #[arg(long, conflicts_with_all = ["mu1", "l1", "mu2", "l2"])]
    params: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    mu1: Option<f64>,
    #[arg(long = "L1", allow_hyphen_values = true)]
    l1: Option<ExtReal>,
    #[arg(long, allow_hyphen_values = true)]
    mu2: Option<f64>,
    #[arg(long = "L2", allow_hyphen_values = true)]
    l2: Option<ExtReal>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Write the certificate as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long = "L1", allow_hyphen_values = true)]
    l1: ExtReal,
    #[arg(long = "L2", allow_hyphen_values = true)]
    l2: ExtReal,
    /// mu1 grid `lo:hi:steps` (also used for mu2 unless --grid2 is given).
    #[arg(long, allow_hyphen_values = true)]
    grid: GridSpec,
    #[arg(long, allow_hyphen_values = true)]
    grid2: Option<GridSpec>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopOn {
    Gap,
    T,
}

#[derive(Args)]
struct RunSettings {
    /// Maximum number of DCA steps.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Early stop when the selected measure drops below this value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "gap")]
    stop_on: StopOn,
    /// least-norm | leftmost | rightmost | weight:t
    #[arg(long)]
    policy: Option<SubgradPolicy>,
    /// Solve quadratic subproblems by gradient descent (flagged inexact).
    #[arg(long)]
    iterative: bool,
    #[arg(long, default_value_t = 1e-12, requires = "iterative")]
    sub_tol: f64,
    #[arg(long, default_value_t = 100_000, requires = "iterative")]
    sub_max_iter: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated starting point.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    x0: Vec<f64>,
    #[command(flatten)]
    settings: RunSettings,
    /// Certify the trajectory; exit 2 if any check fails.
    #[arg(long)]
    certify: bool,
    /// Trajectory JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory CSV destination; standard output when neither --csv nor --out is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Certificate JSON destination (implies --certify).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    traj: PathBuf,
    /// Fail when no lower bound F* is available.
    #[arg(long)]
    require_fstar: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InterpArgs {
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long = "L", allow_hyphen_values = true)]
    l: ExtReal,
    /// Allowed negative slack.
    #[arg(long)]
    tol: Option<f64>,
    /// Scale the tolerance by the magnitude of each pair's terms.
    #[arg(long)]
    scaled: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long = "N", default_value_t = 1)]
    n: usize,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    starts: Option<usize>,
    /// Do not seed a start with the analytic equality instance.
    #[arg(long)]
    no_extremal_start: bool,
    /// PepVariables JSON used as the first start.
    #[arg(long)]
    warm: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Instance JSON files.
    #[arg(long, num_args = 1.., required = true)]
    instances: Vec<PathBuf>,
    /// Comma-separated starting point shared by all instances (zeros by default).
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    x0: Vec<f64>,
    #[command(flatten)]
    settings: RunSettings,
    /// Summary JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a command did not succeed.
enum Failure {
    /// Bad input: exit 1.
    Invalid(anyhow::Error),
    /// A certificate or feasibility check failed: exit 2.
    Check(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => {
                let text = format!("{e:#}");
                write!(f, "error: {}", text.split_whitespace().collect::<Vec<_>>().join(" "))
            }
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn provenance(settings: Value) -> Value {
    json!({
        "tool": concat!("dcacert ", env!("CARGO_PKG_VERSION")),
        "formula_revision": dcacert::formula_table_revision(),
        "settings": settings,
    })
}

/// Serializes `body` with a `provenance` block added at the top level.
fn with_provenance<T: Serialize>(body: &T, settings: Value) -> Result<String> {
    let mut v = serde_json::to_value(body)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("provenance".into(), provenance(settings));
        }
        other => {
            v = json!({ "data": other.take(), "provenance": provenance(settings) });
        }
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

impl ParamArgs {
    fn resolve(&self) -> Result<DcParams> {
        let p = if let Some(path) = &self.params {
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?
        } else {
            match (self.mu1, self.l1, self.mu2, self.l2) {
                (Some(mu1), Some(l1), Some(mu2), Some(l2)) => DcParams::new(mu1, l1, mu2, l2),
                _ => bail!("give --params or all of --mu1 --L1 --mu2 --L2"),
            }
        };
        Ok(p.checked()?)
    }
}

fn cmd_classify(a: &ClassifyArgs) -> Outcome {
    let p = a.params.resolve()?;
    let c = classify_any(&p).map_err(|e| anyhow!(e))?;
    println!("params     {p}");
    println!("regime     {} ({}{})", c.index, c.label, if c.gap_fill { ", gap fill" } else { "" });
    println!("sigma      {}", c.sigma);
    println!("sigma_plus {}", c.sigma_plus);
    println!("p          {}", c.p);
    println!("alpha      {}", c.alpha);
    let t = thresholds(&p);
    println!("S1, S2     {}, {}", t.s1, t.s2);
    if !c.ties.is_empty() {
        println!("ties       {:?}", c.ties);
    }
    if matches!(c.index, 5 | 6) {
        if let Ok(a) = asymptotic_constants(&p) {
            let hyp = if a.hypotheses_hold { "" } else { " (hypotheses L1 > mu2, L2 > mu1 fail)" };
            println!("p5_inf     {}{hyp}", a.p5_inf);
            println!("p6_inf     {}{hyp}", a.p6_inf);
        }
    }
    if c.linear_regime() {
        println!("note       rates in this regime are linear; only the sublinear bound is certified");
    }
    if let Some(out) = &a.out {
        write(out, &with_provenance(&c, json!({}))?)?;
    }
    Ok(())
}

fn cmd_map(a: &MapArgs) -> Outcome {
    let g2 = a.grid2.unwrap_or(a.grid);
    let rows = regime_map(a.l1, a.l2, &a.grid, &g2);
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_regime_csv(&rows, std::io::BufWriter::new(file)).context("writing CSV")?;
            let mut counts = [0usize; 9];
            for r in &rows {
                counts[r.regime as usize] += 1;
            }
            println!("{} nodes; per regime 0..8: {counts:?}", rows.len());
        }
        None => write_regime_csv(&rows, std::io::stdout().lock()).context("writing CSV")?,
    }
    Ok(())
}

impl RunSettings {
    fn options(&self, cfg: &Config) -> Result<RunOptions> {
        let policy = match (&self.policy, &cfg.policy) {
            (Some(p), _) => *p,
            (None, Some(s)) => s.parse().map_err(|e| anyhow!("config policy: {e}"))?,
            (None, None) => SubgradPolicy::default(),
        };
        Ok(RunOptions {
            max_iters: pick(self.n, cfg.iterations, 100),
            tol: self.tol.or(cfg.tol),
            stop_on: match self.stop_on {
                StopOn::Gap => StopMeasure::GradientGap,
                StopOn::T => StopMeasure::TMeasure,
            },
            policy,
            solver: if self.iterative {
                SubproblemSolver::Iterative {
                    tol: self.sub_tol,
                    max_iter: self.sub_max_iter,
                }
            } else {
                SubproblemSolver::Exact
            },
        })
    }
}

fn load_instance(path: &Path) -> Result<DcInstance> {
    DcInstance::from_json(&read(path)?).with_context(|| format!("instance {}", path.display()))
}

fn summarize(rep: &CertificateReport) {
    if let Some(r) = &rep.regime {
        println!("regime {} ({}): sigma={} sigma_plus={} p={}", r.index, r.label, r.sigma, r.sigma_plus, r.p);
    }
    if let Some(worst) = rep.one_step.iter().min_by(|a, b| a.slack.total_cmp(&b.slack)) {
        println!("one-step: {} steps, min slack {:e} at k={}", rep.one_step.len(), worst.slack, worst.k);
    }
    if let Some(r) = &rep.rate {
        print!("rate N={}: observed {:e} <= {:e}", r.prediction.n, r.observed, r.prediction.bound_no_fstar);
        if let Some(b) = r.prediction.bound_with_fstar {
            print!(" and <= {b:e} (with F*)");
        }
        println!(" -> {}", if r.holds { "holds" } else { "FAILS" });
    }
    if let Some(n) = &rep.nonsmooth {
        println!(
            "T-measure bound: observed {:e} <= {:e} -> {}",
            n.observed,
            n.bound,
            if n.holds { "holds" } else { "FAILS" }
        );
    }
    println!("certificate {}", if rep.pass { "PASS" } else { "FAIL" });
}

fn cert_settings() -> Value {
    json!({
        "slack_tol": dcacert::certificates::SLACK_TOL,
        "equality_tol": dcacert::certificates::EQ_TOL,
    })
}

fn certify_and_report(tr: &Trajectory, out: Option<&Path>) -> Outcome {
    let rep = certify(tr).map_err(|e| anyhow!(e))?;
    summarize(&rep);
    if let Some(path) = out {
        write(path, &with_provenance(&rep, cert_settings())?)?;
    }
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::Check("certificate inequality violated".into()))
    }
}

fn cmd_run(a: &RunArgs, cfg: &Config) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let opts = a.settings.options(cfg)?;
    let x0 = if a.x0.is_empty() { vec![0.0; inst.dimension()] } else { a.x0.clone() };
    let tr = run_dca(&inst, &x0, &opts).map_err(|e| anyhow!(e))?;
    let settings = serde_json::to_value(opts).context("settings")?;
    if let Some(path) = &a.out {
        write(path, &with_provenance(&tr, settings)?)?;
    }
    match &a.csv {
        Some(path) => write(path, &tr.to_csv())?,
        None if a.out.is_none() => print!("{}", tr.to_csv()),
        None => {}
    }
    let last = tr.last();
    println!(
        "{} steps ({:?}); F {:e} -> {:e}; ||G||^2 {:e}",
        tr.steps(),
        tr.stop_reason,
        tr.first().f,
        last.f,
        last.g_norm_sq
    );
    if tr.inexact {
        println!("note: iterative subproblem solves, trajectory is inexact");
    }
    if a.certify || a.report.is_some() {
        certify_and_report(&tr, a.report.as_deref())?;
    }
    Ok(())
}

fn cmd_certify(a: &CertifyArgs) -> Outcome {
    let tr = Trajectory::from_json(&read(&a.traj)?).map_err(|e| anyhow!("{}: {e}", a.traj.display()))?;
    if a.require_fstar && tr.instance.fstar_with_source().is_none() {
        return Err(Failure::Invalid(anyhow!("no lower bound F* available for this instance")));
    }
    certify_and_report(&tr, a.out.as_deref())
}

fn cmd_interp(a: &InterpArgs, cfg: &Config) -> Outcome {
    let ts = parse_triplets(&read(&a.triplets)?).map_err(|e| anyhow!("{}: {e}", a.triplets.display()))?;
    let cls = CurvatureClass::new(a.mu, a.l);
    if !cls.is_valid() {
        return Err(Failure::Invalid(anyhow!("class needs mu < L and L > 0 (got mu={}, L={})", a.mu, a.l)));
    }
    let tol = pick(a.tol, cfg.interp_tol, DEFAULT_TOL);
    let tolerance = if a.scaled { Tolerance::Scaled(tol) } else { Tolerance::Absolute(tol) };
    let rep = check_interpolation(&ts, &cls, tolerance);
    println!("{} triplets, min slack {:e}", ts.len(), rep.min_slack);
    if let Some((i, j)) = rep.worst_pair {
        println!("worst pair ({i}, {j})");
    }
    println!("{}", if rep.feasible { "feasible" } else { "INFEASIBLE" });
    if let Some(path) = &a.out {
        write(path, &with_provenance(&rep, json!({ "tolerance": tolerance }))?)?;
    }
    if rep.feasible {
        Ok(())
    } else {
        Err(Failure::Check("interpolation inequality violated".into()))
    }
}

fn cmd_probe(a: &ProbeArgs, cfg: &Config) -> Outcome {
    let p = a.params.resolve()?;
    let defaults = ProbeConfig::default();
    let pc = ProbeConfig {
        n: a.n,
        d: pick(a.d, cfg.d, defaults.d),
        budget: pick(a.budget, cfg.budget, defaults.budget),
        seed: pick(a.seed, cfg.seed, defaults.seed),
        starts: pick(a.starts, cfg.starts, defaults.starts),
        extremal_start: !a.no_extremal_start,
    };
    let warm: Option<PepVariables> = match &a.warm {
        Some(path) => Some(serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?),
        None => None,
    };
    let r = probe(&p, &pc, warm.as_ref()).map_err(|e| anyhow!(e))?;
    println!("regime {}; N={} d={}", r.regime, pc.n, pc.d);
    println!("best ratio      {}", r.best_ratio);
    println!("certified bound {}", r.certified_bound);
    println!("gap             {:e}", r.gap);
    println!(
        "witness {}; {} evaluations{}",
        if r.witness_feasible { "feasible" } else { "INFEASIBLE" },
        r.evaluations,
        if r.budget_exhausted { " (budget exhausted)" } else { "" }
    );
    if let Some(path) = &a.out {
        write(path, &with_provenance(&r, serde_json::to_value(pc).context("settings")?)?)?;
    }
    if r.certificate_violation {
        return Err(Failure::Check("probe ratio exceeds the certified bound".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportRow {
    instance: String,
    regime: Option<u8>,
    p: Option<f64>,
    steps: usize,
    min_slack: Option<f64>,
    rate_holds: Option<bool>,
    pass: bool,
    error: Option<String>,
}

fn report_one(path: &Path, x0: &[f64], opts: &RunOptions) -> Result<ReportRow> {
    let inst = load_instance(path)?;
    let x0 = if x0.is_empty() { vec![0.0; inst.dimension()] } else { x0.to_vec() };
    let tr = run_dca(&inst, &x0, opts).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let name = path.display().to_string();
    Ok(match certify(&tr) {
        Ok(rep) => ReportRow {
            instance: name,
            regime: rep.regime.as_ref().map(|r| r.index),
            p: rep.regime.as_ref().map(|r| r.p),
            steps: tr.steps(),
            min_slack: rep.one_step.iter().map(|s| s.slack).min_by(f64::total_cmp),
            rate_holds: rep.rate.as_ref().map(|r| r.holds),
            pass: rep.pass,
            error: None,
        },
        Err(e) => ReportRow {
            instance: name,
            regime: None,
            p: None,
            steps: tr.steps(),
            min_slack: None,
            rate_holds: None,
            pass: false,
            error: Some(e.to_string()),
        },
    })
}

fn cmd_report(a: &ReportArgs, cfg: &Config) -> Outcome {
    let opts = a.settings.options(cfg)?;
    let rows: Vec<ReportRow> = a
        .instances
        .par_iter()
        .map(|p| report_one(p, &a.x0, &opts))
        .collect::<Result<_>>()?;
    for r in &rows {
        let slack = r.min_slack.map(|s| format!("{s:e}")).unwrap_or_else(|| "-".into());
        let regime = r.regime.map(|i| i.to_string()).unwrap_or_else(|| "-".into());
        let status = match &r.error {
            Some(e) => format!("FAIL ({e})"),
            None if r.pass => "PASS".into(),
            None => "FAIL".into(),
        };
        println!("{}\tregime {regime}\t{} steps\tmin slack {slack}\t{status}", r.instance, r.steps);
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} instances, {failed} failed", rows.len());
    if let Some(path) = &a.out {
        let body = json!({ "rows": rows, "failed": failed });
        let mut settings = serde_json::to_value(opts).context("settings")?;
        settings["certificates"] = cert_settings();
        write(path, &with_provenance(&body, settings)?)?;
    }
    if failed > 0 {
        Err(Failure::Check(format!("{failed} of {} instances failed certification", rows.len())))
    } else {
        Ok(())
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(Failure::Invalid(anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let Some(cmd) = &cli.command else {
        return Err(Failure::Invalid(anyhow!("no command given; see --help")));
    };
    match cmd {
        Command::Classify(a) => cmd_classify(a),
        Command::RegimeMap(a) => cmd_map(a),
        Command::Run(a) => cmd_run(a, &cfg),
        Command::Certify(a) => cmd_certify(a),
        Command::InterpCheck(a) => cmd_interp(a, &cfg),
        Command::Probe(a) => cmd_probe(a, &cfg),
        Command::Report(a) => cmd_report(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.version {
        println!(
            "dcacert {} (formula table {})",
            env!("CARGO_PKG_VERSION"),
            dcacert::formula_table_revision()
        );
        return ExitCode::SUCCESS;
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(match f {
                Failure::Invalid(_) => 1,
                Failure::Check(_) => 2,
            })
        }
    }
}
