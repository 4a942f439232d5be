//! Command-line frontend.
//!
//! Exit codes: 0 success (including --help/--version), 1 usage, 2 data,
//! 3 fit failure. The first stderr line of any failure is
//! `error[usage|data|fit]: <message>`. Stdout is deterministic for a fixed
//! seed and input; wall-clock timings go to stderr only.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use mixlaw::error::Error;
use mixlaw::fitting::{self, FitConfig, FitReport, SplitKind};
use mixlaw::io::lawfile::{FitMeta, LawFile};
use mixlaw::io::multi::MultiSpec;
use mixlaw::io::runlog;
use mixlaw::io::synth::{self, SynthSpec};
use mixlaw::law::{Family, Law};
use mixlaw::metrics::{self, LossSurface};
use mixlaw::model::RunObservation;
use mixlaw::planner::{self, PlanConfig};

#[derive(Parser)]
#[command(
    name = "mixlaw",
    version,
    about = "Fit, evaluate and plan repetition-aware data-mixture scaling laws"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a law family to a run log
    Fit(FitArgs),
    /// Score a fitted law against measured runs
    Eval(EvalArgs),
    /// Plan mixture weights for a future run from a fitted law
    Plan(PlanArgs),
    /// Generate a synthetic run log from a known law
    Synth(SynthArgs),
    /// Fit competing law families and rank them
    Compare(CompareArgs),
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct FitArgs {
    /// Run log CSV
    #[arg(long)]
    runs: PathBuf,
    #[arg(long, value_parser = parse_family)]
    family: Family,
    /// Law file to write
    #[arg(long)]
    out: PathBuf,
    /// none, half-steps or holdout-largest
    #[arg(long, default_value = "none", value_parser = parse_split)]
    split: SplitKind,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Basin hops per restart
    #[arg(long, default_value_t = 10)]
    hops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight floor in omega = max(r*h, epsilon)
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    huber_delta: f64,
    /// Keep observations with repetition factor below 1
    #[arg(long)]
    allow_sub_epoch: bool,
    /// Let the mixing penalty go negative
    #[arg(long)]
    allow_negative_gamma: bool,
    /// Let utility-decay data exponents go positive
    #[arg(long)]
    allow_positive_decay: bool,
    /// Starting values for restart 0, comma-separated in canonical order
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Option<Vec<f64>>,
    /// Bound overrides lo:hi,lo:hi,... in canonical parameter order
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    law: PathBuf,
    /// wr2, wasted, hstar-error or all
    #[arg(long, default_value = "all", value_parser = ["wr2", "wasted", "hstar-error", "all"])]
    metric: String,
    /// Budgets evaluated per loss surface
    #[arg(long, default_value_t = 20)]
    budgets_per_group: usize,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long)]
    allow_sub_epoch: bool,
    /// Directory for curves.csv, envelope.csv and optimal_r.csv
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Law file (single-domain mode)
    #[arg(long, required_unless_present = "multi", conflicts_with = "multi")]
    law: Option<PathBuf>,
    /// Total training budget in tokens
    #[arg(long)]
    budget: f64,
    /// Target pool size in tokens (single-domain mode)
    #[arg(long, required_unless_present = "multi", conflicts_with = "multi")]
    d_target: Option<f64>,
    #[arg(long, conflicts_with = "multi")]
    model_size: Option<f64>,
    /// Multi-domain plan spec JSON
    #[arg(long)]
    multi: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    grid_points: usize,
    #[arg(long, default_value_t = 1e-4)]
    h_min: f64,
    #[arg(long, default_value_t = 1.0)]
    h_max: f64,
    /// Consider mixtures that repeat the target pool less than once
    #[arg(long)]
    allow_sub_epoch: bool,
    /// Extra budgets to sweep, comma-separated ascending
    #[arg(long, value_delimiter = ',', conflicts_with = "multi")]
    sweep: Option<Vec<f64>>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis spec JSON
    #[arg(long)]
    spec: PathBuf,
    /// Run log CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    runs: PathBuf,
    /// Families to fit; default picks by whether model sizes vary
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    #[arg(long, default_value = "half-steps", value_parser = parse_split)]
    split: SplitKind,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 10)]
    hops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    huber_delta: f64,
    #[arg(long, default_value_t = 20)]
    budgets_per_group: usize,
    #[arg(long)]
    allow_sub_epoch: bool,
    #[arg(long)]
    allow_negative_gamma: bool,
    #[arg(long)]
    allow_positive_decay: bool,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) if e.is_fit_failure() => "fit",
            CliError::Lib(_) => "data",
        }
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_fit_failure() => 3,
            CliError::Lib(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            eprintln!("run 'mixlaw --help' for usage");
            std::process::exit(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {}", e.class(), e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Fit(args) => run_fit(args),
        Cmd::Eval(args) => run_eval(args),
        Cmd::Plan(args) => run_plan(args),
        Cmd::Synth(args) => run_synth(args),
        Cmd::Compare(args) => run_compare(args),
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("MIXLAW_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "MIXLAW_THREADS='{s}' is not a positive integer"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("MIXLAW_THREADS: {e}"))),
    }
}

fn parse_bounds(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .map(|pair| {
            let (lo, hi) = pair.split_once(':').ok_or_else(|| {
                CliError::Usage(format!("bound '{pair}' is not of the form lo:hi"))
            })?;
            let lo: f64 = lo
                .parse()
                .map_err(|_| CliError::Usage(format!("bound '{pair}': '{lo}' is not a number")))?;
            let hi: f64 = hi
                .parse()
                .map_err(|_| CliError::Usage(format!("bound '{pair}': '{hi}' is not a number")))?;
            Ok((lo, hi))
        })
        .collect()
}

fn run_fit(args: FitArgs) -> Result<(), CliError> {
    let runs = runlog::read_runs(&args.runs)?;
    let mut cfg = FitConfig::new(args.family);
    cfg.split = args.split;
    cfg.restarts = args.restarts;
    cfg.hops = args.hops;
    cfg.seed = args.seed;
    cfg.epsilon = args.epsilon;
    cfg.huber_delta = args.huber_delta;
    cfg.regime_filter = !args.allow_sub_epoch;
    cfg.allow_negative_gamma = args.allow_negative_gamma;
    cfg.allow_positive_decay = args.allow_positive_decay;
    cfg.initial = args.initial;
    cfg.bounds = args.bounds.as_deref().map(parse_bounds).transpose()?;
    cfg.threads = threads_from_env()?;
    let report = fitting::fit(&runs, &cfg)?;
    print_fit_report(&args.family, &report);
    let meta = FitMeta {
        seed: cfg.seed,
        restarts: cfg.restarts,
        epsilon: cfg.epsilon,
        huber_delta: cfg.huber_delta,
        split: cfg.split.to_string(),
        objective: report.objective,
        train_wr2: report.train_wr2,
        test_wr2: report.test_wr2,
        n_train: report.n_train,
        n_test: report.n_test,
        n_filtered_regime: report.n_filtered_regime,
        n_dropped_nonfinite: report.n_dropped_nonfinite,
        tool_version: mixlaw::TOOL_VERSION.to_string(),
    };
    LawFile::new(&report.law, Some(meta)).write(&args.out)?;
    println!("wrote {}", args.out.display());
    eprintln!("# fit took {:.3}s", report.wall_secs);
    Ok(())
}

fn print_fit_report(family: &Family, report: &FitReport) {
    println!("family: {family}");
    println!(
        "observations: {} train / {} test ({} non-finite dropped, {} sub-epoch filtered)",
        report.n_train, report.n_test, report.n_dropped_nonfinite, report.n_filtered_regime
    );
    println!("objective: {}", report.objective);
    println!("train_wr2: {}", report.train_wr2);
    match report.test_wr2 {
        Some(v) => println!("test_wr2: {v}"),
        None => println!("test_wr2: n/a"),
    }
    println!("params:");
    for (name, value) in report.law.named_values() {
        println!("  {name} = {value}");
    }
}

/// Drops non-finite losses and, unless allowed, sub-epoch observations.
fn filter_runs(
    runs: Vec<RunObservation>,
    allow_sub_epoch: bool,
) -> Result<(Vec<RunObservation>, usize, usize), CliError> {
    let mut kept = Vec::with_capacity(runs.len());
    let mut n_nonfinite = 0usize;
    let mut n_regime = 0usize;
    for obs in runs {
        obs.validate()?;
        if !obs.loss.is_finite() {
            n_nonfinite += 1;
        } else if !allow_sub_epoch && obs.repetition() < 1.0 {
            n_regime += 1;
        } else {
            kept.push(obs);
        }
    }
    if kept.is_empty() {
        return Err(CliError::Lib(Error::EmptyDataset(
            "no observations left after filtering".into(),
        )));
    }
    Ok((kept, n_nonfinite, n_regime))
}

fn log_budgets(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || lo == hi {
        return vec![hi];
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == k - 1 {
                hi
            } else {
                (ln_lo + (ln_hi - ln_lo) * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect()
}

fn opt_str<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Lib(Error::Parse { line: None, msg: e.to_string() }))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| CliError::Lib(Error::Parse { line: None, msg: e.to_string() }))?;
    }
    w.into_inner().map_err(|e| CliError::Lib(Error::Parse { line: None, msg: e.to_string() }))
}

/// Everything eval derives from one surface at one budget.
struct BudgetEval {
    budget: f64,
    h_pred: f64,
    r_pred: f64,
    loss_pred: f64,
    h_emp: f64,
    r_emp: f64,
    wasted: f64,
}

fn eval_surfaces(
    surfaces: &[LossSurface],
    law: &Law,
    budgets_per_group: usize,
    allow_sub_epoch: bool,
) -> Vec<(usize, Vec<BudgetEval>)> {
    let plan_cfg = PlanConfig { require_full_pass: !allow_sub_epoch, ..PlanConfig::default() };
    let mut out = Vec::new();
    for (si, surface) in surfaces.iter().enumerate() {
        let Some((lo, hi)) = surface.budget_range_intersection() else {
            log::warn!("surface {} has no shared budget range; skipping", surface.label());
            continue;
        };
        let mut evals = Vec::new();
        for budget in log_budgets(lo, hi, budgets_per_group) {
            let plan = match planner::plan_single(law, budget, surface.d_target, surface.model_size, &plan_cfg)
            {
                Ok(p) => p,
                Err(e) => {
                    log::warn!(
                        "planning failed on surface {} at budget {budget}: {e}",
                        surface.label()
                    );
                    continue;
                }
            };
            let wasted = match metrics::wasted_fraction(surface, plan.h_star, budget) {
                Ok(w) => w.fraction,
                Err(e) => {
                    log::warn!(
                        "wasted-compute failed on surface {} at budget {budget}: {e}",
                        surface.label()
                    );
                    continue;
                }
            };
            let env = match surface.envelope_at(budget) {
                Ok(p) => p,
                Err(e) => {
                    log::warn!("no envelope on surface {} at budget {budget}: {e}", surface.label());
                    continue;
                }
            };
            evals.push(BudgetEval {
                budget,
                h_pred: plan.h_star,
                r_pred: plan.r_star,
                loss_pred: plan.predicted_loss,
                h_emp: env.h,
                r_emp: env.h * budget / surface.d_target,
                wasted,
            });
        }
        out.push((si, evals));
    }
    out
}

fn wasted_summary(values: &[f64]) -> (String, String, String) {
    if values.is_empty() {
        return ("n/a".into(), "n/a".into(), "n/a".into());
    }
    let med = metrics::median(values).unwrap();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let p90 = metrics::quantile_nearest_rank(values, 0.9).unwrap();
    (format!("{med}"), format!("{mean}"), format!("{p90}"))
}

fn hstar_summary(evals: &[(usize, Vec<BudgetEval>)]) -> String {
    let mut pred = Vec::new();
    let mut emp = Vec::new();
    for (_, list) in evals {
        for e in list {
            if e.h_emp > 0.0 {
                pred.push(e.h_pred);
                emp.push(e.h_emp);
            } else {
                log::warn!(
                    "empirical optimum is h=0 at budget {}; skipping log-ratio pair",
                    e.budget
                );
            }
        }
    }
    match metrics::hstar_log_error(&pred, &emp) {
        Ok(v) => format!("{v}"),
        Err(_) => "n/a".into(),
    }
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    if args.budgets_per_group == 0 {
        return Err(CliError::Usage("--budgets-per-group must be >= 1".into()));
    }
    let law = LawFile::read(&args.law)?.law()?;
    let runs = runlog::read_runs(&args.runs)?;
    let (kept, n_nonfinite, n_regime) = filter_runs(runs, args.allow_sub_epoch)?;
    println!(
        "observations: {} kept ({n_nonfinite} non-finite dropped, {n_regime} sub-epoch filtered)",
        kept.len()
    );
    let metric = args.metric.as_str();
    if metric == "wr2" || metric == "all" {
        let preds: Vec<f64> = kept
            .iter()
            .map(|o| law.loss(&o.query()))
            .collect::<Result<_, Error>>()?;
        let wr2 = metrics::weighted_r2_obs(&preds, &kept, args.epsilon)?;
        println!("wr2: {wr2}");
    }
    let needs_surfaces = metric != "wr2" || args.emit.is_some();
    if !needs_surfaces {
        return Ok(());
    }
    let surfaces = LossSurface::from_observations(&kept)?;
    println!("surfaces: {}", surfaces.len());
    let evals = eval_surfaces(&surfaces, &law, args.budgets_per_group, args.allow_sub_epoch);
    if metric == "wasted" || metric == "all" {
        let wasted: Vec<f64> =
            evals.iter().flat_map(|(_, l)| l.iter().map(|e| e.wasted)).collect();
        let (med, mean, p90) = wasted_summary(&wasted);
        println!("wasted_median: {med}");
        println!("wasted_mean: {mean}");
        println!("wasted_p90: {p90}");
    }
    if metric == "hstar-error" || metric == "all" {
        println!("hstar_log_error: {}", hstar_summary(&evals));
    }
    if let Some(dir) = &args.emit {
        emit_surfaces(dir, &surfaces, &evals)?;
        println!("emitted curves.csv, envelope.csv, optimal_r.csv to {}", dir.display());
    }
    Ok(())
}

fn emit_surfaces(
    dir: &Path,
    surfaces: &[LossSurface],
    evals: &[(usize, Vec<BudgetEval>)],
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Lib(Error::Io(e)))?;
    let mut curve_rows = Vec::new();
    let mut env_rows = Vec::new();
    for s in surfaces {
        let ms = opt_str(&s.model_size);
        let dom = opt_str(&s.domain);
        for c in &s.curves {
            for &(d, l) in &c.points {
                curve_rows.push(vec![
                    ms.clone(),
                    format!("{}", s.d_target),
                    dom.clone(),
                    format!("{}", c.h),
                    format!("{d}"),
                    format!("{l}"),
                ]);
            }
        }
        for p in s.envelope().map_err(CliError::Lib)? {
            env_rows.push(vec![
                ms.clone(),
                format!("{}", s.d_target),
                dom.clone(),
                format!("{}", p.d_total),
                format!("{}", p.loss),
                format!("{}", p.h),
            ]);
        }
    }
    let mut opt_rows = Vec::new();
    for (si, list) in evals {
        let s = &surfaces[*si];
        let ms = opt_str(&s.model_size);
        let dom = opt_str(&s.domain);
        for e in list {
            opt_rows.push(vec![
                ms.clone(),
                format!("{}", s.d_target),
                dom.clone(),
                format!("{}", e.budget),
                format!("{}", e.h_pred),
                format!("{}", e.r_pred),
                format!("{}", e.loss_pred),
                format!("{}", e.h_emp),
                format!("{}", e.r_emp),
            ]);
        }
    }
    mixlaw::io::atomic_write(
        &dir.join("curves.csv"),
        &csv_bytes(&["model_size", "d_target", "domain", "h", "d_total", "loss"], &curve_rows)?,
    )?;
    mixlaw::io::atomic_write(
        &dir.join("envelope.csv"),
        &csv_bytes(&["model_size", "d_target", "domain", "d_total", "loss", "h_star"], &env_rows)?,
    )?;
    mixlaw::io::atomic_write(
        &dir.join("optimal_r.csv"),
        &csv_bytes(
            &[
                "model_size",
                "d_target",
                "domain",
                "d_total",
                "h_pred",
                "r_pred",
                "loss_pred",
                "h_emp",
                "r_emp",
            ],
            &opt_rows,
        )?,
    )?;
    Ok(())
}

fn run_plan(args: PlanArgs) -> Result<(), CliError> {
    let cfg = PlanConfig {
        grid_points: args.grid_points,
        h_min: args.h_min,
        h_max: args.h_max,
        require_full_pass: !args.allow_sub_epoch,
    };
    if let Some(multi_path) = &args.multi {
        let spec = MultiSpec::read(multi_path)?;
        let base = multi_path.parent().unwrap_or(Path::new("."));
        let domains = spec.load_domains(base)?;
        let plan = planner::plan_multi(&domains, args.budget, &cfg)?;
        println!("budget: {}", args.budget);
        println!("domain h_star r_star predicted_loss");
        for p in &plan.plans {
            println!("{} {} {} {}", p.name, p.h_star, p.r_star, p.predicted_loss);
        }
        println!("total_h: {}", plan.total_h);
        println!("feasible: {}", if plan.feasible { "yes" } else { "no" });
        let h_total = if plan.feasible { plan.total_h } else { 0.9 };
        if let Some(scaled) = &plan.suggested_rescale {
            println!("suggested_rescale (sums to 0.9, not applied):");
            for (p, s) in plan.plans.iter().zip(scaled) {
                println!("  {} {}", p.name, s);
            }
        }
        let pools: Vec<(String, f64)> =
            domains.iter().map(|d| (d.name.clone(), d.d_target)).collect();
        let weights = planner::weighting_strategies(h_total, &pools)?;
        println!("weighting of h_total={h_total} by strategy:");
        println!("domain equal proportional");
        for w in &weights {
            println!("{} {} {}", w.name, w.equal, w.proportional);
        }
        return Ok(());
    }
    let law = LawFile::read(args.law.as_ref().unwrap())?.law()?;
    let d_target = args.d_target.unwrap();
    let plan = planner::plan_single(&law, args.budget, d_target, args.model_size, &cfg)?;
    println!("budget: {}", args.budget);
    println!("h_star: {}", plan.h_star);
    println!("r_star: {}", plan.r_star);
    println!("predicted_loss: {}", plan.predicted_loss);
    if let Some(sweep) = &args.sweep {
        let curve = planner::predicted_optimal_r_curve(&law, sweep, d_target, args.model_size, &cfg)?;
        println!("sweep:");
        println!("budget h_star r_star predicted_loss");
        for (budget, p) in &curve {
            println!("{} {} {} {}", budget, p.h_star, p.r_star, p.predicted_loss);
        }
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec::read(&args.spec)?;
    let runs = synth::generate(&spec)?;
    runlog::write_runs(&args.out, &runs)?;
    println!("observations: {}", runs.len());
    println!("wrote {}", args.out.display());
    Ok(())
}

struct CompareRow {
    family: Family,
    outcome: Result<(FitReport, String, String, String), Error>,
}

fn run_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.budgets_per_group == 0 {
        return Err(CliError::Usage("--budgets-per-group must be >= 1".into()));
    }
    let threads = threads_from_env()?;
    let runs = runlog::read_runs(&args.runs)?;
    let families: Vec<Family> = match &args.families {
        Some(f) => f.clone(),
        None => {
            let all_sized = runs.iter().all(|o| o.model_size.is_some());
            let mut sizes: Vec<u64> =
                runs.iter().filter_map(|o| o.model_size).map(f64::to_bits).collect();
            sizes.sort_unstable();
            sizes.dedup();
            if all_sized && sizes.len() >= 2 {
                Family::SIZE_SET.to_vec()
            } else {
                Family::FIXED_SET.to_vec()
            }
        }
    };
    println!(
        "families: {}",
        families.iter().map(|f| f.id()).collect::<Vec<_>>().join(", ")
    );
    let (kept, n_nonfinite, n_regime) = filter_runs(runs.clone(), args.allow_sub_epoch)?;
    println!(
        "observations: {} kept ({n_nonfinite} non-finite dropped, {n_regime} sub-epoch filtered)",
        kept.len()
    );
    let surfaces = LossSurface::from_observations(&kept)?;
    let mut rows = Vec::new();
    for family in &families {
        let mut cfg = FitConfig::new(*family);
        cfg.split = args.split;
        cfg.restarts = args.restarts;
        cfg.hops = args.hops;
        cfg.seed = args.seed;
        cfg.epsilon = args.epsilon;
        cfg.huber_delta = args.huber_delta;
        cfg.regime_filter = !args.allow_sub_epoch;
        cfg.allow_negative_gamma = args.allow_negative_gamma;
        cfg.allow_positive_decay = args.allow_positive_decay;
        cfg.threads = threads;
        let outcome = match fitting::fit(&runs, &cfg) {
            Ok(report) => {
                let evals =
                    eval_surfaces(&surfaces, &report.law, args.budgets_per_group, args.allow_sub_epoch);
                let wasted: Vec<f64> =
                    evals.iter().flat_map(|(_, l)| l.iter().map(|e| e.wasted)).collect();
                let (med, mean, p90) = wasted_summary(&wasted);
                Ok((report, med, mean, p90))
            }
            Err(e) => Err(e),
        };
        rows.push(CompareRow { family: *family, outcome });
    }
    // Rank by held-out fit quality (training fit when there is no holdout).
    rows.sort_by(|a, b| {
        let key = |r: &CompareRow| match &r.outcome {
            Ok((rep, ..)) => rep.test_wr2.unwrap_or(rep.train_wr2),
            Err(_) => f64::NEG_INFINITY,
        };
        key(b).total_cmp(&key(a)).then_with(|| a.family.id().cmp(b.family.id()))
    });
    println!("family params train_wr2 test_wr2 objective wasted_med wasted_mean wasted_p90");
    for row in &rows {
        match &row.outcome {
            Ok((rep, med, mean, p90)) => {
                let test = rep.test_wr2.map(|v| format!("{v:.6}")).unwrap_or("n/a".into());
                println!(
                    "{} {} {:.6} {} {:.6e} {} {} {}",
                    row.family.id(),
                    row.family.param_count(),
                    rep.train_wr2,
                    test,
                    rep.objective,
                    med,
                    mean,
                    p90
                );
            }
            Err(e) => println!("{} {} fit failed: {e}", row.family.id(), row.family.param_count()),
        }
    }
    let ranked: Vec<&str> =
        rows.iter().filter(|r| r.outcome.is_ok()).map(|r| r.family.id()).collect();
    if ranked.is_empty() {
        let first_err = rows
            .into_iter()
            .find_map(|r| r.outcome.err())
            .unwrap_or_else(|| Error::EmptyDataset("no families to compare".into()));
        return Err(CliError::Lib(first_err));
    }
    println!("ranking: {}", ranked.join(" > "));
    Ok(())
}
