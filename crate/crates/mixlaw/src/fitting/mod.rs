//! Law fitting: reweighted Huber objective minimized by basin-hopping
//! (random restarts, each alternating Nelder-Mead with bounded Gaussian
//! perturbations in transformed parameter space).
//!
//! Determinism: every restart draws from its own counter-derived RNG stream,
//! restarts are reduced by (objective, restart index), and objective sums run
//! in dataset order, so results are identical for any thread count.

pub mod nelder_mead;
pub mod transforms;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::law::{Family, Law};
use crate::metrics;
use crate::model::RunObservation;
use nelder_mead::{minimize, NelderMeadOptions};
use transforms::{specs_for, ParamSpec, Relaxations};

/// Train/test protocol applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// Fit on everything, no held-out set.
    None,
    /// Per run, checkpoints at or below the median step train; later ones test.
    HalfSteps,
    /// Runs at the largest model size are held out.
    HoldoutLargest,
}

impl SplitKind {
    pub fn id(&self) -> &'static str {
        match self {
            SplitKind::None => "none",
            SplitKind::HalfSteps => "half-steps",
            SplitKind::HoldoutLargest => "holdout-largest",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SplitKind::None),
            "half-steps" => Ok(SplitKind::HalfSteps),
            "holdout-largest" => Ok(SplitKind::HoldoutLargest),
            other => Err(Error::Schema(format!(
                "unknown split '{other}' (known: none, half-steps, holdout-largest)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub family: Family,
    /// Weight floor in omega = max(r * h, epsilon).
    pub epsilon: f64,
    /// Huber transition point, in nats of residual.
    pub huber_delta: f64,
    pub restarts: usize,
    /// Basin hops per restart.
    pub hops: usize,
    /// Gaussian perturbation scale in transformed space.
    pub hop_scale: f64,
    pub local_max_iters: usize,
    pub seed: u64,
    /// Drop observations with r < 1 before fitting.
    pub regime_filter: bool,
    pub split: SplitKind,
    pub allow_negative_gamma: bool,
    pub allow_positive_decay: bool,
    /// Natural-space bound overrides, one pair per parameter.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Natural-space start for restart 0 (others stay random).
    pub initial: Option<Vec<f64>>,
    /// Cap on fitting parallelism; None uses the global pool.
    pub threads: Option<usize>,
}

impl FitConfig {
    pub fn new(family: Family) -> Self {
        FitConfig {
            family,
            epsilon: 0.01,
            huber_delta: 1e-3,
            restarts: 100,
            hops: 10,
            hop_scale: 0.5,
            local_max_iters: 2000,
            seed: 0,
            regime_filter: true,
            split: SplitKind::None,
            allow_negative_gamma: false,
            allow_positive_decay: false,
            bounds: None,
            initial: None,
            threads: None,
        }
    }

    fn relaxations(&self) -> Relaxations {
        Relaxations {
            allow_negative_gamma: self.allow_negative_gamma,
            allow_positive_decay: self.allow_positive_decay,
        }
    }
}

/// Huber penalty: quadratic within `delta`, linear outside.
pub fn huber(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Observation weight omega = max(r * h, epsilon): heavily repeated,
/// high-weight mixtures carry the most signal about saturation.
pub fn observation_weight(r: f64, h: f64, epsilon: f64) -> f64 {
    (r * h).max(epsilon)
}

/// Weighted Huber objective of `law` on `dataset`, summed in dataset order.
///
/// Non-finite predictions yield +infinity (the optimizer treats the point as
/// a wall); structural failures (e.g. a size-aware law on data without model
/// sizes) are errors.
pub fn objective(
    dataset: &[RunObservation],
    law: &Law,
    epsilon: f64,
    huber_delta: f64,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("objective needs at least one observation".into()));
    }
    let mut acc = 0.0f64;
    for obs in dataset {
        let pred = law.loss(&obs.query())?;
        let res = obs.loss - pred;
        if !res.is_finite() {
            return Ok(f64::INFINITY);
        }
        let w = observation_weight(obs.repetition(), obs.h, epsilon);
        acc += w * huber(res, huber_delta);
    }
    Ok(acc)
}

/// Splits each run at its median step; boundary checkpoints train.
pub fn split_half_steps(
    dataset: &[RunObservation],
) -> Result<(Vec<RunObservation>, Vec<RunObservation>)> {
    use std::collections::BTreeMap;
    let mut steps_by_run: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for obs in dataset {
        let step = obs.step.ok_or_else(|| {
            Error::Split(format!("run {} has a checkpoint without a step", obs.run_id))
        })?;
        steps_by_run.entry(&obs.run_id).or_default().push(step);
    }
    let mut medians: BTreeMap<&str, f64> = BTreeMap::new();
    for (run, steps) in steps_by_run.iter_mut() {
        if steps.len() < 2 {
            return Err(Error::Split(format!(
                "run {run} has only {} checkpoint(s); need at least 2 to split",
                steps.len()
            )));
        }
        steps.sort_unstable();
        let m = steps.len() / 2;
        let median = if steps.len() % 2 == 0 {
            (steps[m - 1] as f64 + steps[m] as f64) / 2.0
        } else {
            steps[m] as f64
        };
        medians.insert(run, median);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for obs in dataset {
        let median = medians[obs.run_id.as_str()];
        if obs.step.unwrap() as f64 <= median {
            train.push(obs.clone());
        } else {
            test.push(obs.clone());
        }
    }
    Ok((train, test))
}

/// Holds out every observation at the largest model size.
pub fn split_holdout_largest(
    dataset: &[RunObservation],
) -> Result<(Vec<RunObservation>, Vec<RunObservation>)> {
    let mut sizes = Vec::new();
    for obs in dataset {
        let n = obs.model_size.ok_or_else(|| {
            Error::Split(format!("run {} has no model_size; size holdout impossible", obs.run_id))
        })?;
        sizes.push(n);
    }
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::Split(
            "dataset has a single model size; size holdout impossible".into(),
        ));
    }
    let largest = *sizes.last().unwrap();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for obs in dataset {
        if obs.model_size.unwrap() == largest {
            test.push(obs.clone());
        } else {
            train.push(obs.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub law: Law,
    /// Objective of `law` on the training set; re-evaluating reproduces it.
    pub objective: f64,
    /// Best objective of each restart, in restart order.
    pub restart_objectives: Vec<f64>,
    pub train_wr2: f64,
    pub test_wr2: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_filtered_regime: usize,
    pub n_dropped_nonfinite: usize,
    pub wall_secs: f64,
}

struct Prepared {
    train: Vec<RunObservation>,
    test: Vec<RunObservation>,
    n_filtered_regime: usize,
    n_dropped_nonfinite: usize,
}

fn prepare(dataset: &[RunObservation], cfg: &FitConfig) -> Result<Prepared> {
    for obs in dataset {
        obs.validate()?;
    }
    let mut finite = Vec::with_capacity(dataset.len());
    let mut n_dropped_nonfinite = 0usize;
    for obs in dataset {
        if obs.loss.is_finite() {
            finite.push(obs.clone());
        } else {
            n_dropped_nonfinite += 1;
        }
    }
    if n_dropped_nonfinite > 0 {
        log::warn!("dropped {n_dropped_nonfinite} observation(s) with non-finite loss");
    }
    let mut kept = Vec::with_capacity(finite.len());
    let mut n_filtered_regime = 0usize;
    if cfg.regime_filter {
        for obs in finite {
            if obs.repetition() >= 1.0 {
                kept.push(obs);
            } else {
                n_filtered_regime += 1;
            }
        }
    } else {
        kept = finite;
    }
    let (train, test) = match cfg.split {
        SplitKind::None => (kept, Vec::new()),
        SplitKind::HalfSteps => split_half_steps(&kept)?,
        SplitKind::HoldoutLargest => split_holdout_largest(&kept)?,
    };
    if cfg.family.requires_model_size() {
        for obs in train.iter().chain(test.iter()) {
            if obs.model_size.is_none() {
                return Err(Error::MissingModelSize(format!(
                    "family {} needs model_size on every observation (run {})",
                    cfg.family, obs.run_id
                )));
            }
        }
    }
    let need = 2 * cfg.family.param_count();
    if train.len() < need {
        return Err(Error::InsufficientData(format!(
            "family {} needs at least {need} training observations, have {}",
            cfg.family,
            train.len()
        )));
    }
    Ok(Prepared { train, test, n_filtered_regime, n_dropped_nonfinite })
}

fn to_natural(specs: &[ParamSpec], t: &[f64]) -> Vec<f64> {
    specs.iter().zip(t).map(|(s, v)| s.transform.to_natural(*v)).collect()
}

/// Fits `cfg.family` to `dataset` under `cfg`.
pub fn fit(dataset: &[RunObservation], cfg: &FitConfig) -> Result<FitReport> {
    let started = Instant::now();
    if cfg.restarts == 0 {
        return Err(Error::Domain("restarts must be >= 1".into()));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon = {} must be finite and > 0", cfg.epsilon)));
    }
    if !(cfg.huber_delta > 0.0 && cfg.huber_delta.is_finite()) {
        return Err(Error::Domain(format!(
            "huber_delta = {} must be finite and > 0",
            cfg.huber_delta
        )));
    }
    let prepared = prepare(dataset, cfg)?;
    let specs = specs_for(cfg.family, &cfg.relaxations(), cfg.bounds.as_deref())?;
    let t_bounds: Vec<(f64, f64)> = specs.iter().map(|s| s.transformed_bounds()).collect();
    let dim = specs.len();

    let initial_t: Option<Vec<f64>> = match &cfg.initial {
        Some(nat) => {
            if nat.len() != dim {
                return Err(Error::Domain(format!(
                    "initial point has {} values, family {} has {dim} parameters",
                    nat.len(),
                    cfg.family
                )));
            }
            let mut t = Vec::with_capacity(dim);
            for (spec, (x, (lo, hi))) in specs.iter().zip(nat.iter().zip(&t_bounds)) {
                let v = spec.transform.from_natural(*x);
                if v.is_nan() {
                    return Err(Error::Domain(format!(
                        "initial value {x} for {} is outside its transform domain",
                        spec.name
                    )));
                }
                t.push(v.clamp(*lo, *hi));
            }
            Some(t)
        }
        None => None,
    };

    let train = &prepared.train;
    let family = cfg.family;
    let eval_transformed = |t: &[f64]| -> f64 {
        let nat = to_natural(&specs, t);
        let law = match Law::from_values(family, &nat) {
            Ok(l) => l,
            Err(_) => return f64::INFINITY,
        };
        match objective(train, &law, cfg.epsilon, cfg.huber_delta) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };

    let nm_opts = NelderMeadOptions {
        max_iters: cfg.local_max_iters,
        ..Default::default()
    };

    let run_restart = |idx: usize| -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(idx as u64 + 1);
        let x0: Vec<f64> = match (&initial_t, idx) {
            (Some(t), 0) => t.clone(),
            _ => t_bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect(),
        };
        let mut eval = |t: &[f64]| eval_transformed(t);
        let first = minimize(&mut eval, &x0, &t_bounds, &nm_opts);
        let mut best_f = first.f;
        let mut best_x = first.x;
        for _ in 0..cfg.hops {
            let cand: Vec<f64> = best_x
                .iter()
                .zip(&t_bounds)
                .map(|(x, (lo, hi))| {
                    let z: f64 = rng.sample(StandardNormal);
                    (x + cfg.hop_scale * z).clamp(*lo, *hi)
                })
                .collect();
            let hopped = minimize(&mut eval, &cand, &t_bounds, &nm_opts);
            if hopped.f < best_f {
                best_f = hopped.f;
                best_x = hopped.x;
            }
        }
        (best_f, best_x)
    };

    let run_all = || -> Vec<(f64, Vec<f64>)> {
        (0..cfg.restarts).into_par_iter().map(run_restart).collect()
    };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };

    let restart_objectives: Vec<f64> = results.iter().map(|(f, _)| *f).collect();
    let mut best_idx = 0usize;
    for (idx, (f, _)) in results.iter().enumerate() {
        if *f < results[best_idx].0 {
            best_idx = idx;
        }
    }
    let (best_f, best_t) = &results[best_idx];
    let naturals = to_natural(&specs, best_t);
    if !best_f.is_finite() {
        return Err(Error::NonFiniteObjective { objective: *best_f, params: naturals });
    }
    let law = Law::from_values(family, &naturals)?;
    law.validate()?;
    let obj = objective(train, &law, cfg.epsilon, cfg.huber_delta)?;

    let preds_train: Vec<f64> =
        train.iter().map(|o| law.loss(&o.query())).collect::<Result<_>>()?;
    let train_wr2 = metrics::weighted_r2_obs(&preds_train, train, cfg.epsilon)?;
    let test_wr2 = if prepared.test.is_empty() {
        None
    } else {
        let preds: Vec<f64> = prepared
            .test
            .iter()
            .map(|o| law.loss(&o.query()))
            .collect::<Result<_>>()?;
        Some(metrics::weighted_r2_obs(&preds, &prepared.test, cfg.epsilon)?)
    };

    Ok(FitReport {
        law,
        objective: obj,
        restart_objectives,
        train_wr2,
        test_wr2,
        n_train: train.len(),
        n_test: prepared.test.len(),
        n_filtered_regime: prepared.n_filtered_regime,
        n_dropped_nonfinite: prepared.n_dropped_nonfinite,
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

/// The train/test halves `fit` would use, for callers that evaluate further
/// metrics on the same protocol.
pub fn prepared_split(
    dataset: &[RunObservation],
    cfg: &FitConfig,
) -> Result<(Vec<RunObservation>, Vec<RunObservation>)> {
    let p = prepare(dataset, cfg)?;
    Ok((p.train, p.test))
}
