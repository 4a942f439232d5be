//! Choosing mixture weights ahead of a run from an already fitted law.
//!
//! Optimization is a dense log-spaced grid search over h: the loss along h
//! is cheap, one-dimensional and can be multimodal near the full-pass
//! boundary, so a grid beats local search here and its resolution is an
//! explicit, reportable quantity.

use crate::error::{Error, Result};
use crate::law::Law;
use crate::model::MixtureQuery;

#[derive(Debug, Clone, Copy)]
pub struct PlanConfig {
    pub grid_points: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Only consider mixtures that repeat the target pool at least once.
    pub require_full_pass: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { grid_points: 400, h_min: 1e-4, h_max: 1.0, require_full_pass: true }
    }
}

impl PlanConfig {
    fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points, got {}",
                self.grid_points
            )));
        }
        if !(self.h_min > 0.0 && self.h_min.is_finite()) {
            return Err(Error::Domain(format!("h_min = {} must be finite and > 0", self.h_min)));
        }
        if !(self.h_max > self.h_min && self.h_max <= 1.0) {
            return Err(Error::Domain(format!(
                "h_max = {} must lie in (h_min, 1]",
                self.h_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub h: f64,
    pub r: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub h_star: f64,
    pub r_star: f64,
    pub predicted_loss: f64,
    /// Every evaluated candidate, ascending in h.
    pub grid: Vec<GridPoint>,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (ln_lo + (ln_hi - ln_lo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Best mixture weight for one target domain at a fixed budget.
pub fn plan_single(
    law: &Law,
    d_total: f64,
    d_target: f64,
    model_size: Option<f64>,
    cfg: &PlanConfig,
) -> Result<PlanResult> {
    cfg.validate()?;
    if !(d_total > 0.0 && d_total.is_finite()) {
        return Err(Error::Domain(format!("d_total = {d_total} must be finite and > 0")));
    }
    if !(d_target > 0.0 && d_target.is_finite()) {
        return Err(Error::Domain(format!("d_target = {d_target} must be finite and > 0")));
    }
    let mut grid = Vec::with_capacity(cfg.grid_points);
    for h in log_grid(cfg.h_min, cfg.h_max, cfg.grid_points) {
        let r = h * d_total / d_target;
        if cfg.require_full_pass && r < 1.0 {
            continue;
        }
        let loss = law.loss(&MixtureQuery { d_total, h, d_target, model_size })?;
        if !loss.is_finite() {
            return Err(Error::Domain(format!(
                "law predicts non-finite loss at h={h}, budget {d_total}"
            )));
        }
        grid.push(GridPoint { h, r, loss });
    }
    if grid.is_empty() {
        return Err(Error::Domain(format!(
            "every candidate mixture weight is sub-epoch (r < 1) at budget {d_total} with \
             target pool {d_target}; raise the budget or allow sub-epoch mixtures \
             (--allow-sub-epoch)"
        )));
    }
    let mut best = 0usize;
    for (i, p) in grid.iter().enumerate() {
        if p.loss < grid[best].loss {
            best = i;
        }
    }
    let b = grid[best];
    Ok(PlanResult { h_star: b.h, r_star: b.r, predicted_loss: b.loss, grid })
}

/// Optimal repetition factor across a sweep of budgets (ascending).
pub fn predicted_optimal_r_curve(
    law: &Law,
    budgets: &[f64],
    d_target: f64,
    model_size: Option<f64>,
    cfg: &PlanConfig,
) -> Result<Vec<(f64, PlanResult)>> {
    if budgets.is_empty() {
        return Err(Error::EmptyDataset("no budgets to sweep".into()));
    }
    for w in budgets.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain(format!(
                "budgets must be strictly ascending ({} then {})",
                w[0], w[1]
            )));
        }
    }
    budgets
        .iter()
        .map(|&d| plan_single(law, d, d_target, model_size, cfg).map(|p| (d, p)))
        .collect()
}

/// One target domain in a joint plan.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub law: Law,
    pub d_target: f64,
    pub model_size: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DomainPlan {
    pub name: String,
    pub h_star: f64,
    pub r_star: f64,
    pub predicted_loss: f64,
}

#[derive(Debug, Clone)]
pub struct MultiPlan {
    pub plans: Vec<DomainPlan>,
    /// Sum of the per-domain optimal weights.
    pub total_h: f64,
    /// Whether the independent optima leave room for generic data.
    pub feasible: bool,
    /// Weights rescaled to sum to 0.9, same order as `plans`. Only a
    /// suggestion: the per-domain laws say nothing about joint interactions.
    pub suggested_rescale: Option<Vec<f64>>,
}

/// Plans each domain independently at the shared budget and checks that the
/// combined mixture stays feasible.
pub fn plan_multi(domains: &[DomainSpec], d_total: f64, cfg: &PlanConfig) -> Result<MultiPlan> {
    if domains.is_empty() {
        return Err(Error::EmptyDataset("no domains to plan".into()));
    }
    for (i, a) in domains.iter().enumerate() {
        for b in &domains[i + 1..] {
            if a.name == b.name {
                return Err(Error::Domain(format!("duplicate domain name '{}'", a.name)));
            }
        }
    }
    let mut plans = Vec::with_capacity(domains.len());
    for d in domains {
        let p = plan_single(&d.law, d_total, d.d_target, d.model_size, cfg)?;
        plans.push(DomainPlan {
            name: d.name.clone(),
            h_star: p.h_star,
            r_star: p.r_star,
            predicted_loss: p.predicted_loss,
        });
    }
    let total_h: f64 = plans.iter().map(|p| p.h_star).sum();
    let feasible = total_h < 1.0;
    let suggested_rescale =
        if feasible { None } else { Some(plans.iter().map(|p| p.h_star * 0.9 / total_h).collect()) };
    Ok(MultiPlan { plans, total_h, feasible, suggested_rescale })
}

/// How a fixed total target weight is divided among domains.
#[derive(Debug, Clone)]
pub struct DomainWeights {
    pub name: String,
    /// h_total split evenly.
    pub equal: f64,
    /// h_total split in proportion to pool size.
    pub proportional: f64,
}

pub fn weighting_strategies(h_total: f64, pools: &[(String, f64)]) -> Result<Vec<DomainWeights>> {
    if !(h_total > 0.0 && h_total < 1.0) {
        return Err(Error::Domain(format!("h_total = {h_total} must lie in (0, 1)")));
    }
    if pools.is_empty() {
        return Err(Error::EmptyDataset("no domain pools".into()));
    }
    let mut sum = 0.0;
    for (name, d) in pools {
        if !(d.is_finite() && *d > 0.0) {
            return Err(Error::Domain(format!("pool size {d} for '{name}' must be > 0")));
        }
        sum += d;
    }
    let k = pools.len() as f64;
    Ok(pools
        .iter()
        .map(|(name, d)| DomainWeights {
            name: name.clone(),
            equal: h_total / k,
            proportional: h_total * d / sum,
        })
        .collect())
}
