//! Empirical loss surfaces and the evaluation metrics computed on them.
//!
//! A surface collects runs that share (model size, target-domain pool,
//! domain) and differ only in mixture weight and budget. Interpolation is
//! linear in ln(budget) along a curve and linear in ln(h) across curves
//! (linear in h when the lower neighbor is h = 0).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::observation_weight;
use crate::model::RunObservation;

/// One mixture weight's loss-vs-budget measurements, ascending in budget.
#[derive(Debug, Clone)]
pub struct Curve {
    pub h: f64,
    /// (d_total, loss) pairs, strictly ascending in d_total.
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn min_budget(&self) -> f64 {
        self.points.first().map(|p| p.0).unwrap_or(f64::NAN)
    }

    pub fn max_budget(&self) -> f64 {
        self.points.last().map(|p| p.0).unwrap_or(f64::NAN)
    }

    pub fn covers(&self, d_total: f64) -> bool {
        !self.points.is_empty() && d_total >= self.min_budget() && d_total <= self.max_budget()
    }

    /// Loss at `d_total`, linear in ln(budget) between measurements.
    pub fn loss_at_budget(&self, d_total: f64) -> Result<f64> {
        if !self.covers(d_total) {
            return Err(Error::OutOfRange(format!(
                "budget {d_total} outside curve h={} range [{}, {}]",
                self.h,
                self.min_budget(),
                self.max_budget()
            )));
        }
        let i = self.points.partition_point(|p| p.0 < d_total);
        if self.points[i].0 == d_total {
            return Ok(self.points[i].1);
        }
        let (d_lo, l_lo) = self.points[i - 1];
        let (d_hi, l_hi) = self.points[i];
        let t = (d_total.ln() - d_lo.ln()) / (d_hi.ln() - d_lo.ln());
        Ok((1.0 - t) * l_lo + t * l_hi)
    }
}

/// The mixture weight and loss the surface attains when budget is spent
/// optimally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub d_total: f64,
    pub loss: f64,
    pub h: f64,
}

/// Runs sharing (model size, target pool size, domain), organized as one
/// curve per mixture weight.
#[derive(Debug, Clone)]
pub struct LossSurface {
    pub model_size: Option<f64>,
    pub d_target: f64,
    pub domain: Option<String>,
    /// Ascending in h.
    pub curves: Vec<Curve>,
}

fn canonical_h(h: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        h
    }
}

impl LossSurface {
    /// Groups observations into surfaces. Losses must be finite; duplicate
    /// (h, d_total) measurements within a group are ambiguous and rejected.
    pub fn from_observations(observations: &[RunObservation]) -> Result<Vec<LossSurface>> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset("no observations to build surfaces from".into()));
        }
        type Key = (Option<u64>, u64, Option<String>);
        let mut groups: BTreeMap<Key, BTreeMap<u64, Vec<(f64, f64)>>> = BTreeMap::new();
        for obs in observations {
            obs.validate()?;
            if !obs.loss.is_finite() {
                return Err(Error::Domain(format!(
                    "run {} has non-finite loss; filter before building surfaces",
                    obs.run_id
                )));
            }
            let key = (
                obs.model_size.map(f64::to_bits),
                obs.d_target.to_bits(),
                obs.domain.clone(),
            );
            groups
                .entry(key)
                .or_default()
                .entry(canonical_h(obs.h).to_bits())
                .or_default()
                .push((obs.d_total, obs.loss));
        }
        let mut surfaces = Vec::with_capacity(groups.len());
        for ((n_bits, t_bits, domain), by_h) in groups {
            let mut curves = Vec::with_capacity(by_h.len());
            for (h_bits, mut points) in by_h {
                let h = f64::from_bits(h_bits);
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in points.windows(2) {
                    if w[0].0 == w[1].0 {
                        return Err(Error::Domain(format!(
                            "duplicate measurement at h={h}, d_total={} (losses {} and {})",
                            w[0].0, w[0].1, w[1].1
                        )));
                    }
                }
                curves.push(Curve { h, points });
            }
            surfaces.push(LossSurface {
                model_size: n_bits.map(f64::from_bits),
                d_target: f64::from_bits(t_bits),
                domain,
                curves,
            });
        }
        Ok(surfaces)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.model_size {
            parts.push(format!("N={n}"));
        }
        parts.push(format!("d_target={}", self.d_target));
        if let Some(d) = &self.domain {
            parts.push(format!("domain={d}"));
        }
        parts.join(" ")
    }

    pub fn h_range(&self) -> Result<(f64, f64)> {
        if self.curves.is_empty() {
            return Err(Error::EmptyDataset("surface has no curves".into()));
        }
        Ok((self.curves[0].h, self.curves[self.curves.len() - 1].h))
    }

    /// Budget interval covered by every curve at once, if any.
    pub fn budget_range_intersection(&self) -> Option<(f64, f64)> {
        let lo = self.curves.iter().map(Curve::min_budget).fold(f64::MIN, f64::max);
        let hi = self.curves.iter().map(Curve::max_budget).fold(f64::MAX, f64::min);
        if self.curves.is_empty() || !(lo <= hi) {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Loss at an arbitrary mixture weight and budget.
    pub fn loss_at(&self, h: f64, d_total: f64) -> Result<f64> {
        let h = canonical_h(h);
        let (h_min, h_max) = self.h_range()?;
        if let Some(curve) = self.curves.iter().find(|c| c.h == h) {
            return curve.loss_at_budget(d_total);
        }
        if h < h_min || h > h_max {
            return Err(Error::OutOfRange(format!(
                "h={h} outside measured range [{h_min}, {h_max}]"
            )));
        }
        let hi_idx = self.curves.partition_point(|c| c.h < h);
        let lo = &self.curves[hi_idx - 1];
        let hi = &self.curves[hi_idx];
        let l_lo = lo.loss_at_budget(d_total)?;
        let l_hi = hi.loss_at_budget(d_total)?;
        let t = if lo.h == 0.0 {
            (h - lo.h) / (hi.h - lo.h)
        } else {
            (h.ln() - lo.h.ln()) / (hi.h.ln() - lo.h.ln())
        };
        Ok((1.0 - t) * l_lo + t * l_hi)
    }

    /// Best loss over measured mixture weights at `d_total`; ties go to the
    /// smallest h.
    pub fn envelope_at(&self, d_total: f64) -> Result<EnvelopePoint> {
        let mut best: Option<EnvelopePoint> = None;
        for curve in &self.curves {
            if let Ok(loss) = curve.loss_at_budget(d_total) {
                let better = match &best {
                    None => true,
                    Some(b) => loss < b.loss,
                };
                if better {
                    best = Some(EnvelopePoint { d_total, loss, h: curve.h });
                }
            }
        }
        best.ok_or_else(|| {
            Error::OutOfRange(format!("no mixture-weight curve covers budget {d_total}"))
        })
    }

    /// Envelope sampled on the union of all measured budgets.
    pub fn envelope(&self) -> Result<Vec<EnvelopePoint>> {
        let grid = self.budget_grid();
        if grid.is_empty() {
            return Err(Error::EmptyDataset("surface has no measurements".into()));
        }
        grid.into_iter().map(|d| self.envelope_at(d)).collect()
    }

    fn budget_grid(&self) -> Vec<f64> {
        let mut grid: Vec<f64> =
            self.curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Repetition factor of the empirically best mixture weight at `d_total`.
    pub fn empirical_optimal_r(&self, d_total: f64) -> Result<f64> {
        let env = self.envelope_at(d_total)?;
        Ok(env.h * d_total / self.d_target)
    }
}

/// Weighted coefficient of determination.
///
/// Exact by construction: zero residual sum gives 1.0, predicting the
/// weighted mean gives 0.0, and zero target variance with nonzero residuals
/// gives -inf (as does a non-finite residual sum).
pub fn weighted_r2(preds: &[f64], targets: &[f64], weights: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() || preds.len() != weights.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} predictions, {} targets, {} weights",
            preds.len(),
            targets.len(),
            weights.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset("weighted r2 needs at least one point".into()));
    }
    let mut wsum = 0.0;
    for &w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Domain(format!("weight {w} must be finite and >= 0")));
        }
        wsum += w;
    }
    if wsum <= 0.0 {
        return Err(Error::Domain("weights sum to zero".into()));
    }
    let mut mean = 0.0;
    for (&w, &y) in weights.iter().zip(targets) {
        mean += w * y;
    }
    mean /= wsum;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&w, &y), &p) in weights.iter().zip(targets).zip(preds) {
        num += w * (y - p) * (y - p);
        den += w * (y - mean) * (y - mean);
    }
    if !num.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    if num == 0.0 {
        return Ok(1.0);
    }
    if den == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(1.0 - num / den)
}

/// `weighted_r2` with the fitting weights omega = max(r * h, epsilon).
pub fn weighted_r2_obs(
    preds: &[f64],
    observations: &[RunObservation],
    epsilon: f64,
) -> Result<f64> {
    let targets: Vec<f64> = observations.iter().map(|o| o.loss).collect();
    let weights: Vec<f64> =
        observations.iter().map(|o| observation_weight(o.repetition(), o.h, epsilon)).collect();
    weighted_r2(preds, &targets, &weights)
}

#[derive(Debug, Clone, Copy)]
pub struct WastedReport {
    /// Fraction of `d_total` that optimal mixing would not have needed.
    pub fraction: f64,
    /// Budget at which the envelope first matches the predicted mixture's
    /// loss.
    pub d_prime: f64,
    /// Loss of the predicted mixture weight at `d_total`.
    pub target_loss: f64,
    /// The predicted h fell outside the measured range; fraction pinned to 1.
    pub out_of_range: bool,
    /// The raw envelope was not monotone and a running minimum was applied.
    pub smoothed: bool,
}

/// Compute wasted at budget `d_total` when training with mixture weight
/// `h_pred` instead of the empirically optimal one.
///
/// The envelope is evaluated on the measured-budget grid (plus `d_total`),
/// smoothed to be non-increasing, and the first budget where it reaches the
/// predicted mixture's loss is found by bisection with log-linear
/// interpolation between grid points.
pub fn wasted_fraction(surface: &LossSurface, h_pred: f64, d_total: f64) -> Result<WastedReport> {
    let (h_min, h_max) = surface.h_range()?;
    let h_pred = canonical_h(h_pred);
    if h_pred < h_min || h_pred > h_max {
        return Ok(WastedReport {
            fraction: 1.0,
            d_prime: f64::NAN,
            target_loss: f64::NAN,
            out_of_range: true,
            smoothed: false,
        });
    }
    let target_loss = surface.loss_at(h_pred, d_total)?;
    let mut grid = surface.budget_grid();
    match grid.binary_search_by(|g| g.total_cmp(&d_total)) {
        Ok(_) => {}
        Err(idx) => grid.insert(idx, d_total),
    }
    let mut env = Vec::with_capacity(grid.len());
    for &g in &grid {
        if let Ok(p) = surface.envelope_at(g) {
            env.push((g, p.loss));
        }
    }
    if env.is_empty() {
        return Err(Error::OutOfRange(format!(
            "no envelope coverage anywhere near budget {d_total}"
        )));
    }
    let mut smoothed = false;
    let mut running = f64::INFINITY;
    for point in env.iter_mut() {
        if point.1 > running {
            point.1 = running;
            smoothed = true;
        } else {
            running = point.1;
        }
    }
    let idx = env.partition_point(|&(_, l)| l > target_loss);
    if idx == env.len() {
        log::warn!(
            "envelope never reaches loss {target_loss} (best {}); reporting zero waste",
            env.last().unwrap().1
        );
        return Ok(WastedReport {
            fraction: 0.0,
            d_prime: d_total,
            target_loss,
            out_of_range: false,
            smoothed,
        });
    }
    let d_prime = if idx == 0 {
        env[0].0
    } else {
        let (d_lo, l_lo) = env[idx - 1];
        let (d_hi, l_hi) = env[idx];
        if l_hi == l_lo {
            d_hi
        } else {
            let t = (target_loss - l_lo) / (l_hi - l_lo);
            (d_lo.ln() + t * (d_hi.ln() - d_lo.ln())).exp()
        }
    };
    let fraction = (1.0 - d_prime / d_total).clamp(0.0, 1.0);
    Ok(WastedReport { fraction, d_prime, target_loss, out_of_range: false, smoothed })
}

/// Median absolute log10 ratio between predicted and empirical optimal
/// mixture weights. Even counts average the two central values.
pub fn hstar_log_error(h_pred: &[f64], h_emp: &[f64]) -> Result<f64> {
    if h_pred.len() != h_emp.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} predicted vs {} empirical",
            h_pred.len(),
            h_emp.len()
        )));
    }
    if h_pred.is_empty() {
        return Err(Error::EmptyDataset("no mixture-weight pairs".into()));
    }
    let mut errs = Vec::with_capacity(h_pred.len());
    for (&p, &e) in h_pred.iter().zip(h_emp) {
        if !(p > 0.0 && e > 0.0) {
            return Err(Error::Domain(format!(
                "mixture weights must be positive to compare on a log scale (got {p}, {e})"
            )));
        }
        errs.push((p.log10() - e.log10()).abs());
    }
    errs.sort_by(f64::total_cmp);
    let m = errs.len() / 2;
    Ok(if errs.len() % 2 == 0 { (errs[m - 1] + errs[m]) / 2.0 } else { errs[m] })
}

/// Repetition factors whose mixtures stay within `slack` of optimal compute:
/// curves whose loss at `d_total` is at most the envelope's loss at
/// `(1 - slack) * d_total`.
#[derive(Debug, Clone)]
pub struct ConfidenceBand {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Mixture weights of the member curves, ascending.
    pub members: Vec<f64>,
    pub threshold: f64,
}

pub fn confidence_band_r(surface: &LossSurface, d_total: f64, slack: f64) -> Result<ConfidenceBand> {
    if !(0.0..1.0).contains(&slack) {
        return Err(Error::Domain(format!("slack = {slack} must lie in [0, 1)")));
    }
    let threshold = surface.envelope_at((1.0 - slack) * d_total)?.loss;
    let mut members = Vec::new();
    for curve in &surface.curves {
        if let Ok(loss) = curve.loss_at_budget(d_total) {
            if loss <= threshold {
                members.push(curve.h);
            }
        }
    }
    if members.is_empty() {
        return Err(Error::OutOfRange(format!(
            "no curve at budget {d_total} reaches the slack-{slack} threshold {threshold}"
        )));
    }
    let r_lo = members[0] * d_total / surface.d_target;
    let r_hi = members[members.len() - 1] * d_total / surface.d_target;
    Ok(ConfidenceBand { r_lo, r_hi, members, threshold })
}

/// Median; even counts average the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDataset("median of an empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 0 { (sorted[m - 1] + sorted[m]) / 2.0 } else { sorted[m] })
}

/// Nearest-rank quantile: the ceil(q*n)-th smallest value.
pub fn quantile_nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDataset("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile {q} must lie in [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(h: f64, d_total: f64, loss: f64) -> RunObservation {
        RunObservation {
            run_id: format!("h{h}"),
            model_size: None,
            d_target: 1e8,
            h,
            d_total,
            loss,
            step: None,
            domain: None,
        }
    }

    /// Loss linear in log10(budget): offset - slope * log10(d).
    fn linear_curve(h: f64, offset: f64, budgets: &[f64]) -> Vec<RunObservation> {
        budgets.iter().map(|&d| obs(h, d, offset - d.log10())).collect()
    }

    fn two_curve_surface() -> LossSurface {
        let budgets = [1e8, 1e9, 1e10];
        let mut all = linear_curve(0.1, 10.0, &budgets);
        all.extend(linear_curve(0.3, 10.5, &budgets));
        let mut surfaces = LossSurface::from_observations(&all).unwrap();
        assert_eq!(surfaces.len(), 1);
        surfaces.pop().unwrap()
    }

    #[test]
    fn grouping_splits_on_key_and_sorts() {
        let mut all = linear_curve(0.1, 10.0, &[1e9, 1e8]);
        all.extend(linear_curve(0.05, 10.2, &[1e8, 1e9]));
        let mut other = linear_curve(0.1, 9.0, &[1e8, 1e9]);
        for o in &mut other {
            o.domain = Some("code".into());
        }
        all.extend(other);
        let surfaces = LossSurface::from_observations(&all).unwrap();
        assert_eq!(surfaces.len(), 2);
        let plain = surfaces.iter().find(|s| s.domain.is_none()).unwrap();
        assert_eq!(plain.curves.len(), 2);
        assert_eq!(plain.curves[0].h, 0.05);
        assert_eq!(plain.curves[1].h, 0.1);
        assert!(plain.curves[1].points[0].0 < plain.curves[1].points[1].0);
    }

    #[test]
    fn duplicate_measurements_rejected() {
        let mut all = linear_curve(0.1, 10.0, &[1e8, 1e9]);
        all.push(obs(0.1, 1e9, 1.23));
        assert!(matches!(LossSurface::from_observations(&all), Err(Error::Domain(_))));
    }

    #[test]
    fn budget_interpolation_is_log_linear() {
        let s = two_curve_surface();
        // Curve losses are linear in log10(d), so interpolation is exact.
        let got = s.curves[0].loss_at_budget(10f64.powf(8.7)).unwrap();
        assert!((got - (10.0 - 8.7)).abs() < 1e-12, "{got}");
        assert!(s.curves[0].loss_at_budget(1e7).is_err());
        assert!(s.curves[0].loss_at_budget(1e11).is_err());
        // Exact grid point comes back bit-identical.
        assert_eq!(s.curves[0].loss_at_budget(1e9).unwrap(), 10.0 - 9.0);
    }

    #[test]
    fn h_interpolation_log_and_linear_fallback() {
        let s = two_curve_surface();
        // Geometric midpoint of 0.1 and 0.3 in log space.
        let h_mid = ((0.1f64.ln() + 0.3f64.ln()) / 2.0).exp();
        let got = s.loss_at(h_mid, 1e9).unwrap();
        let want = 0.5 * (10.0 - 9.0) + 0.5 * (10.5 - 9.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(s.loss_at(0.05, 1e9).is_err());
        assert!(s.loss_at(0.4, 1e9).is_err());

        // With an h = 0 curve the blend is linear in h.
        let budgets = [1e8, 1e9, 1e10];
        let mut all = linear_curve(0.0, 12.0, &budgets);
        all.extend(linear_curve(0.2, 10.0, &budgets));
        let s0 = LossSurface::from_observations(&all).unwrap().pop().unwrap();
        let got = s0.loss_at(0.05, 1e9).unwrap();
        let want = 0.75 * (12.0 - 9.0) + 0.25 * (10.0 - 9.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn envelope_prefers_lower_loss_then_smaller_h() {
        let s = two_curve_surface();
        let env = s.envelope().unwrap();
        assert_eq!(env.len(), 3);
        for p in &env {
            assert_eq!(p.h, 0.1); // curve 0.1 dominates everywhere
        }
        // Identical curves tie; the smaller h wins.
        let budgets = [1e8, 1e9];
        let mut all = linear_curve(0.1, 10.0, &budgets);
        all.extend(linear_curve(0.2, 10.0, &budgets));
        let tie = LossSurface::from_observations(&all).unwrap().pop().unwrap();
        assert_eq!(tie.envelope_at(1e9).unwrap().h, 0.1);
        let r = tie.empirical_optimal_r(1e9).unwrap();
        assert!((r - 0.1 * 1e9 / 1e8).abs() < 1e-12);
    }

    #[test]
    fn weighted_r2_exact_cases() {
        let t = [3.0, 2.5, 2.0, 1.5];
        let w = [1.0, 2.0, 3.0, 4.0];
        // Perfect prediction.
        assert_eq!(weighted_r2(&t, &t, &w).unwrap(), 1.0);
        // Constant predictor at the weighted mean.
        let wsum: f64 = w.iter().sum();
        let mean = w.iter().zip(&t).map(|(w, y)| w * y).sum::<f64>() / wsum;
        let preds = vec![mean; 4];
        assert_eq!(weighted_r2(&preds, &t, &w).unwrap(), 0.0);
        // Zero target variance, nonzero residual.
        let flat = [2.0, 2.0, 2.0, 2.0];
        assert_eq!(weighted_r2(&[2.1, 2.0, 2.0, 2.0], &flat, &w).unwrap(), f64::NEG_INFINITY);
        // Non-finite residual.
        assert_eq!(weighted_r2(&[f64::NAN, 2.0, 2.0, 2.0], &t, &w).unwrap(), f64::NEG_INFINITY);
        assert!(weighted_r2(&t, &t, &[1.0, 1.0]).is_err());
        assert!(weighted_r2(&t, &t, &[0.0; 4]).is_err());
    }

    #[test]
    fn wasted_fraction_log_linear_case() {
        let s = two_curve_surface();
        // Optimal mixture wastes nothing.
        let w = wasted_fraction(&s, 0.1, 1e9).unwrap();
        assert!(w.fraction.abs() < 1e-12, "{}", w.fraction);
        assert!(!w.out_of_range);
        // The worse curve is 0.5 nats behind; with slope 1 per decade the
        // envelope hit its loss half a decade earlier.
        let w = wasted_fraction(&s, 0.3, 1e9).unwrap();
        let want = 1.0 - 10f64.powf(-0.5);
        assert!((w.fraction - want).abs() < 1e-9, "{} vs {want}", w.fraction);
        assert!((w.d_prime - 10f64.powf(8.5)).abs() < 1.0);
        assert!((w.target_loss - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wasted_fraction_out_of_range_is_exactly_one() {
        let s = two_curve_surface();
        let w = wasted_fraction(&s, 0.9, 1e9).unwrap();
        assert_eq!(w.fraction, 1.0);
        assert!(w.out_of_range);
        let w = wasted_fraction(&s, 0.01, 1e9).unwrap();
        assert_eq!(w.fraction, 1.0);
    }

    #[test]
    fn wasted_fraction_smooths_non_monotone_envelope() {
        // Single curve that dips then rises: the envelope must be smoothed.
        let points = vec![obs(0.1, 1e8, 3.0), obs(0.1, 1e9, 2.0), obs(0.1, 1e10, 2.5)];
        let s = LossSurface::from_observations(&points).unwrap().pop().unwrap();
        let w = wasted_fraction(&s, 0.1, 1e10).unwrap();
        assert!(w.smoothed);
        // Envelope already at 2.0 (smoothed) by 1e9 while the target loss is
        // 2.5, reached by the raw envelope at ~10^8.5.
        assert!(w.fraction > 0.9, "{}", w.fraction);
    }

    #[test]
    fn hstar_log_error_medians() {
        // Odd count: plain median.
        let pred = [0.1, 0.2, 0.4];
        let emp = [0.1, 0.1, 0.1];
        let got = hstar_log_error(&pred, &emp).unwrap();
        assert!((got - 2f64.log10()).abs() < 1e-15);
        // Even count: mean of the central two.
        let pred = [0.1, 0.2, 0.4, 0.8];
        let emp = [0.1, 0.1, 0.1, 0.1];
        let got = hstar_log_error(&pred, &emp).unwrap();
        let want = (2f64.log10() + 4f64.log10()) / 2.0;
        assert!((got - want).abs() < 1e-15);
        assert!(hstar_log_error(&[0.0], &[0.1]).is_err());
        assert!(hstar_log_error(&[], &[]).is_err());
    }

    #[test]
    fn confidence_band_membership() {
        let s = two_curve_surface();
        // Threshold at 10% slack: envelope at 0.9e9 has loss
        // 10 - log10(9e8) ~ 1.0458. Curve 0.1 at 1e9 scores 1.0 (member);
        // curve 0.3 scores 1.5 (not).
        let band = confidence_band_r(&s, 1e9, 0.1).unwrap();
        assert_eq!(band.members, vec![0.1]);
        assert!((band.r_lo - 1.0).abs() < 1e-12);
        assert_eq!(band.r_lo, band.r_hi);
        // Large slack admits both curves.
        let band = confidence_band_r(&s, 1e9, 0.7).unwrap();
        assert_eq!(band.members, vec![0.1, 0.3]);
        assert!((band.r_hi - 3.0).abs() < 1e-12);
        assert!(confidence_band_r(&s, 1e9, 1.0).is_err());
        // Tiny slack still admits the optimal curve.
        let band = confidence_band_r(&s, 1e9, 0.0).unwrap();
        assert_eq!(band.members, vec![0.1]);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(quantile_nearest_rank(&v, 0.9).unwrap(), 9.0);
        assert_eq!(quantile_nearest_rank(&v, 0.5).unwrap(), 5.0);
        assert_eq!(quantile_nearest_rank(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_nearest_rank(&v, 1.0).unwrap(), 10.0);
        assert_eq!(quantile_nearest_rank(&[7.0], 0.9).unwrap(), 7.0);
        assert!(quantile_nearest_rank(&[], 0.9).is_err());
    }

    proptest! {
        #[test]
        fn wr2_invariant_under_weight_rescaling(
            mut targets in proptest::collection::vec(-10.0f64..10.0, 3..20),
            scale in 1e-3f64..1e3,
        ) {
            targets[0] += 1.0; // guarantee spread
            let preds: Vec<f64> = targets.iter().map(|t| t * 0.9 + 0.1).collect();
            let weights: Vec<f64> = (0..targets.len()).map(|i| 0.1 + i as f64).collect();
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let a = weighted_r2(&preds, &targets, &weights).unwrap();
            let b = weighted_r2(&preds, &targets, &scaled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }

        #[test]
        fn wr2_never_exceeds_one(
            targets in proptest::collection::vec(-10.0f64..10.0, 2..20),
            preds in proptest::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            let n = targets.len().min(preds.len());
            let w = vec![1.0; n];
            let r2 = weighted_r2(&preds[..n], &targets[..n], &w).unwrap();
            prop_assert!(r2 <= 1.0);
        }
    }
}
