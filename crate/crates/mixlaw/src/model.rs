//! Core quantities of the repetition-aware mixture scaling law.
//!
//! A mixture is described by the total training budget `d_total` (tokens),
//! the weight `h` of the target domain in the mixture, and the size
//! `d_target` of the target domain's unique token pool. The target pool is
//! repeated `r = h * d_total / d_target` times; repeated passes contribute
//! decaying value, captured by the saturation function [`rho`] and folded
//! into an effective dataset size. Losses are in nats per token.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point at which a law can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureQuery {
    /// Total training tokens.
    pub d_total: f64,
    /// Mixture weight of the target domain, in [0, 1].
    pub h: f64,
    /// Unique tokens available in the target domain pool.
    pub d_target: f64,
    /// Non-embedding parameter count; only size-aware laws need it.
    pub model_size: Option<f64>,
}

impl MixtureQuery {
    /// Repetition factor of the target pool for this query.
    pub fn repetition(&self) -> Result<f64> {
        repetition_factor(self.h, self.d_total, self.d_target)
    }
}

/// One logged checkpoint of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunObservation {
    pub run_id: String,
    pub model_size: Option<f64>,
    pub d_target: f64,
    pub h: f64,
    pub d_total: f64,
    /// Target-domain test loss, nats per token.
    pub loss: f64,
    pub step: Option<u64>,
    pub domain: Option<String>,
}

impl RunObservation {
    /// Checks the invariants every observation must satisfy.
    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty() {
            return Err(Error::Domain("run_id must be non-empty".into()));
        }
        if !(self.h >= 0.0 && self.h <= 1.0) {
            return Err(Error::Domain(format!(
                "run {}: h = {} outside [0, 1]",
                self.run_id, self.h
            )));
        }
        if !(self.d_total > 0.0 && self.d_total.is_finite()) {
            return Err(Error::Domain(format!(
                "run {}: d_total = {} must be finite and > 0",
                self.run_id, self.d_total
            )));
        }
        if !(self.d_target > 0.0 && self.d_target.is_finite()) {
            return Err(Error::Domain(format!(
                "run {}: d_target = {} must be finite and > 0",
                self.run_id, self.d_target
            )));
        }
        if let Some(n) = self.model_size {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Domain(format!(
                    "run {}: model_size = {n} must be finite and > 0",
                    self.run_id
                )));
            }
        }
        Ok(())
    }

    /// Repetition factor r = h * d_total / d_target.
    pub fn repetition(&self) -> f64 {
        self.h * self.d_total / self.d_target
    }

    pub fn query(&self) -> MixtureQuery {
        MixtureQuery {
            d_total: self.d_total,
            h: self.h,
            d_target: self.d_target,
            model_size: self.model_size,
        }
    }
}

/// Number of passes over the target pool implied by a mixture.
///
/// r = h * d_total / d_target. r < 1 means the pool is not exhausted.
pub fn repetition_factor(h: f64, d_total: f64, d_target: f64) -> Result<f64> {
    if !(h >= 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("h = {h} outside [0, 1]")));
    }
    if !(d_total > 0.0 && d_total.is_finite()) {
        return Err(Error::Domain(format!("d_total = {d_total} must be finite and > 0")));
    }
    if !(d_target > 0.0 && d_target.is_finite()) {
        return Err(Error::Domain(format!("d_target = {d_target} must be finite and > 0")));
    }
    Ok(h * d_total / d_target)
}

/// Saturating value of repeated passes: rho(r) = r1 * (1 - exp(-(r-1)/r1)).
///
/// rho(1) = 0, rho is strictly increasing in r and bounded above by r1;
/// near r = 1 it behaves like r - 1 (an extra full pass counts fully).
/// The canonical regime is r >= 1. The closed form is also evaluated for
/// 0 <= r < 1, but [`effective_data`] switches to the seen-token rule there.
pub fn rho(r: f64, r1: f64) -> Result<f64> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(Error::Domain(format!("r1 = {r1} must be finite and > 0")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r = {r} must be finite and >= 0")));
    }
    // exp_m1 keeps full precision near r = 1, where 1 - exp(-x) cancels.
    Ok(-r1 * (-(r - 1.0) / r1).exp_m1())
}

/// Effective dataset size decomposition for one mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveData {
    /// Generic (non-target) tokens: (1 - h) * d_total.
    pub generic_tokens: f64,
    /// Effective target tokens D_T after repetition discounting.
    pub target_effective: f64,
    /// D_eff = generic_tokens + tau * target_effective.
    pub total: f64,
}

/// Computes D_eff = (1 - h) * d_total + tau * D_T.
///
/// For r >= 1, D_T = d_target * (1 + rho(r)); below one full pass only the
/// tokens actually seen count, D_T = r * d_target, which meets the r >= 1
/// branch continuously at r = 1.
pub fn effective_data(d_total: f64, h: f64, d_target: f64, r1: f64, tau: f64) -> Result<EffectiveData> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau = {tau} must be finite and > 0")));
    }
    let r = repetition_factor(h, d_total, d_target)?;
    let target_effective = if r >= 1.0 {
        d_target * (1.0 + rho(r, r1)?)
    } else {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::Domain(format!("r1 = {r1} must be finite and > 0")));
        }
        r * d_target
    };
    let generic_tokens = (1.0 - h) * d_total;
    let total = generic_tokens + tau * target_effective;
    Ok(EffectiveData {
        generic_tokens,
        target_effective,
        total,
    })
}

/// Fixed-model-size law: L = E + A / D_eff^alpha + gamma * h.
///
/// gamma is a linear cost on the target weight; it is unconstrained here
/// (fitting constrains it to >= 0 unless overridden).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixParams {
    pub e: f64,
    pub a: f64,
    pub alpha: f64,
    pub r1: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl FixParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e", self.e),
            ("a", self.a),
            ("alpha", self.alpha),
            ("r1", self.r1),
            ("tau", self.tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::Domain(format!("gamma = {} must be finite", self.gamma)));
        }
        Ok(())
    }

    /// Loss at a query point. The model size, if any, is ignored.
    pub fn loss(&self, q: &MixtureQuery) -> Result<f64> {
        let d_eff = effective_data(q.d_total, q.h, q.d_target, self.r1, self.tau)?.total;
        if !(d_eff > 0.0) {
            return Err(Error::Domain(format!("non-positive effective data {d_eff}")));
        }
        Ok(self.e + self.a / d_eff.powf(self.alpha) + self.gamma * q.h)
    }
}

/// Model-size-aware law: L = E + C / N^beta + B * N^delta / D_eff^alpha + gamma * h.
///
/// Larger models need proportionally more data for the same data-term loss
/// (the N^delta coupling); C / N^beta is the capacity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeParams {
    pub e: f64,
    pub c: f64,
    pub beta: f64,
    pub b: f64,
    pub delta: f64,
    pub alpha: f64,
    pub r1: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl SizeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e", self.e),
            ("c", self.c),
            ("beta", self.beta),
            ("b", self.b),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("r1", self.r1),
            ("tau", self.tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::Domain(format!("gamma = {} must be finite", self.gamma)));
        }
        Ok(())
    }

    /// Loss at a query point; the query must carry a model size.
    pub fn loss(&self, q: &MixtureQuery) -> Result<f64> {
        let n = q.model_size.ok_or_else(|| {
            Error::MissingModelSize("size-aware law evaluated without model_size".into())
        })?;
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("model_size = {n} must be finite and > 0")));
        }
        let d_eff = effective_data(q.d_total, q.h, q.d_target, self.r1, self.tau)?.total;
        if !(d_eff > 0.0) {
            return Err(Error::Domain(format!("non-positive effective data {d_eff}")));
        }
        // Grouped exactly like the reduced fixed-size evaluation so that
        // reduce_to_fix(n).loss(q) reproduces this bit for bit.
        let e_eff = self.e + self.c / n.powf(self.beta);
        let a_eff = self.b * n.powf(self.delta);
        Ok(e_eff + a_eff / d_eff.powf(self.alpha) + self.gamma * q.h)
    }

    /// Pins the model size, collapsing to the fixed-size law with
    /// A = B * N^delta and E' = E + C / N^beta.
    pub fn reduce_to_fix(&self, n: f64) -> Result<FixParams> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain(format!("model_size = {n} must be finite and > 0")));
        }
        Ok(FixParams {
            e: self.e + self.c / n.powf(self.beta),
            a: self.b * n.powf(self.delta),
            alpha: self.alpha,
            r1: self.r1,
            tau: self.tau,
            gamma: self.gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(d_total: f64, h: f64, d_target: f64) -> MixtureQuery {
        MixtureQuery { d_total, h, d_target, model_size: None }
    }

    #[test]
    fn repetition_factor_basic() {
        // 9.5% of 10.1e9 tokens against a 50M pool: just over 19 passes.
        let r = repetition_factor(0.095, 1.01e10, 5e7).unwrap();
        assert!((r - 19.19).abs() < 1e-12 * 19.19, "r = {r}");
        assert_eq!(repetition_factor(0.0, 1e9, 5e7).unwrap(), 0.0);
        assert!(repetition_factor(0.5, 1e9, 0.0).is_err());
        assert!(repetition_factor(1.1, 1e9, 5e7).is_err());
        assert!(repetition_factor(-0.1, 1e9, 5e7).is_err());
    }

    #[test]
    fn rho_reference_values() {
        assert_eq!(rho(1.0, 3.7).unwrap(), 0.0);
        // 192-bit reference: 4*(1 - exp(-1/4)).
        let v = rho(2.0, 4.0).unwrap();
        assert!((v - 0.884796867714380527).abs() < 1e-15, "rho(2,4) = {v}");
        // Deep saturation: exp(-25) < 2e-11 of r1 left.
        let v = rho(1.0 + 25.0 * 5.0, 5.0).unwrap();
        assert!((v - 5.0).abs() <= 1e-9 * 5.0, "rho at 25*r1 = {v}");
        assert!(rho(2.0, 0.0).is_err());
        assert!(rho(2.0, -1.0).is_err());
        assert!(rho(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rho_monotone_and_bounded() {
        let r1 = 7.3;
        let mut prev = rho(1.0, r1).unwrap();
        for i in 1..=2000 {
            let r = 1.0 + (i as f64) * 0.05;
            let v = rho(r, r1).unwrap();
            assert!(v > prev, "rho not increasing at r = {r}");
            assert!(v < r1, "rho above r1 at r = {r}");
            prev = v;
        }
    }

    #[test]
    fn effective_data_reference_value() {
        // r = 10, D_T = 5e7 * (1 + 6*(1 - exp(-1.5))), D_eff = 0.95e10 + 2*D_T.
        let ed = effective_data(1e10, 0.05, 5e7, 6.0, 2.0).unwrap();
        assert!((ed.target_effective - 283060951.9554710513).abs() < 1.0);
        assert!((ed.total - 10066121903.91094210).abs() < 1.0);
        assert_eq!(ed.generic_tokens, 0.95 * 1e10);
    }

    #[test]
    fn effective_data_continuous_at_one_pass() {
        // Approach r = 1 from both sides along d_total.
        let (h, dt, r1, tau) = (0.2, 1e8, 4.0, 1.7);
        let d_at_one = dt / h;
        let below = effective_data(d_at_one * (1.0 - 1e-9), h, dt, r1, tau).unwrap();
        let at = effective_data(d_at_one, h, dt, r1, tau).unwrap();
        let above = effective_data(d_at_one * (1.0 + 1e-9), h, dt, r1, tau).unwrap();
        assert!((below.total - at.total).abs() < 1e-6 * at.total);
        assert!((above.total - at.total).abs() < 1e-6 * at.total);
    }

    #[test]
    fn effective_data_increases_with_budget() {
        let (h, dt, r1, tau) = (0.4, 5e7, 6.0, 2.0);
        let mut prev = 0.0;
        for i in 0..200 {
            let d = 1e8 * 1.05f64.powi(i);
            let total = effective_data(d, h, dt, r1, tau).unwrap().total;
            assert!(total > prev, "D_eff not increasing at d_total = {d}");
            prev = total;
        }
    }

    #[test]
    fn loss_fix_reference_value() {
        let p = FixParams { e: 2.0, a: 1e3, alpha: 0.3, r1: 6.0, tau: 2.0, gamma: 0.5 };
        let l = p.loss(&q(1e10, 0.05, 5e7)).unwrap();
        // 192-bit reference for these inputs.
        let want = 3.023024825504895431;
        assert!((l - want).abs() < 1e-10 * want, "loss = {l}");
    }

    #[test]
    fn loss_fix_param_validation() {
        let mut p = FixParams { e: 2.0, a: 1e3, alpha: 0.3, r1: 6.0, tau: 2.0, gamma: 0.5 };
        assert!(p.validate().is_ok());
        p.gamma = -0.2; // legal at the type level; fitting constrains the sign
        assert!(p.validate().is_ok());
        p.alpha = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn size_reduction_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = SizeParams {
                e: rng.gen_range(0.5..5.0),
                c: 10f64.powf(rng.gen_range(0.0..8.0)),
                beta: rng.gen_range(0.1..1.0),
                b: 10f64.powf(rng.gen_range(0.0..6.0)),
                delta: rng.gen_range(0.05..0.8),
                alpha: rng.gen_range(0.05..0.9),
                r1: rng.gen_range(0.5..40.0),
                tau: rng.gen_range(0.1..10.0),
                gamma: rng.gen_range(-1.0..2.0),
            };
            let n = 10f64.powf(rng.gen_range(7.0..10.0));
            let query = MixtureQuery {
                d_total: 10f64.powf(rng.gen_range(8.0..11.0)),
                h: rng.gen_range(0.0..=1.0),
                d_target: 10f64.powf(rng.gen_range(6.5..9.0)),
                model_size: Some(n),
            };
            let full = p.loss(&query).unwrap();
            let reduced = p.reduce_to_fix(n).unwrap().loss(&query).unwrap();
            assert!(
                (full - reduced).abs() <= 1e-12 * full.abs(),
                "reduction mismatch: {full} vs {reduced}"
            );
        }
    }

    #[test]
    fn size_reduction_identity_cases() {
        let p = SizeParams {
            e: 2.0, c: 0.5, beta: 0.4, b: 2.0, delta: 0.5,
            alpha: 0.3, r1: 6.0, tau: 2.0, gamma: 0.1,
        };
        let at_one = p.reduce_to_fix(1.0).unwrap();
        assert_eq!(at_one.a, p.b);
        assert_eq!(at_one.e, p.e + p.c);
        let at_four = p.reduce_to_fix(4.0).unwrap();
        assert_eq!(at_four.a, 4.0); // 2 * 4^0.5
    }

    #[test]
    fn loss_size_requires_model_size() {
        let p = SizeParams {
            e: 2.0, c: 0.5, beta: 0.4, b: 2.0, delta: 0.5,
            alpha: 0.3, r1: 6.0, tau: 2.0, gamma: 0.1,
        };
        let err = p.loss(&q(1e9, 0.1, 5e7)).unwrap_err();
        assert!(matches!(err, Error::MissingModelSize(_)));
    }

    #[test]
    fn observation_validation() {
        let mut obs = RunObservation {
            run_id: "r0".into(),
            model_size: Some(1e8),
            d_target: 5e7,
            h: 0.1,
            d_total: 1e9,
            loss: 3.1,
            step: Some(1),
            domain: None,
        };
        assert!(obs.validate().is_ok());
        assert!((obs.repetition() - 2.0).abs() < 1e-12);
        obs.h = 1.5;
        assert!(obs.validate().is_err());
        obs.h = 0.1;
        obs.model_size = Some(-5.0);
        assert!(obs.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn rho_linear_near_one_pass(r1 in 1.0f64..100.0, frac in 0.0f64..1.0) {
            // r within the stated small-r window; bound requires r1 >= 1.
            let x = frac * 0.01 * (r1 + 1.0);
            let r = 1.0 + x;
            let v = rho(r, r1).unwrap();
            if x > 0.0 {
                proptest::prop_assert!((v - x).abs() <= 0.01 * x);
            }
        }

        #[test]
        fn effective_data_monotone_in_budget(
            h in 0.0f64..1.0,
            r1 in 0.2f64..50.0,
            tau in 0.05f64..20.0,
            d0 in 1e8f64..1e10,
            factor in 1.001f64..10.0,
        ) {
            let dt = 5e7;
            let lo = effective_data(d0, h, dt, r1, tau).unwrap().total;
            let hi = effective_data(d0 * factor, h, dt, r1, tau).unwrap().total;
            proptest::prop_assert!(hi > lo);
        }
    }
}
