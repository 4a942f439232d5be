//! Parameter-space transforms for the optimizer.
//!
//! Each parameter is fitted in an unconstrained-ish transformed coordinate:
//! positive parameters in log-space, negative exponents as -exp(t), the
//! weight penalty through a softplus so the default fit keeps gamma >= 0.
//! Bounds are stated in natural space and mapped alongside.

use crate::error::{Error, Result};
use crate::law::Family;

/// Natural parameters below this are treated as the softplus floor.
const SOFTPLUS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// natural = exp(t); for strictly positive parameters.
    Log,
    /// natural = -exp(t); for strictly negative parameters.
    NegLog,
    /// natural = ln(1 + exp(t)); keeps the parameter >= 0 smoothly.
    Softplus,
    /// natural = t.
    Linear,
}

impl Transform {
    pub fn to_natural(self, t: f64) -> f64 {
        match self {
            Transform::Log => t.exp(),
            Transform::NegLog => -t.exp(),
            Transform::Softplus => softplus(t),
            Transform::Linear => t,
        }
    }

    pub fn from_natural(self, x: f64) -> f64 {
        match self {
            Transform::Log => x.ln(),
            Transform::NegLog => (-x).ln(),
            Transform::Softplus => softplus_inv(x.max(SOFTPLUS_FLOOR)),
            Transform::Linear => x,
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

fn softplus_inv(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        (x.exp() - 1.0).ln()
    }
}

/// One fitted parameter: its transform and natural-space open interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub transform: Transform,
    pub lo: f64,
    pub hi: f64,
}

impl ParamSpec {
    /// The (lo, hi) box in transformed coordinates, lo < hi.
    pub fn transformed_bounds(&self) -> (f64, f64) {
        let a = self.transform.from_natural(self.lo);
        let b = self.transform.from_natural(self.hi);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn with_bounds(self, lo: f64, hi: f64) -> Result<ParamSpec> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!(
                "bounds for {}: need finite lo < hi, got ({lo}, {hi})",
                self.name
            )));
        }
        let ok = match self.transform {
            Transform::Log => lo > 0.0,
            Transform::NegLog => hi < 0.0,
            Transform::Softplus => lo >= 0.0,
            Transform::Linear => true,
        };
        if !ok {
            return Err(Error::Domain(format!(
                "bounds ({lo}, {hi}) for {} are incompatible with its sign constraint",
                self.name
            )));
        }
        Ok(ParamSpec { lo, hi, ..self })
    }
}

/// Sign-constraint relaxations for individual parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct Relaxations {
    /// Fit gamma in linear space over (-5, 5) instead of softplus [0, 5).
    pub allow_negative_gamma: bool,
    /// Fit b0, b1 in linear space over (-2, 2) instead of (-2, -1e-3).
    pub allow_positive_decay: bool,
}

fn default_spec(name: &'static str, relax: &Relaxations) -> ParamSpec {
    use Transform::*;
    match name {
        "e" => ParamSpec { name, transform: Log, lo: 0.1, hi: 10.0 },
        "a" | "b" | "c" => ParamSpec { name, transform: Log, lo: 1e-2, hi: 1e12 },
        "alpha" | "beta" | "delta" => ParamSpec { name, transform: Log, lo: 1e-3, hi: 2.0 },
        "r1" => ParamSpec { name, transform: Log, lo: 0.1, hi: 100.0 },
        "tau" => ParamSpec { name, transform: Log, lo: 1e-2, hi: 100.0 },
        "gamma" => {
            if relax.allow_negative_gamma {
                ParamSpec { name, transform: Linear, lo: -5.0, hi: 5.0 }
            } else {
                ParamSpec { name, transform: Softplus, lo: 0.0, hi: 5.0 }
            }
        }
        "alpha_neg" => ParamSpec { name, transform: NegLog, lo: -2.0, hi: -1e-3 },
        "mu" => ParamSpec { name, transform: Log, lo: 1e-3, hi: 100.0 },
        "b0" | "b1" => {
            if relax.allow_positive_decay {
                ParamSpec { name, transform: Linear, lo: -2.0, hi: 2.0 }
            } else {
                ParamSpec { name, transform: NegLog, lo: -2.0, hi: -1e-3 }
            }
        }
        "tau_half" => ParamSpec { name, transform: Log, lo: 0.1, hi: 100.0 },
        other => unreachable!("no default spec for parameter '{other}'"),
    }
}

/// Parameter specs for a family in canonical order, with optional
/// natural-space bound overrides (one pair per parameter).
pub fn specs_for(
    family: Family,
    relax: &Relaxations,
    bounds: Option<&[(f64, f64)]>,
) -> Result<Vec<ParamSpec>> {
    let names = family.param_names();
    if let Some(b) = bounds {
        if b.len() != names.len() {
            return Err(Error::Domain(format!(
                "family {family} has {} parameters but {} bound pairs were given",
                names.len(),
                b.len()
            )));
        }
    }
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let spec = default_spec(name, relax);
            match bounds {
                Some(b) => spec.with_bounds(b[i].0, b[i].1),
                None => Ok(spec),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_transform_round_trips() {
        let s = ParamSpec { name: "a", transform: Transform::Log, lo: 1e-2, hi: 1e12 };
        for x in [1e-2, 1.0, 437.5, 1e12] {
            let t = s.transform.from_natural(x);
            assert!((s.transform.to_natural(t) - x).abs() <= 1e-12 * x);
        }
        let (lo, hi) = s.transformed_bounds();
        assert!(lo < hi);
        assert!((lo - (1e-2f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn neglog_transform_covers_negative_interval() {
        let s = ParamSpec { name: "b0", transform: Transform::NegLog, lo: -2.0, hi: -1e-3 };
        let (lo, hi) = s.transformed_bounds();
        assert!(lo < hi);
        for t in [lo, 0.5 * (lo + hi), hi] {
            let x = s.transform.to_natural(t);
            assert!(x >= -2.0 - 1e-12 && x <= -1e-3 + 1e-12, "x = {x}");
        }
        let t = s.transform.from_natural(-0.25);
        assert!((s.transform.to_natural(t) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn softplus_floor_keeps_inverse_finite() {
        let tr = Transform::Softplus;
        assert!(tr.from_natural(0.0).is_finite());
        assert!(tr.to_natural(tr.from_natural(0.0)) < 1e-8);
        for x in [0.01, 0.5, 4.9] {
            let t = tr.from_natural(x);
            assert!((tr.to_natural(t) - x).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn specs_cover_every_family_parameter() {
        let relax = Relaxations::default();
        for f in Family::ALL {
            let specs = specs_for(f, &relax, None).unwrap();
            assert_eq!(specs.len(), f.param_count());
            for (spec, name) in specs.iter().zip(f.param_names()) {
                assert_eq!(spec.name, *name);
                let (lo, hi) = spec.transformed_bounds();
                assert!(lo.is_finite() && hi.is_finite() && lo < hi, "{name}");
            }
        }
    }

    #[test]
    fn bound_overrides_are_checked() {
        let relax = Relaxations::default();
        // Wrong count.
        assert!(specs_for(Family::Fix, &relax, Some(&[(0.1, 1.0)])).is_err());
        // Log-space parameter cannot include zero.
        let bad = [(0.0, 10.0), (1e-2, 1e12), (1e-3, 2.0), (0.1, 100.0), (1e-2, 100.0), (0.0, 5.0)];
        assert!(specs_for(Family::Fix, &relax, Some(&bad)).is_err());
        let good = [(0.5, 8.0), (1.0, 1e9), (0.01, 1.5), (0.5, 50.0), (0.1, 10.0), (0.0, 2.0)];
        let specs = specs_for(Family::Fix, &relax, Some(&good)).unwrap();
        assert_eq!(specs[0].lo, 0.5);
        assert_eq!(specs[5].hi, 2.0);
    }
}
