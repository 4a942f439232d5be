//! A single dispatch type over every law family, used by fitting, planning
//! and file IO so they stay family-generic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::baselines::{
    DomainAgnosticParams, DomainAgnosticSizeParams, RepAgnosticParams, RepAgnosticSizeParams,
    UtilityDecayParams, UtilityDecaySizeParams,
};
use crate::error::{Error, Result};
use crate::model::{FixParams, MixtureQuery, SizeParams};

/// Identifier of a law family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Fix,
    Size,
    RepAgnostic,
    RepAgnosticSize,
    DomainAgnostic,
    DomainAgnosticSize,
    UtilityDecay,
    UtilityDecaySize,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Fix,
        Family::Size,
        Family::RepAgnostic,
        Family::RepAgnosticSize,
        Family::DomainAgnostic,
        Family::DomainAgnosticSize,
        Family::UtilityDecay,
        Family::UtilityDecaySize,
    ];

    /// The single-model-size families, in comparison order.
    pub const FIXED_SET: [Family; 4] = [
        Family::Fix,
        Family::RepAgnostic,
        Family::DomainAgnostic,
        Family::UtilityDecay,
    ];

    /// The multi-model-size families, in comparison order.
    pub const SIZE_SET: [Family; 4] = [
        Family::Size,
        Family::RepAgnosticSize,
        Family::DomainAgnosticSize,
        Family::UtilityDecaySize,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Family::Fix => "fix",
            Family::Size => "size",
            Family::RepAgnostic => "rep-agnostic",
            Family::RepAgnosticSize => "rep-agnostic-size",
            Family::DomainAgnostic => "domain-agnostic",
            Family::DomainAgnosticSize => "domain-agnostic-size",
            Family::UtilityDecay => "utility-decay",
            Family::UtilityDecaySize => "utility-decay-size",
        }
    }

    /// Parameter names in canonical (file and vector) order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Fix => &["e", "a", "alpha", "r1", "tau", "gamma"],
            Family::Size => &["e", "c", "beta", "b", "delta", "alpha", "r1", "tau", "gamma"],
            Family::RepAgnostic => &["e", "a", "alpha", "tau", "gamma"],
            Family::RepAgnosticSize => &["e", "c", "beta", "b", "delta", "alpha", "tau", "gamma"],
            Family::DomainAgnostic => &["e", "a", "alpha_neg", "mu"],
            Family::DomainAgnosticSize => &["e", "c", "beta", "b", "delta", "alpha_neg", "mu"],
            Family::UtilityDecay => &["e", "a", "b0", "b1", "tau_half"],
            Family::UtilityDecaySize => &["e", "c", "beta", "a", "b0", "b1", "tau_half"],
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_names().len()
    }

    pub fn requires_model_size(&self) -> bool {
        matches!(
            self,
            Family::Size
                | Family::RepAgnosticSize
                | Family::DomainAgnosticSize
                | Family::UtilityDecaySize
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.id() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Family::ALL.iter().map(|f| f.id()).collect();
                Error::Schema(format!(
                    "unknown law family '{s}' (known: {})",
                    known.join(", ")
                ))
            })
    }
}

/// A fitted or constructed law of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Fix(FixParams),
    Size(SizeParams),
    RepAgnostic(RepAgnosticParams),
    RepAgnosticSize(RepAgnosticSizeParams),
    DomainAgnostic(DomainAgnosticParams),
    DomainAgnosticSize(DomainAgnosticSizeParams),
    UtilityDecay(UtilityDecayParams),
    UtilityDecaySize(UtilityDecaySizeParams),
}

impl Law {
    pub fn family(&self) -> Family {
        match self {
            Law::Fix(_) => Family::Fix,
            Law::Size(_) => Family::Size,
            Law::RepAgnostic(_) => Family::RepAgnostic,
            Law::RepAgnosticSize(_) => Family::RepAgnosticSize,
            Law::DomainAgnostic(_) => Family::DomainAgnostic,
            Law::DomainAgnosticSize(_) => Family::DomainAgnosticSize,
            Law::UtilityDecay(_) => Family::UtilityDecay,
            Law::UtilityDecaySize(_) => Family::UtilityDecaySize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Fix(p) => p.validate(),
            Law::Size(p) => p.validate(),
            Law::RepAgnostic(p) => p.validate(),
            Law::RepAgnosticSize(p) => p.validate(),
            Law::DomainAgnostic(p) => p.validate(),
            Law::DomainAgnosticSize(p) => p.validate(),
            Law::UtilityDecay(p) => p.validate(),
            Law::UtilityDecaySize(p) => p.validate(),
        }
    }

    pub fn loss(&self, q: &MixtureQuery) -> Result<f64> {
        match self {
            Law::Fix(p) => p.loss(q),
            Law::Size(p) => p.loss(q),
            Law::RepAgnostic(p) => p.loss(q),
            Law::RepAgnosticSize(p) => p.loss(q),
            Law::DomainAgnostic(p) => p.loss(q),
            Law::DomainAgnosticSize(p) => p.loss(q),
            Law::UtilityDecay(p) => p.loss(q),
            Law::UtilityDecaySize(p) => p.loss(q),
        }
    }

    /// Parameter values in the family's canonical order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Law::Fix(p) => vec![p.e, p.a, p.alpha, p.r1, p.tau, p.gamma],
            Law::Size(p) => vec![p.e, p.c, p.beta, p.b, p.delta, p.alpha, p.r1, p.tau, p.gamma],
            Law::RepAgnostic(p) => vec![p.e, p.a, p.alpha, p.tau, p.gamma],
            Law::RepAgnosticSize(p) => {
                vec![p.e, p.c, p.beta, p.b, p.delta, p.alpha, p.tau, p.gamma]
            }
            Law::DomainAgnostic(p) => vec![p.e, p.a, p.alpha_neg, p.mu],
            Law::DomainAgnosticSize(p) => {
                vec![p.e, p.c, p.beta, p.b, p.delta, p.alpha_neg, p.mu]
            }
            Law::UtilityDecay(p) => vec![p.e, p.a, p.b0, p.b1, p.tau_half],
            Law::UtilityDecaySize(p) => vec![p.e, p.c, p.beta, p.a, p.b0, p.b1, p.tau_half],
        }
    }

    /// (name, value) pairs in canonical order.
    pub fn named_values(&self) -> Vec<(&'static str, f64)> {
        self.family()
            .param_names()
            .iter()
            .copied()
            .zip(self.values())
            .collect()
    }

    /// Builds a law from values in canonical order.
    pub fn from_values(family: Family, v: &[f64]) -> Result<Law> {
        if v.len() != family.param_count() {
            return Err(Error::Schema(format!(
                "family {} expects {} parameters, got {}",
                family,
                family.param_count(),
                v.len()
            )));
        }
        Ok(match family {
            Family::Fix => Law::Fix(FixParams {
                e: v[0], a: v[1], alpha: v[2], r1: v[3], tau: v[4], gamma: v[5],
            }),
            Family::Size => Law::Size(SizeParams {
                e: v[0], c: v[1], beta: v[2], b: v[3], delta: v[4],
                alpha: v[5], r1: v[6], tau: v[7], gamma: v[8],
            }),
            Family::RepAgnostic => Law::RepAgnostic(RepAgnosticParams {
                e: v[0], a: v[1], alpha: v[2], tau: v[3], gamma: v[4],
            }),
            Family::RepAgnosticSize => Law::RepAgnosticSize(RepAgnosticSizeParams {
                e: v[0], c: v[1], beta: v[2], b: v[3], delta: v[4],
                alpha: v[5], tau: v[6], gamma: v[7],
            }),
            Family::DomainAgnostic => Law::DomainAgnostic(DomainAgnosticParams {
                e: v[0], a: v[1], alpha_neg: v[2], mu: v[3],
            }),
            Family::DomainAgnosticSize => Law::DomainAgnosticSize(DomainAgnosticSizeParams {
                e: v[0], c: v[1], beta: v[2], b: v[3], delta: v[4],
                alpha_neg: v[5], mu: v[6],
            }),
            Family::UtilityDecay => Law::UtilityDecay(UtilityDecayParams {
                e: v[0], a: v[1], b0: v[2], b1: v[3], tau_half: v[4],
            }),
            Family::UtilityDecaySize => Law::UtilityDecaySize(UtilityDecaySizeParams {
                e: v[0], c: v[1], beta: v[2], a: v[3], b0: v[4], b1: v[5], tau_half: v[6],
            }),
        })
    }

    /// Builds a law from a name/value map; the key set must match exactly.
    pub fn from_map(family: Family, map: &BTreeMap<String, f64>) -> Result<Law> {
        let names = family.param_names();
        let mut values = Vec::with_capacity(names.len());
        for name in names {
            match map.get(*name) {
                Some(v) if v.is_finite() => values.push(*v),
                Some(v) => {
                    return Err(Error::Schema(format!(
                        "parameter {name} = {v} is not finite"
                    )))
                }
                None => {
                    return Err(Error::Schema(format!(
                        "family {family} is missing parameter '{name}'"
                    )))
                }
            }
        }
        for key in map.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::Schema(format!(
                    "family {family} has no parameter '{key}'"
                )));
            }
        }
        Law::from_values(family, &values)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.named_values()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Extends a fixed-size family with capacity (and, where the family has a
    /// data coefficient, data-size coupling) terms. `delta` must be 0 for the
    /// utility-decay family, whose extension has no coupling.
    pub fn extend_with_size(&self, c: f64, beta: f64, delta: f64) -> Result<Law> {
        match self {
            Law::Fix(p) => Ok(Law::Size(SizeParams {
                e: p.e, c, beta, b: p.a, delta,
                alpha: p.alpha, r1: p.r1, tau: p.tau, gamma: p.gamma,
            })),
            Law::RepAgnostic(p) => Ok(Law::RepAgnosticSize(RepAgnosticSizeParams {
                e: p.e, c, beta, b: p.a, delta,
                alpha: p.alpha, tau: p.tau, gamma: p.gamma,
            })),
            Law::DomainAgnostic(p) => Ok(Law::DomainAgnosticSize(DomainAgnosticSizeParams {
                e: p.e, c, beta, b: p.a, delta,
                alpha_neg: p.alpha_neg, mu: p.mu,
            })),
            Law::UtilityDecay(p) => {
                if delta != 0.0 {
                    return Err(Error::Domain(
                        "utility-decay size extension has no data-size coupling; delta must be 0"
                            .into(),
                    ));
                }
                Ok(Law::UtilityDecaySize(UtilityDecaySizeParams {
                    e: p.e, c, beta,
                    a: p.a, b0: p.b0, b1: p.b1, tau_half: p.tau_half,
                }))
            }
            _ => Err(Error::Domain(format!(
                "family {} is already size-aware",
                self.family()
            ))),
        }
    }

    /// Pins the model size of a size-aware law, returning the fixed-size law.
    pub fn reduce_to_fixed(&self, n: f64) -> Result<Law> {
        match self {
            Law::Size(p) => Ok(Law::Fix(p.reduce_to_fix(n)?)),
            Law::RepAgnosticSize(p) => Ok(Law::RepAgnostic(p.reduce_to_fixed(n)?)),
            Law::DomainAgnosticSize(p) => Ok(Law::DomainAgnostic(p.reduce_to_fixed(n)?)),
            Law::UtilityDecaySize(p) => Ok(Law::UtilityDecay(p.reduce_to_fixed(n)?)),
            _ => Err(Error::Domain(format!(
                "family {} is not size-aware",
                self.family()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_ids_round_trip() {
        for f in Family::ALL {
            assert_eq!(Family::from_str(f.id()).unwrap(), f);
        }
        assert!(matches!(Family::from_str("chinchilla"), Err(Error::Schema(_))));
    }

    #[test]
    fn values_round_trip_all_families() {
        for (i, f) in Family::ALL.into_iter().enumerate() {
            let v: Vec<f64> = (0..f.param_count())
                .map(|j| 0.5 + i as f64 + j as f64 * 0.125)
                .collect();
            let law = Law::from_values(f, &v).unwrap();
            assert_eq!(law.values(), v);
            assert_eq!(law.family(), f);
            let map = law.to_map();
            assert_eq!(Law::from_map(f, &map).unwrap(), law);
        }
    }

    #[test]
    fn from_map_rejects_mismatched_keys() {
        let law = Law::from_values(Family::Fix, &[2.0, 1e3, 0.3, 6.0, 2.0, 0.5]).unwrap();
        let mut map = law.to_map();
        map.remove("tau");
        assert!(Law::from_map(Family::Fix, &map).is_err());
        let mut map = law.to_map();
        map.insert("zeta".into(), 1.0);
        assert!(Law::from_map(Family::Fix, &map).is_err());
    }

    #[test]
    fn extend_then_reduce_is_identity_shape() {
        let fix = Law::from_values(Family::Fix, &[2.0, 1e3, 0.3, 6.0, 2.0, 0.5]).unwrap();
        let size = fix.extend_with_size(1e4, 0.5, 0.4).unwrap();
        assert_eq!(size.family(), Family::Size);
        let back = size.reduce_to_fixed(1.0).unwrap();
        // At N = 1 the coupling is 1 and the capacity term folds into e.
        let vals = back.values();
        assert_eq!(vals[0], 2.0 + 1e4);
        assert_eq!(vals[1], 1e3);
        assert!(fix.extend_with_size(0.0, 0.5, 0.0).is_ok());
        assert!(size.extend_with_size(1.0, 1.0, 1.0).is_err());
        assert!(fix.reduce_to_fixed(1e8).is_err());
    }

    #[test]
    fn utility_decay_extension_rejects_nonzero_delta() {
        let ud = Law::from_values(Family::UtilityDecay, &[2.0, 50.0, -0.2, -0.3, 4.0]).unwrap();
        assert!(ud.extend_with_size(1e4, 0.5, 0.1).is_err());
        let ext = ud.extend_with_size(1e4, 0.5, 0.0).unwrap();
        assert_eq!(ext.family(), Family::UtilityDecaySize);
    }
}
