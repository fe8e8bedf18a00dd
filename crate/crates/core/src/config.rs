//! Flat `key = value` configuration files describing one model each.
//!
//! Schema: a `family` key selecting the parametric family plus its
//! parameters, e.g.
//!
//! ```text
//! # the diffusive reference model
//! family = brownian_drift
//! gamma = 1.0
//! ```
//!
//! Families and their keys:
//! - `brownian_drift`: `gamma`
//! - `spectrally_negative`: `alpha`, `gamma`
//! - `exp_positive_jumps`: `delta_plus`, `k_plus`, `c_minus`, `lambda`
//! - `stable_ladder_pure_kill`: `alpha`, `k_plus`
//! - `stable_ladder_gamma_ratio`: `alpha`, `alpha_prime`

use crate::error::{Error, Result};
use crate::levy::{FamilyParams, StableLadderVariant};
use std::collections::BTreeMap;

pub fn parse_config(text: &str) -> Result<FamilyParams> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("config line {}: expected key = value", lineno + 1))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let family = kv
        .remove("family")
        .ok_or_else(|| Error::InvalidParameter("config missing 'family'".into()))?;
    let mut num = |key: &str| -> Result<f64> {
        let raw = kv.remove(key).ok_or_else(|| {
            Error::InvalidParameter(format!("family {family} requires '{key}'"))
        })?;
        raw.parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("'{key}': not a number: {raw}")))
    };
    let params = match family.as_str() {
        "brownian_drift" => FamilyParams::BrownianDrift { gamma: num("gamma")? },
        "spectrally_negative" => FamilyParams::SpectrallyNegative {
            alpha: num("alpha")?,
            gamma: num("gamma")?,
        },
        "exp_positive_jumps" => FamilyParams::ExpPositiveJumps {
            delta_plus: num("delta_plus")?,
            k_plus: num("k_plus")?,
            c_minus: num("c_minus")?,
            lambda: num("lambda")?,
        },
        "stable_ladder_pure_kill" => FamilyParams::StableLadder {
            alpha: num("alpha")?,
            variant: StableLadderVariant::PureKill {
                k_plus: num("k_plus")?,
            },
        },
        "stable_ladder_gamma_ratio" => FamilyParams::StableLadder {
            alpha: num("alpha")?,
            variant: StableLadderVariant::GammaRatio {
                alpha_prime: num("alpha_prime")?,
            },
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown family '{other}'"
            )))
        }
    };
    if !kv.is_empty() {
        let extra: Vec<&str> = kv.keys().map(|s| s.as_str()).collect();
        return Err(Error::InvalidParameter(format!(
            "unknown config keys: {}",
            extra.join(", ")
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        let p = parse_config("family = brownian_drift\ngamma = 2.5\n").unwrap();
        assert_eq!(p, FamilyParams::BrownianDrift { gamma: 2.5 });
        let p = parse_config("# comment\nfamily=spectrally_negative\nalpha=0.5\ngamma=1\n")
            .unwrap();
        assert_eq!(
            p,
            FamilyParams::SpectrallyNegative {
                alpha: 0.5,
                gamma: 1.0
            }
        );
        let p = parse_config(
            "family = exp_positive_jumps\ndelta_plus=1\nk_plus=1\nc_minus=1\nlambda=1\n",
        )
        .unwrap();
        assert!(matches!(p, FamilyParams::ExpPositiveJumps { .. }));
        let p = parse_config("family = stable_ladder_gamma_ratio\nalpha=0.5\nalpha_prime=0.25\n")
            .unwrap();
        assert!(matches!(p, FamilyParams::StableLadder { .. }));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config("gamma = 1.0\n").is_err()); // no family
        assert!(parse_config("family = unknown\n").is_err());
        assert!(parse_config("family = brownian_drift\n").is_err()); // missing gamma
        assert!(parse_config("family = brownian_drift\ngamma = x\n").is_err());
        assert!(parse_config("family = brownian_drift\ngamma = 1\nbogus = 2\n").is_err());
        assert!(parse_config("family = brownian_drift\ngamma 1\n").is_err());
    }
}
