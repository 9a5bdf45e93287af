//! Run configuration: flat `section.key = value` text. `[section]` headers
//! are accepted as well; `#` and `;` start comments.
//!
//! ```text
//! model.spot = 100
//! model.rate = 0.05
//! model.sigma = 0.2
//! model.intensity_q = 1
//! model.law = normal:-0.1:0.15
//! model.transform = exp_minus_one
//! contract.kind = call
//! contract.strike = 100
//! contract.maturity = 1
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use crate::density::{SeriesTruncation, DEFAULT_POINTS};
use crate::error::{Error, Result};
use crate::grid::Strictness;
use crate::laws::{JumpLaw, JumpTransform};
use crate::mc::McConfig;
use crate::model::{ContractKind, LevyModel, OptionContract};
use crate::pricing::{GridSpec, PricingSettings, Route};

/// Every accepted key with its default (`None` means required).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("model.spot", None),
    ("model.rate", None),
    ("model.sigma", None),
    ("model.intensity_q", Some("0")),
    ("model.law", Some("unit:0")),
    ("model.transform", Some("exp_minus_one")),
    ("model.appreciation", Some("none")),
    ("model.intensity_p", Some("none")),
    ("contract.kind", Some("call")),
    ("contract.strike", None),
    ("contract.maturity", None),
    ("contract.valuation_time", Some("0")),
    ("contract.barrier", Some("none")),
    ("contract.payout", Some("1")),
    ("numerics.grid", Some("auto")),
    ("numerics.n_points", Some("4096")),
    ("numerics.tail_tolerance", Some("1e-12")),
    ("numerics.max_terms", Some("200")),
    ("numerics.strict", Some("true")),
    ("mc.n_paths", Some("100000")),
    ("mc.n_steps", Some("512")),
    ("mc.seed", Some("0")),
    ("mc.bridge", Some("true")),
];

#[derive(Debug, Clone)]
pub struct NumericsConfig {
    pub grid: GridSpec,
    pub n_points: usize,
    pub truncation: SeriesTruncation,
    pub strictness: Strictness,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: LevyModel,
    pub contract: OptionContract,
    pub numerics: NumericsConfig,
    pub mc: McConfig,
    /// Resolved value of every key, with a flag for values taken from the
    /// defaults.
    pub resolved: Vec<(String, String, bool)>,
}

struct Entries {
    values: BTreeMap<String, String>,
}

impl Entries {
    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::validation(key, "required key is missing"))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::validation(key, format!("cannot parse `{raw}`")))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key)?.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            other => Err(Error::validation(
                key,
                format!("`{other}` is not a boolean"),
            )),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_with_overrides(&text, &[])
    }

    /// Parses `text` and then applies `overrides` (`key`, `value`) pairs.
    pub fn from_str_with_overrides(text: &str, overrides: &[(&str, String)]) -> Result<Self> {
        let ini = Ini::load_from_str(text)
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let mut given = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{}.{}", s.trim(), k.trim()),
                    None => k.trim().to_string(),
                };
                given.insert(key, v.trim().to_string());
            }
        }
        for (k, v) in overrides {
            given.insert((*k).to_string(), v.clone());
        }
        if let Some(unknown) = given
            .keys()
            .find(|k| !KEYS.iter().any(|(known, _)| known == k))
        {
            return Err(Error::validation(unknown.as_str(), "unknown key"));
        }
        let mut values = BTreeMap::new();
        let mut resolved = Vec::new();
        for (key, default) in KEYS {
            match (given.get(*key), default) {
                (Some(v), _) => {
                    values.insert(key.to_string(), v.clone());
                    resolved.push((key.to_string(), v.clone(), false));
                }
                (None, Some(d)) => {
                    values.insert(key.to_string(), d.to_string());
                    resolved.push((key.to_string(), d.to_string(), true));
                }
                (None, None) => {}
            }
        }
        let e = Entries { values };

        // Physical-measure inputs are validated and reported but do not
        // enter prices.
        for key in ["model.appreciation", "model.intensity_p"] {
            if e.raw(key)? != "none" {
                let v: f64 = e.parse(key)?;
                if !v.is_finite() || (key == "model.intensity_p" && v < 0.0) {
                    return Err(Error::validation(key, format!("{v} is out of range")));
                }
            }
        }
        let law: JumpLaw = e.raw("model.law")?.parse()?;
        let transform: JumpTransform = e.raw("model.transform")?.parse()?;
        let model = LevyModel::new(
            e.parse("model.spot")?,
            e.parse("model.rate")?,
            e.parse("model.sigma")?,
            e.parse("model.intensity_q")?,
            law,
            transform,
        )?;

        let kind =
            match e.raw("contract.kind")? {
                "call" => ContractKind::EuropeanCall,
                "put" => ContractKind::EuropeanPut,
                "digital" => ContractKind::CashOrNothingCall {
                    payout: e.parse("contract.payout")?,
                },
                "down_and_out_call" => {
                    if e.raw("contract.barrier")? == "none" {
                        return Err(Error::validation(
                            "contract.barrier",
                            "a down-and-out call needs a barrier",
                        ));
                    }
                    ContractKind::DownAndOutCall {
                        barrier: e.parse("contract.barrier")?,
                    }
                }
                other => return Err(Error::validation(
                    "contract.kind",
                    format!(
                        "unknown kind `{other}` (expected call, put, digital or down_and_out_call)"
                    ),
                )),
            };
        let contract = OptionContract::new(
            kind,
            e.parse("contract.strike")?,
            e.parse("contract.maturity")?,
            e.parse("contract.valuation_time")?,
        )?;
        model.validate_on(contract.valuation_time, contract.maturity)?;

        let grid = match e.raw("numerics.grid")? {
            "auto" => GridSpec::Auto,
            bounds => {
                let parts: Vec<&str> = bounds.split(',').map(str::trim).collect();
                let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
                match parsed.as_deref() {
                    Some([lo, hi]) if lo < hi => GridSpec::Bounds {
                        x_min: *lo,
                        x_max: *hi,
                    },
                    _ => return Err(Error::validation(
                        "numerics.grid",
                        format!(
                            "`{bounds}` is neither `auto` nor `x_min, x_max` with x_min < x_max"
                        ),
                    )),
                }
            }
        };
        let n_points: usize = e.parse("numerics.n_points")?;
        if n_points < 4 || !n_points.is_power_of_two() {
            return Err(Error::validation(
                "numerics.n_points",
                format!("{n_points} is not a power of two >= 4"),
            ));
        }
        let truncation = SeriesTruncation {
            tail_tolerance: e.parse("numerics.tail_tolerance")?,
            max_terms: e.parse("numerics.max_terms")?,
        };
        truncation
            .validate()
            .map_err(|err| Error::validation("numerics.tail_tolerance", err.to_string()))?;
        let strictness = if e.flag("numerics.strict")? {
            Strictness::Strict
        } else {
            Strictness::Relaxed
        };

        let mut mc = McConfig::new(
            e.parse("mc.n_paths")?,
            e.parse("mc.n_steps")?,
            e.parse("mc.seed")?,
        )?;
        mc.bridge_correction = e.flag("mc.bridge")?;

        Ok(Self {
            model,
            contract,
            numerics: NumericsConfig {
                grid,
                n_points,
                truncation,
                strictness,
            },
            mc,
            resolved,
        })
    }

    pub fn pricing_settings(&self, route: Route, check: bool) -> PricingSettings {
        PricingSettings {
            route,
            grid: self.numerics.grid,
            n_points: self.numerics.n_points,
            truncation: self.numerics.truncation,
            strictness: self.numerics.strictness,
            check,
        }
    }
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::Auto,
            n_points: DEFAULT_POINTS,
            truncation: SeriesTruncation::default(),
            strictness: Strictness::Strict,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "model.spot = 100\nmodel.rate = 0.05\nmodel.sigma = 0.2\ncontract.strike = 100\ncontract.maturity = 1\n";

    fn key_of(err: Error) -> String {
        match err {
            Error::Validation { key, .. } => key,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn flat_and_sectioned_forms_agree() {
        let flat = RunConfig::from_str_with_overrides(BASE, &[]).unwrap();
        let sectioned = "[model]\nspot = 100\nrate = 0.05\nsigma = 0.2\n[contract]\nstrike = 100\nmaturity = 1\n";
        let s = RunConfig::from_str_with_overrides(sectioned, &[]).unwrap();
        assert_eq!(flat.contract, s.contract);
        assert_eq!(flat.model.spot, s.model.spot);
        assert!(flat
            .resolved
            .iter()
            .any(|(k, v, d)| k == "mc.seed" && v == "0" && *d));
    }

    #[test]
    fn errors_name_the_key() {
        let bad_law = format!("{BASE}model.intensity_q = 1\nmodel.law = geometric:1.5\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&bad_law, &[]).unwrap_err()),
            "model.law"
        );
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides("model.spot = 1\n", &[]).unwrap_err()),
            "model.rate"
        );
        let typo = format!("{BASE}model.sigam = 0.3\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&typo, &[]).unwrap_err()),
            "model.sigam"
        );
        let neg = format!("{BASE}contract.valuation_time = 2\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&neg, &[]).unwrap_err()),
            "contract.maturity"
        );
        let grid = format!("{BASE}numerics.n_points = 1000\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&grid, &[]).unwrap_err()),
            "numerics.n_points"
        );
        let barrier = format!("{BASE}contract.kind = down_and_out_call\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&barrier, &[]).unwrap_err()),
            "contract.barrier"
        );
        let physical = format!("{BASE}model.intensity_p = -1\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&physical, &[]).unwrap_err()),
            "model.intensity_p"
        );
        let paths = format!("{BASE}mc.n_paths = 0\n");
        assert_eq!(
            key_of(RunConfig::from_str_with_overrides(&paths, &[]).unwrap_err()),
            "mc.n_paths"
        );
    }

    #[test]
    fn overrides_and_bounds() {
        let text = format!("{BASE}numerics.grid = 0.5, 8.5\n");
        let c = RunConfig::from_str_with_overrides(&text, &[("mc.seed", "42".into())]).unwrap();
        assert_eq!(c.mc.seed, 42);
        assert_eq!(
            c.numerics.grid,
            GridSpec::Bounds {
                x_min: 0.5,
                x_max: 8.5
            }
        );
        let physical = format!("{BASE}model.appreciation = 0.12\nmodel.intensity_p = 3\n");
        let p = RunConfig::from_str_with_overrides(&physical, &[]).unwrap();
        assert_eq!(p.model.rate, c.model.rate);
        assert_eq!(p.model.intensity_q, c.model.intensity_q);
    }
}
