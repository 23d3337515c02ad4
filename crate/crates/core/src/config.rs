//! Scenario configuration files.
//!
//! Scenarios are TOML with the field names below. `standard_rate` is either
//! the string `"solve"` or a decimal outside-basis rate. Selectors are
//! `"default"`, `"tag:<tag>"` or `"items:code1,code2"`.
//!
//! ```toml
//! standard_rate = "solve"
//!
//! [[classes]]
//! name = "standard"
//! kind = "multiplier"
//! value = 1.0
//! selector = "default"
//!
//! [cashback]
//! eligibility_line = 420.0
//! scope_mode = "none"
//! scope_tags = []
//!
//! [transfer]
//! mode = "none"
//! financing_tags = []
//!
//! [neutrality]
//! tolerance = 1e-9
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::distribution::PovertyLine;
use crate::rates::{Tag, TagSet};
use crate::reform::{
    CashbackPolicy, CashbackScope, ItemSelector, RateClass, RateClassKind, ReformScenario,
    StandardRate, TransferPolicy,
};

pub const DEFAULT_NEUTRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("standard_rate must be \"solve\" or a non-negative decimal, got {0:?}")]
    BadStandardRate(String),
    #[error("class {class:?}: unknown kind {kind:?}")]
    UnknownKind { class: String, kind: String },
    #[error("class {class:?}: kind {kind:?} requires a value")]
    MissingValue { class: String, kind: String },
    #[error("class {class:?}: bad selector {selector:?}")]
    BadSelector { class: String, selector: String },
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("unknown scope_mode {0:?}")]
    UnknownScopeMode(String),
    #[error("unknown transfer mode {0:?}")]
    UnknownTransferMode(String),
    #[error("eligibility_line must be > 0, got {0}")]
    BadEligibilityLine(f64),
    #[error("neutrality tolerance must be > 0, got {0}")]
    BadTolerance(f64),
    #[error("scenario declares no classes")]
    NoClasses,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawStandardRate {
    Text(String),
    Number(f64),
}

#[derive(Debug, Deserialize)]
struct RawClass {
    name: String,
    kind: String,
    value: Option<f64>,
    selector: String,
}

#[derive(Debug, Deserialize)]
struct RawCashback {
    eligibility_line: f64,
    scope_mode: String,
    #[serde(default)]
    scope_tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawTransfer {
    mode: String,
    #[serde(default)]
    financing_tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawNeutrality {
    tolerance: f64,
}

#[derive(Debug, Deserialize)]
struct RawScenario {
    name: Option<String>,
    standard_rate: RawStandardRate,
    classes: Vec<RawClass>,
    cashback: Option<RawCashback>,
    transfer: Option<RawTransfer>,
    neutrality: Option<RawNeutrality>,
}

fn parse_tags(names: &[String]) -> Result<TagSet, ConfigError> {
    let mut set = TagSet::EMPTY;
    for name in names {
        set.insert(Tag::parse(name).ok_or_else(|| ConfigError::UnknownTag(name.clone()))?);
    }
    Ok(set)
}

fn parse_selector(class: &str, raw: &str) -> Result<ItemSelector, ConfigError> {
    let bad = || ConfigError::BadSelector {
        class: class.to_string(),
        selector: raw.to_string(),
    };
    if raw == "default" {
        return Ok(ItemSelector::Default);
    }
    if let Some(tag_name) = raw.strip_prefix("tag:") {
        let tag = Tag::parse(tag_name.trim()).ok_or_else(bad)?;
        return Ok(ItemSelector::Tag(tag));
    }
    if let Some(list) = raw.strip_prefix("items:") {
        let codes: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        if codes.is_empty() {
            return Err(bad());
        }
        return Ok(ItemSelector::Items(codes));
    }
    Err(bad())
}

/// Parse a scenario from TOML text. `fallback_name` (usually the file stem)
/// is used when the config carries no `name` field.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<ReformScenario, ConfigError> {
    let raw: RawScenario = toml::from_str(text)?;
    if raw.classes.is_empty() {
        return Err(ConfigError::NoClasses);
    }

    let standard_rate = match raw.standard_rate {
        RawStandardRate::Text(s) if s == "solve" => StandardRate::Solve,
        RawStandardRate::Text(s) => match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => StandardRate::Fixed(v),
            _ => return Err(ConfigError::BadStandardRate(s)),
        },
        RawStandardRate::Number(v) if v >= 0.0 && v.is_finite() => StandardRate::Fixed(v),
        RawStandardRate::Number(v) => return Err(ConfigError::BadStandardRate(v.to_string())),
    };

    let mut classes = Vec::with_capacity(raw.classes.len());
    for rc in &raw.classes {
        let need_value = || -> Result<f64, ConfigError> {
            rc.value.ok_or_else(|| ConfigError::MissingValue {
                class: rc.name.clone(),
                kind: rc.kind.clone(),
            })
        };
        let kind = match rc.kind.as_str() {
            "zero" => RateClassKind::Zero,
            "multiplier" => RateClassKind::Multiplier(need_value()?),
            "selective" => RateClassKind::Selective(need_value()?),
            "fixed" => RateClassKind::Fixed(need_value()?),
            "excluded" => RateClassKind::Excluded,
            other => {
                return Err(ConfigError::UnknownKind {
                    class: rc.name.clone(),
                    kind: other.to_string(),
                })
            }
        };
        classes.push(RateClass {
            name: rc.name.clone(),
            kind,
            selector: parse_selector(&rc.name, &rc.selector)?,
        });
    }

    let cashback = match &raw.cashback {
        None => CashbackPolicy::none(),
        Some(rc) => {
            let line = PovertyLine::new(rc.eligibility_line)
                .map_err(|_| ConfigError::BadEligibilityLine(rc.eligibility_line))?;
            let scope = match rc.scope_mode.as_str() {
                "none" => CashbackScope::None,
                "all_items_except" => CashbackScope::AllItemsExcept(parse_tags(&rc.scope_tags)?),
                "only_items" => CashbackScope::OnlyItems(parse_tags(&rc.scope_tags)?),
                other => return Err(ConfigError::UnknownScopeMode(other.to_string())),
            };
            CashbackPolicy {
                eligibility_line: line,
                scope,
            }
        }
    };

    let transfer = match &raw.transfer {
        None => TransferPolicy::None,
        Some(rt) => match rt.mode.as_str() {
            "none" => TransferPolicy::None,
            "universal_per_person_financed_by" => TransferPolicy::UniversalPerPerson {
                financing: parse_tags(&rt.financing_tags)?,
            },
            other => return Err(ConfigError::UnknownTransferMode(other.to_string())),
        },
    };

    let neutrality_tol = match &raw.neutrality {
        None => DEFAULT_NEUTRALITY_TOL,
        Some(rn) if rn.tolerance > 0.0 && rn.tolerance.is_finite() => rn.tolerance,
        Some(rn) => return Err(ConfigError::BadTolerance(rn.tolerance)),
    };

    Ok(ReformScenario {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        classes,
        standard_rate,
        cashback,
        transfer,
        neutrality_tol,
    })
}

/// Load a scenario from a config file; the scenario name defaults to the
/// file stem.
pub fn load_scenario(path: &Path) -> Result<ReformScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "scenario".to_string());
    parse_scenario(&text, &stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFORM_LIKE: &str = r#"
standard_rate = "solve"

[[classes]]
name = "zero_basket"
kind = "zero"
selector = "tag:basket"

[[classes]]
name = "reduced_40"
kind = "multiplier"
value = 0.4
selector = "tag:educ_health_meds_transit_culture"

[[classes]]
name = "selective"
kind = "selective"
value = 2.0
selector = "tag:tobacco_alcohol"

[[classes]]
name = "standard"
kind = "multiplier"
value = 1.0
selector = "default"

[[classes]]
name = "domestic_services"
kind = "excluded"
selector = "tag:domestic_service"

[cashback]
eligibility_line = 420.0
scope_mode = "only_items"
scope_tags = ["energy_gas"]

[transfer]
mode = "none"
financing_tags = []

[neutrality]
tolerance = 1e-9
"#;

    #[test]
    fn parses_a_full_scenario() {
        let scenario = parse_scenario(REFORM_LIKE, "reform_test").unwrap();
        assert_eq!(scenario.name, "reform_test");
        assert_eq!(scenario.classes.len(), 5);
        assert_eq!(scenario.standard_rate, StandardRate::Solve);
        assert!(scenario.cashback.is_active());
        assert_eq!(scenario.neutrality_tol, 1e-9);
        assert!(matches!(
            scenario.classes[2].kind,
            RateClassKind::Selective(m) if m == 2.0
        ));
    }

    #[test]
    fn fixed_rate_and_named_scenarios() {
        let text = r#"
name = "uniform"
standard_rate = 0.258

[[classes]]
name = "standard"
kind = "multiplier"
value = 1.0
selector = "default"
"#;
        let scenario = parse_scenario(text, "ignored").unwrap();
        assert_eq!(scenario.name, "uniform");
        assert_eq!(scenario.standard_rate, StandardRate::Fixed(0.258));
        assert!(!scenario.cashback.is_active());
        assert_eq!(scenario.neutrality_tol, DEFAULT_NEUTRALITY_TOL);
    }

    #[test]
    fn rejects_bad_fields() {
        let bad_kind = r#"
standard_rate = "solve"
[[classes]]
name = "x"
kind = "exotic"
selector = "default"
"#;
        assert!(matches!(
            parse_scenario(bad_kind, "t"),
            Err(ConfigError::UnknownKind { .. })
        ));

        let missing_value = r#"
standard_rate = "solve"
[[classes]]
name = "x"
kind = "multiplier"
selector = "default"
"#;
        assert!(matches!(
            parse_scenario(missing_value, "t"),
            Err(ConfigError::MissingValue { .. })
        ));

        let bad_selector = r#"
standard_rate = "solve"
[[classes]]
name = "x"
kind = "multiplier"
value = 1.0
selector = "everything"
"#;
        assert!(matches!(
            parse_scenario(bad_selector, "t"),
            Err(ConfigError::BadSelector { .. })
        ));

        let bad_rate = r#"
standard_rate = "guess"
[[classes]]
name = "x"
kind = "multiplier"
value = 1.0
selector = "default"
"#;
        assert!(matches!(
            parse_scenario(bad_rate, "t"),
            Err(ConfigError::BadStandardRate(_))
        ));
    }

    #[test]
    fn items_selector_parses() {
        let text = r#"
standard_rate = "solve"
[[classes]]
name = "standard"
kind = "multiplier"
value = 1.0
selector = "default"
[[classes]]
name = "picked"
kind = "zero"
selector = "items: rice, beans "
"#;
        let scenario = parse_scenario(text, "t").unwrap();
        assert_eq!(
            scenario.classes[1].selector,
            ItemSelector::Items(vec!["rice".to_string(), "beans".to_string()])
        );
    }
}
