//! Flat `key = value` experiment configs with `[section]` headers.
//!
//! The format is deliberately plain: `#` starts a comment, blank lines are
//! ignored, values are whitespace-separated tokens. Every parse or
//! validation failure carries the 1-based line and column it points at.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use isinglab::estimators::CriticalSide;
use isinglab::gibbs::Model;
use isinglab::lattice::Coord;

/// A config failure, addressed to a spot in the text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> ConfigError {
        ConfigError { line, column, message: message.into() }
    }
}

/// One parsed `key = value` line.
#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
    /// Column of the first value character (or of the key when empty).
    value_column: usize,
}

/// The raw section/key/value table, before typed interpretation.
#[derive(Debug, Default)]
struct RawConfig {
    entries: Vec<Entry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = Vec::new();
        let mut section = String::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(at) => &raw_line[..at],
                None => raw_line,
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let column = line.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::new(line_no, column, "unterminated section header"));
                };
                if name.is_empty() {
                    return Err(ConfigError::new(line_no, column, "empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError::new(
                    line_no,
                    column,
                    format!("expected `key = value`, found {trimmed:?}"),
                ));
            };
            let key = line[..eq].trim();
            if key.is_empty() {
                return Err(ConfigError::new(line_no, column, "missing key before `=`"));
            }
            if section.is_empty() {
                return Err(ConfigError::new(
                    line_no,
                    column,
                    format!("key {key:?} appears before any [section] header"),
                ));
            }
            let value = line[eq + 1..].trim();
            let value_column = if value.is_empty() {
                column
            } else {
                line[eq + 1..].find(|c: char| !c.is_whitespace()).unwrap_or(0) + eq + 2
            };
            if !seen.insert((section.clone(), key.to_string())) {
                return Err(ConfigError::new(
                    line_no,
                    column,
                    format!("duplicate key {key:?} in section [{section}]"),
                ));
            }
            entries.push(Entry {
                section: section.clone(),
                key: key.to_string(),
                value: value.to_string(),
                line: line_no,
                value_column,
            });
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    fn require(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key).ok_or_else(|| {
            let line = self.entries.last().map_or(1, |e| e.line);
            ConfigError::new(line, 1, format!("missing required key `{key}` in section [{section}]"))
        })
    }

    /// Reject keys nothing consumed, so typos fail loudly.
    fn check_consumed(&self, allowed: &[(&str, &[&str])]) -> Result<(), ConfigError> {
        for entry in &self.entries {
            let known = allowed
                .iter()
                .any(|(s, keys)| *s == entry.section && keys.contains(&entry.key.as_str()));
            if !known {
                return Err(ConfigError::new(
                    entry.line,
                    1,
                    format!("unknown key `{}` in section [{}]", entry.key, entry.section),
                ));
            }
        }
        Ok(())
    }
}

impl Entry {
    fn bad(&self, message: impl fmt::Display) -> ConfigError {
        ConfigError::new(self.line, self.value_column, message.to_string())
    }

    fn as_f64(&self) -> Result<f64, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.bad(format_args!("expected a number, found {:?}", self.value)))
    }

    fn as_u64(&self) -> Result<u64, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.bad(format_args!("expected a non-negative integer, found {:?}", self.value)))
    }

    fn as_coord(&self) -> Result<Coord, ConfigError> {
        let n: Coord = self
            .value
            .parse()
            .map_err(|_| self.bad(format_args!("expected an integer size, found {:?}", self.value)))?;
        if n < 1 {
            return Err(self.bad("sizes must be at least 1"));
        }
        Ok(n)
    }

    fn as_coord_list(&self) -> Result<Vec<Coord>, ConfigError> {
        let mut out = Vec::new();
        for token in self.value.split_whitespace() {
            let n: Coord = token
                .parse()
                .map_err(|_| self.bad(format_args!("expected integer sizes, found {token:?}")))?;
            if n < 1 {
                return Err(self.bad("sizes must be at least 1"));
            }
            out.push(n);
        }
        if out.is_empty() {
            return Err(self.bad("expected at least one size"));
        }
        Ok(out)
    }

    fn as_f64_list(&self) -> Result<Vec<f64>, ConfigError> {
        let mut out = Vec::new();
        for token in self.value.split_whitespace() {
            out.push(
                token
                    .parse()
                    .map_err(|_| self.bad(format_args!("expected numbers, found {token:?}")))?,
            );
        }
        if out.is_empty() {
            return Err(self.bad("expected at least one number"));
        }
        Ok(out)
    }
}

/// Which pipeline a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Estimate,
    CorrLen,
    ArmExponent,
    L0Scan,
    Scaling,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::CorrLen => "corrlen",
            ExperimentKind::ArmExponent => "arm-exponent",
            ExperimentKind::L0Scan => "l0-scan",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Verify => "verify",
        }
    }
}

/// Which probability is tabulated against size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Crossing,
    OneArm,
    TwoArmBoundary,
    ThreeArmBoundary,
    FourArm,
    Circuit,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::OneArm => "one-arm",
            EventKind::TwoArmBoundary => "two-arm-boundary",
            EventKind::ThreeArmBoundary => "three-arm-boundary",
            EventKind::FourArm => "four-arm",
            EventKind::Circuit => "circuit",
        }
    }
}

/// Sampling block, mirrored into the estimators' plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: u32,
    pub burn_in: u64,
    pub thinning: u64,
}

/// Per-kind extra parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum KindParams {
    Estimate { event: EventKind, sizes: Vec<Coord> },
    CorrLen { epsilon: f64, n_max: Coord, side: Option<CriticalSide> },
    ArmExponent { event: EventKind, sizes: Vec<Coord> },
    L0Scan { deltas: Vec<f64>, n_max: Coord },
    Scaling {
        delta_r: (f64, f64),
        nu: (f64, f64),
        measured: Vec<(String, f64, f64)>,
    },
    Verify { full: bool },
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: Option<Model>,
    pub plan: Option<PlanConfig>,
    pub params: KindParams,
    pub output_dir: PathBuf,
}

const MODEL_KEYS: (&str, &[&str]) = ("model", &["family", "p", "temperature", "field"]);
const PLAN_KEYS: (&str, &[&str]) =
    ("plan", &["samples", "seed", "workers", "burn_in", "thinning"]);
const OUTPUT_KEYS: (&str, &[&str]) = ("output", &["dir"]);

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let kind_entry = raw.require("experiment", "kind")?;
        let kind = match kind_entry.value.as_str() {
            "estimate" => ExperimentKind::Estimate,
            "corrlen" => ExperimentKind::CorrLen,
            "arm-exponent" => ExperimentKind::ArmExponent,
            "l0-scan" => ExperimentKind::L0Scan,
            "scaling" => ExperimentKind::Scaling,
            "verify" => ExperimentKind::Verify,
            other => {
                return Err(kind_entry.bad(format_args!(
                    "unknown experiment kind {other:?} (expected estimate, corrlen, \
                     arm-exponent, l0-scan, scaling, or verify)"
                )))
            }
        };

        let output_dir = raw
            .get("output", "dir")
            .map(|e| PathBuf::from(&e.value))
            .unwrap_or_else(|| PathBuf::from("."));

        let model = Self::parse_model(&raw)?;
        let plan = Self::parse_plan(&raw)?;

        let needs_sampling = !matches!(kind, ExperimentKind::Scaling | ExperimentKind::Verify);
        if needs_sampling {
            if model.is_none() {
                return Err(ConfigError::new(1, 1, "missing [model] section".to_string()));
            }
            if plan.is_none() {
                return Err(ConfigError::new(1, 1, "missing [plan] section".to_string()));
            }
        }

        let params = match kind {
            ExperimentKind::Estimate => KindParams::Estimate {
                event: Self::parse_event(&raw)?,
                sizes: raw.require("event", "sizes")?.as_coord_list()?,
            },
            ExperimentKind::ArmExponent => {
                let event = Self::parse_event(&raw)?;
                if matches!(event, EventKind::Crossing | EventKind::Circuit) {
                    return Err(raw
                        .require("event", "kind")?
                        .bad("arm-exponent needs an arm event (one-arm, two-arm-boundary, three-arm-boundary, four-arm)"));
                }
                KindParams::ArmExponent {
                    event,
                    sizes: raw.require("event", "sizes")?.as_coord_list()?,
                }
            }
            ExperimentKind::CorrLen => {
                let side_entry = raw.get("search", "side");
                let side = match side_entry.map(|e| e.value.as_str()) {
                    None | Some("auto") => None,
                    Some("supercritical") => Some(CriticalSide::Supercritical),
                    Some("subcritical") => Some(CriticalSide::Subcritical),
                    Some(other) => {
                        return Err(side_entry
                            .expect("present in this branch")
                            .bad(format_args!(
                                "unknown side {other:?} (expected auto, supercritical, or subcritical)"
                            )))
                    }
                };
                KindParams::CorrLen {
                    epsilon: raw.require("search", "epsilon")?.as_f64()?,
                    n_max: raw.require("search", "n_max")?.as_coord()?,
                    side,
                }
            }
            ExperimentKind::L0Scan => KindParams::L0Scan {
                deltas: raw.require("search", "deltas")?.as_f64_list()?,
                n_max: raw.require("search", "n_max")?.as_coord()?,
            },
            ExperimentKind::Scaling => {
                let pair = |key: &str| -> Result<(f64, f64), ConfigError> {
                    let entry = raw.require("scaling", key)?;
                    let nums = entry.as_f64_list()?;
                    match nums.as_slice() {
                        [value] => Ok((*value, 0.0)),
                        [value, stderr] => Ok((*value, *stderr)),
                        _ => Err(entry.bad("expected `value` or `value stderr`")),
                    }
                };
                let mut measured = Vec::new();
                for name in ["delta", "eta", "beta", "gamma", "gap"] {
                    let key = format!("measured_{name}");
                    if let Some(entry) = raw.get("scaling", &key) {
                        let nums = entry.as_f64_list()?;
                        let (value, stderr) = match nums.as_slice() {
                            [value] => (*value, 0.0),
                            [value, stderr] => (*value, *stderr),
                            _ => return Err(entry.bad("expected `value` or `value stderr`")),
                        };
                        measured.push((name.to_string(), value, stderr));
                    }
                }
                KindParams::Scaling { delta_r: pair("delta_r")?, nu: pair("nu")?, measured }
            }
            ExperimentKind::Verify => {
                let full = match raw.get("verify", "level").map(|e| e.value.as_str()) {
                    None | Some("quick") => false,
                    Some("full") => true,
                    Some(other) => {
                        return Err(raw
                            .get("verify", "level")
                            .expect("present in this branch")
                            .bad(format_args!("unknown level {other:?} (expected quick or full)")))
                    }
                };
                KindParams::Verify { full }
            }
        };

        let mut allowed: Vec<(&str, &[&str])> = vec![
            ("experiment", &["kind"]),
            MODEL_KEYS,
            PLAN_KEYS,
            OUTPUT_KEYS,
        ];
        match kind {
            ExperimentKind::Estimate | ExperimentKind::ArmExponent => {
                allowed.push(("event", &["kind", "sizes"]));
            }
            ExperimentKind::CorrLen => allowed.push(("search", &["epsilon", "n_max", "side"])),
            ExperimentKind::L0Scan => allowed.push(("search", &["deltas", "n_max"])),
            ExperimentKind::Scaling => {
                allowed.push((
                    "scaling",
                    &[
                        "delta_r",
                        "nu",
                        "measured_delta",
                        "measured_eta",
                        "measured_beta",
                        "measured_gamma",
                        "measured_gap",
                    ],
                ));
            }
            ExperimentKind::Verify => allowed.push(("verify", &["level"])),
        }
        raw.check_consumed(&allowed)?;

        Ok(ExperimentConfig { kind, model, plan, params, output_dir })
    }

    fn parse_event(raw: &RawConfig) -> Result<EventKind, ConfigError> {
        let entry = raw.require("event", "kind")?;
        match entry.value.as_str() {
            "crossing" => Ok(EventKind::Crossing),
            "one-arm" => Ok(EventKind::OneArm),
            "two-arm-boundary" => Ok(EventKind::TwoArmBoundary),
            "three-arm-boundary" => Ok(EventKind::ThreeArmBoundary),
            "four-arm" => Ok(EventKind::FourArm),
            "circuit" => Ok(EventKind::Circuit),
            other => Err(entry.bad(format_args!(
                "unknown event kind {other:?} (expected crossing, one-arm, two-arm-boundary, \
                 three-arm-boundary, four-arm, or circuit)"
            ))),
        }
    }

    fn parse_model(raw: &RawConfig) -> Result<Option<Model>, ConfigError> {
        let Some(family) = raw.get("model", "family") else {
            return Ok(None);
        };
        let model = match family.value.as_str() {
            "bernoulli" => Model::Bernoulli { p: raw.require("model", "p")?.as_f64()? },
            "ising" => Model::Ising {
                temperature: raw.require("model", "temperature")?.as_f64()?,
                field: raw.require("model", "field")?.as_f64()?,
            },
            other => {
                return Err(family
                    .bad(format_args!("unknown model family {other:?} (expected bernoulli or ising)")))
            }
        };
        if let Err(err) = model.validate() {
            return Err(family.bad(err));
        }
        Ok(Some(model))
    }

    fn parse_plan(raw: &RawConfig) -> Result<Option<PlanConfig>, ConfigError> {
        let Some(samples) = raw.get("plan", "samples") else {
            return Ok(None);
        };
        let n = samples.as_u64()?;
        if n == 0 {
            return Err(samples.bad("samples must be at least 1"));
        }
        // Explicit seeds are part of the reproducibility contract: there is
        // no wall-clock fallback.
        let seed = raw.require("plan", "seed")?.as_u64()?;
        let workers = match raw.get("plan", "workers") {
            Some(entry) => {
                let w = entry.as_u64()?;
                u32::try_from(w).map_err(|_| entry.bad("workers is unreasonably large"))?
            }
            None => 0,
        };
        let burn_in = match raw.get("plan", "burn_in") {
            Some(entry) => entry.as_u64()?,
            None => 0,
        };
        let thinning = match raw.get("plan", "thinning") {
            Some(entry) => {
                let t = entry.as_u64()?;
                if t == 0 {
                    return Err(entry.bad("thinning must be at least 1"));
                }
                t
            }
            None => 1,
        };
        Ok(Some(PlanConfig { samples: n, seed, workers, burn_in, thinning }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_minimal_estimate_config_parses() {
        let text = "\
[experiment]
kind = estimate

[model]
family = bernoulli
p = 0.5927

[event]
kind = crossing
sizes = 8 16 32

[plan]
samples = 1000
seed = 7
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Estimate);
        assert_eq!(cfg.model, Some(Model::Bernoulli { p: 0.5927 }));
        let plan = cfg.plan.unwrap();
        assert_eq!(plan.samples, 1000);
        assert_eq!(plan.seed, 7);
        assert_eq!(plan.workers, 0);
        match cfg.params {
            KindParams::Estimate { event, sizes } => {
                assert_eq!(event, EventKind::Crossing);
                assert_eq!(sizes, vec![8, 16, 32]);
            }
            other => panic!("wrong params {other:?}"),
        }
    }

    #[test]
    fn parse_errors_point_at_line_and_column() {
        let text = "[experiment]\nkind = estimate\n\n[model]\nfamily = bernoulli\np = banana\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.line, 6);
        assert_eq!(err.column, 5);
        assert!(err.message.contains("banana"), "{}", err.message);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let text = "\
[experiment]
kind = estimate
[model]
family = bernoulli
p = 0.5
[event]
kind = one-arm
sizes = 4
[plan]
samples = 10
";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(err.message.contains("seed"), "{}", err.message);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "\
[experiment]
kind = verify
speed = fast
";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("speed"), "{}", err.message);
    }

    #[test]
    fn duplicate_keys_and_bad_headers_are_rejected() {
        let dup = "[plan]\nsamples = 1\nsamples = 2\n";
        let err = ExperimentConfig::parse(dup).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("duplicate"));

        let bad = "[plan\nsamples = 1\n";
        let err = ExperimentConfig::parse(bad).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn scaling_configs_need_no_sampling_plan() {
        let text = "\
[experiment]
kind = scaling
[scaling]
delta_r = 9.6 0.2
nu = 1.3333
measured_eta = 0.21 0.01
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        match cfg.params {
            KindParams::Scaling { delta_r, nu, measured } => {
                assert_eq!(delta_r, (9.6, 0.2));
                assert_eq!(nu, (1.3333, 0.0));
                assert_eq!(measured, vec![("eta".to_string(), 0.21, 0.01)]);
            }
            other => panic!("wrong params {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\
# full-line comment
[experiment]
kind = verify   # trailing comment

[verify]
level = full
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.params, KindParams::Verify { full: true });
    }
}
