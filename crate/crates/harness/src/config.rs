//! Experiment configuration files.
//!
//! Line-oriented `key = value`. Values are JSON literals (`[[0.5, 0.5]]`,
//! `0.1`, `"bbmts"`) or bare words; an array may continue over several lines
//! until its brackets balance. `#` starts a comment.
//!
//! ```text
//! algorithm = bbmts
//! q = [[0.6, 0.3, 0.1],
//!      [0.1, 0.3, 0.6]]
//! mu = [1.0, 0.5, 0.25]
//! delta_grid = [0.1, 0.01]
//! rho = 1
//! trials = 200
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use boxed_bandit::allocation::MemberRule;
use boxed_bandit::bbmts::ResolveSchedule;
use boxed_bandit::instance::{validate, InstanceError};
use boxed_bandit::{ProblemInstance, RewardModel, ThresholdMode, ValidatedInstance};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation {
        field: &'static str,
        message: String,
    },
}

impl ConfigError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field,
            message: message.into(),
        }
    }

    /// Field name of a validation error.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Bbmts,
    Bbsea,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bbmts => "bbmts",
            Algorithm::Bbsea => "bbsea",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: ValidatedInstance,
    pub algorithm: Algorithm,
    /// Strictly decreasing, each in (0, 1).
    pub delta_grid: Vec<f64>,
    /// Required for bbmts.
    pub rho: Option<f64>,
    pub trials: u64,
    pub base_seed: u64,
    pub threshold: ThresholdMode,
    pub max_steps: u64,
    pub resolve: ResolveSchedule,
    pub member_rule: MemberRule,
    pub trace_every: Option<u64>,
    pub horizon: Option<u64>,
    /// Default output directory.
    pub output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "algorithm",
    "q",
    "mu",
    "reward_model",
    "arm_sets",
    "delta_grid",
    "rho",
    "trials",
    "base_seed",
    "threshold",
    "max_steps",
    "resolve",
    "member_rule",
    "trace_every",
    "horizon",
    "output",
];

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Raw `key -> (line, value)` pairs.
fn parse_entries(text: &str) -> Result<BTreeMap<String, (usize, Value)>, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((line, content)) = lines.next() {
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        let mut value = value.trim().to_string();
        while bracket_depth(&value) > 0 {
            match lines.next() {
                Some((_, more)) => {
                    value.push(' ');
                    value.push_str(more.trim());
                }
                None => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("unterminated array for `{key}`"),
                    })
                }
            }
        }
        let parsed = parse_value(&value).map_err(|message| ConfigError::Parse { line, message })?;
        if entries.insert(key.to_string(), (line, parsed)).is_some() {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(entries)
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

fn bracket_depth(s: &str) -> i64 {
    s.chars().fold(0, |d, c| match c {
        '[' => d + 1,
        ']' => d - 1,
        _ => d,
    })
}

fn parse_value(raw: &str) -> Result<Value, String> {
    if raw.is_empty() {
        return Err("missing value".into());
    }
    match serde_json::from_str(raw) {
        Ok(v) => Ok(v),
        Err(e) if raw.starts_with('[') || raw.starts_with('"') => Err(e.to_string()),
        // Bare words are strings.
        Err(_) if raw.chars().all(|c| !c.is_whitespace()) => Ok(Value::String(raw.to_string())),
        Err(e) => Err(e.to_string()),
    }
}

struct Fields(BTreeMap<String, (usize, Value)>);

impl Fields {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key).map(|(_, v)| v)
    }

    fn number(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| ConfigError::invalid(key, format!("expected a number, found {v}"))),
        }
    }

    fn count(&mut self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                ConfigError::invalid(key, format!("expected a non-negative integer, found {v}"))
            }),
        }
    }

    fn word(&mut self, key: &'static str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.to_ascii_lowercase())),
            Some(v) => Err(ConfigError::invalid(
                key,
                format!("expected a word, found {v}"),
            )),
        }
    }

    fn numbers(&mut self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        as_numbers(&v)
            .map(Some)
            .ok_or_else(|| ConfigError::invalid(key, "expected an array of numbers"))
    }

    fn matrix(&mut self, key: &'static str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let rows = v
            .as_array()
            .ok_or_else(|| ConfigError::invalid(key, "expected an array of arrays"))?;
        rows.iter()
            .map(|r| {
                as_numbers(r)
                    .ok_or_else(|| ConfigError::invalid(key, "expected an array of arrays"))
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

fn as_numbers(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

fn as_indices(v: &Value) -> Option<Vec<usize>> {
    v.as_array()?
        .iter()
        .map(|x| x.as_u64().map(|i| i as usize))
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut f = Fields(parse_entries(text)?);

    let algorithm = match f.word("algorithm")?.as_deref() {
        Some("bbmts") => Algorithm::Bbmts,
        Some("bbsea") => Algorithm::Bbsea,
        Some(other) => {
            return Err(ConfigError::invalid(
                "algorithm",
                format!("unknown `{other}`"),
            ))
        }
        None => return Err(ConfigError::invalid("algorithm", "missing")),
    };

    let q = f
        .matrix("q")?
        .ok_or_else(|| ConfigError::invalid("q", "missing"))?;
    let mu = f
        .numbers("mu")?
        .ok_or_else(|| ConfigError::invalid("mu", "missing"))?;
    let reward_model = match f.word("reward_model")?.as_deref() {
        None => match algorithm {
            Algorithm::Bbmts => RewardModel::GaussianUnitVariance,
            Algorithm::Bbsea => RewardModel::BernoulliLike,
        },
        Some("gaussian") => RewardModel::GaussianUnitVariance,
        Some("bernoulli") => RewardModel::BernoulliLike,
        Some(other) => {
            return Err(ConfigError::invalid(
                "reward_model",
                format!("unknown `{other}`"),
            ))
        }
    };
    if algorithm == Algorithm::Bbmts && reward_model != RewardModel::GaussianUnitVariance {
        return Err(ConfigError::invalid(
            "reward_model",
            "bbmts assumes unit-variance Gaussian rewards",
        ));
    }
    let arm_sets = match f.take("arm_sets") {
        None => None,
        Some(v) => {
            let sets = v
                .as_array()
                .and_then(|rows| rows.iter().map(as_indices).collect::<Option<Vec<_>>>())
                .ok_or_else(|| {
                    ConfigError::invalid("arm_sets", "expected arrays of arm indices")
                })?;
            Some(sets)
        }
    };
    if algorithm == Algorithm::Bbsea && arm_sets.is_none() {
        return Err(ConfigError::invalid(
            "arm_sets",
            "bbsea needs a partition of the arms",
        ));
    }
    let instance = validate(ProblemInstance {
        q,
        mu,
        reward_model,
        arm_sets,
    })
    .map_err(instance_error)?;
    if instance.num_arms() < 2 {
        return Err(ConfigError::invalid("mu", "at least two arms are needed"));
    }

    let delta_grid = f
        .numbers("delta_grid")?
        .ok_or_else(|| ConfigError::invalid("delta_grid", "missing"))?;
    if delta_grid.is_empty() {
        return Err(ConfigError::invalid("delta_grid", "empty"));
    }
    if let Some(d) = delta_grid.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(ConfigError::invalid(
            "delta_grid",
            format!("{d} is not in (0, 1)"),
        ));
    }
    if delta_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConfigError::invalid(
            "delta_grid",
            "must be strictly decreasing",
        ));
    }

    let rho = f.number("rho")?;
    match rho {
        None if algorithm == Algorithm::Bbmts => {
            return Err(ConfigError::invalid("rho", "required for bbmts"))
        }
        Some(r) if !(r > 0.0 && r.is_finite()) => {
            return Err(ConfigError::invalid("rho", format!("{r} is not positive")))
        }
        _ => {}
    }

    let trials = f.count("trials")?.unwrap_or(1);
    if trials == 0 {
        return Err(ConfigError::invalid("trials", "must be at least 1"));
    }
    let base_seed = f.count("base_seed")?.unwrap_or(0);

    let threshold = match f.word("threshold")?.as_deref() {
        None | Some("certified") => ThresholdMode::Certified,
        Some("practical") => ThresholdMode::Practical,
        Some(other) => {
            return Err(ConfigError::invalid(
                "threshold",
                format!("unknown `{other}`"),
            ))
        }
    };
    let max_steps = f.count("max_steps")?.unwrap_or(match algorithm {
        Algorithm::Bbmts => boxed_bandit::bbmts::DEFAULT_MAX_STEPS,
        Algorithm::Bbsea => boxed_bandit::bbsea::DEFAULT_MAX_STEPS,
    });
    if max_steps == 0 {
        return Err(ConfigError::invalid("max_steps", "must be at least 1"));
    }
    let resolve = match f.word("resolve")?.as_deref() {
        None | Some("strict") => ResolveSchedule::Strict,
        Some("thinned") => ResolveSchedule::Thinned,
        Some(other) => {
            return Err(ConfigError::invalid(
                "resolve",
                format!("unknown `{other}`"),
            ))
        }
    };
    let member_rule = match f.word("member_rule")?.as_deref() {
        None | Some("center") => MemberRule::Center,
        Some("first") => MemberRule::FavorFirst,
        Some("last") => MemberRule::FavorLast,
        Some(other) => {
            return Err(ConfigError::invalid(
                "member_rule",
                format!("unknown `{other}`"),
            ))
        }
    };
    let trace_every = optional_positive(&mut f, "trace_every")?;
    let horizon = optional_positive(&mut f, "horizon")?;
    let output = match f.take("output") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => {
            return Err(ConfigError::invalid(
                "output",
                format!("expected a path, found {v}"),
            ))
        }
    };

    Ok(ExperimentConfig {
        instance,
        algorithm,
        delta_grid,
        rho,
        trials,
        base_seed,
        threshold,
        max_steps,
        resolve,
        member_rule,
        trace_every,
        horizon,
        output,
    })
}

/// `off` or a positive integer.
fn optional_positive(f: &mut Fields, key: &'static str) -> Result<Option<u64>, ConfigError> {
    match f.take(key) {
        None => Ok(None),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("off") => Ok(None),
        Some(v) => match v.as_u64() {
            Some(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::invalid(
                key,
                format!("expected `off` or a positive integer, found {v}"),
            )),
        },
    }
}

fn instance_error(e: InstanceError) -> ConfigError {
    let field = match e {
        InstanceError::PartitionViolation { .. } => "arm_sets",
        InstanceError::TiedBestArm { .. } | InstanceError::InvalidMean { .. } => "mu",
        _ => "q",
    };
    ConfigError::invalid(field, e.to_string())
}
