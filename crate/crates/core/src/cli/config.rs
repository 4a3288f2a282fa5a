//! Run configuration: a sectioned TOML file whose every key has a default,
//! overridable through `STOPGAME_<SECTION>_<KEY>` environment variables.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{GameSpec, SolverOptions, SCAN_INSET, SCAN_POINTS};
use crate::levy_model::{LevyModel, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_MU, DEFAULT_NU};
use crate::montecarlo::{Scheme, SimConfig};

pub const ENV_PREFIX: &str = "STOPGAME_";

/// A configuration problem, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mu: DEFAULT_MU,
            nu: DEFAULT_NU,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub q: f64,
    pub lambda: f64,
    pub k_c: f64,
    pub k_p: f64,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection {
            q: 0.05,
            lambda: 1.0,
            k_c: 50.0,
            k_p: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub scan_points: usize,
    pub scan_inset: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            scan_points: SCAN_POINTS,
            scan_inset: SCAN_INSET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub scheme: Scheme,
    /// Grid size of the empirical best-response scan in `verify`.
    pub scan_points: usize,
}

impl Default for McSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        McSection {
            dt: sim.dt,
            horizon: sim.horizon,
            paths: sim.paths,
            seed: sim.seed,
            antithetic: sim.antithetic,
            scheme: sim.scheme,
            scan_points: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for data files; standard output when unset.
    pub directory: Option<PathBuf>,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: None,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub game: GameSection,
    pub solver: SolverSection,
    pub mc: McSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses `text`, applies `STOPGAME_*` overrides from `env` and
    /// validates the result.
    pub fn load<I, K, V>(text: &str, env: I) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        // Typed parse of the file alone keeps line and column information.
        toml::from_str::<RunConfig>(text).map_err(|e| ConfigError(format!("config error: {e}")))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError(format!("config parse error: {e}")))?;
        apply_env_overrides(&mut table, env)?;
        let cfg: RunConfig =
            RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError(format!("config error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<LevyModel, ConfigError> {
        let m = &self.model;
        LevyModel::new(m.mu, m.nu, m.alpha, m.beta).map_err(|e| ConfigError(format!("[model] {e}")))
    }

    pub fn game_spec(&self) -> Result<GameSpec, ConfigError> {
        let g = &self.game;
        let spec = GameSpec::puts(self.model()?, g.q, g.lambda, g.k_c, g.k_p)
            .map_err(|e| ConfigError(format!("[game] {e}")))?;
        Ok(spec.with_options(SolverOptions {
            scan_points: self.solver.scan_points,
            scan_inset: self.solver.scan_inset,
        }))
    }

    pub fn sim_config(&self) -> SimConfig {
        let m = &self.mc;
        SimConfig {
            dt: m.dt,
            horizon: m.horizon,
            paths: m.paths,
            seed: m.seed,
            antithetic: m.antithetic,
            scheme: m.scheme,
        }
    }

    /// Re-checks every parameter invariant of the library types.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.game_spec()?;
        if self.solver.scan_points < 2 {
            return Err(ConfigError(format!(
                "[solver] scan_points = {} must be >= 2",
                self.solver.scan_points
            )));
        }
        if !(self.solver.scan_inset >= 0.0 && self.solver.scan_inset.is_finite()) {
            return Err(ConfigError(format!(
                "[solver] scan_inset = {} must be finite and >= 0",
                self.solver.scan_inset
            )));
        }
        self.sim_config()
            .validate(self.game.q)
            .map_err(|e| ConfigError(format!("[mc] {e}")))
    }
}

/// Inserts `STOPGAME_<SECTION>_<KEY>=<value>` pairs into `table`. The
/// value is read as a TOML scalar, falling back to a plain string.
pub fn apply_env_overrides<I, K, V>(table: &mut toml::Table, env: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut pairs: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| {
            k.as_ref()
                .strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_ascii_lowercase(), v.as_ref().to_string()))
        })
        .collect();
    pairs.sort();
    for (name, raw) in pairs {
        let Some((section, key)) = name.split_once('_') else {
            return Err(ConfigError(format!(
                "environment override {ENV_PREFIX}{}: expected <SECTION>_<KEY>",
                name.to_ascii_uppercase()
            )));
        };
        if key.is_empty() {
            return Err(ConfigError(format!(
                "environment override {ENV_PREFIX}{}: missing key",
                name.to_ascii_uppercase()
            )));
        }
        let value = parse_scalar(&raw);
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key.to_string(), value);
            }
            _ => return Err(ConfigError(format!("config error: `{section}` is not a section"))),
        }
    }
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) if t.len() == 1 => match t.remove("v") {
            Some(
                v
                @ (toml::Value::Integer(_) | toml::Value::Float(_) | toml::Value::Boolean(_) | toml::Value::String(_)),
            ) => v,
            _ => toml::Value::String(raw.to_string()),
        },
        _ => toml::Value::String(raw.to_string()),
    }
}

/// Parses a comma-separated list of finite numbers. Empty lists and
/// malformed entries are errors.
pub fn parse_value_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ConfigError("empty value list".into()));
    }
    trimmed
        .split(',')
        .map(|item| {
            let item = item.trim();
            match item.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ConfigError(format!("invalid number `{item}` in list"))),
            }
        })
        .collect()
}
