use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use veilvote::harness::{DataSource, FederationSpec, KChoice, SchemeConfig};
use veilvote::learners::FeatureMapKind;

use crate::CliError;

/// One `run` configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: u64,
    pub delta: f64,
    pub output: PathBuf,
    pub federation: FederationSpec,
    pub scheme: SchemeConfig,
}

/// A scheme block of a `compare` file; may carry its own federation,
/// which must then equal every other block's.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SchemeBlock {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub federation: Option<FederationSpec>,
    #[serde(flatten)]
    pub scheme: SchemeConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: u64,
    pub delta: f64,
    pub output: PathBuf,
    #[serde(default)]
    pub federation: Option<FederationSpec>,
    #[serde(default)]
    pub scheme: Vec<SchemeBlock>,
}

fn one() -> u64 {
    1
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    toml::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("file not found: {}", p.display())))
    }
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("delta out of range (0, 1): {delta}")))
    }
}

fn check_repeats(repeats: u64) -> Result<(), CliError> {
    if repeats == 0 {
        Err(CliError::Config("repeats must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Resolve relative paths against the config's directory and check that
/// referenced inputs exist.
fn prepare_federation(base: &Path, spec: &mut FederationSpec) -> Result<(), CliError> {
    if let DataSource::FileBacked { features, labels } = &mut spec.source {
        resolve(base, features);
        resolve(base, labels);
        require_file(features)?;
        require_file(labels)?;
    }
    spec.validate().map_err(|e| CliError::Config(e.to_string()))
}

fn prepare_scheme(base: &Path, scheme: &mut SchemeConfig) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Config(msg));
    match scheme {
        SchemeConfig::Ae(c) => {
            if !(c.sigma > 0.0 && c.sigma.is_finite()) {
                return bad(format!("sigma must be positive: {}", c.sigma));
            }
        }
        SchemeConfig::Knn(c) => {
            if !(c.sigma > 0.0 && c.sigma.is_finite()) {
                return bad(format!("sigma must be positive: {}", c.sigma));
            }
            match c.k {
                KChoice::Fixed(0) => return bad("k must be at least 1".into()),
                KChoice::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                    return bad(format!("k fraction must lie in (0, 1]: {f}"))
                }
                _ => {}
            }
            if let FeatureMapKind::Precomputed { path } = &mut c.feature_map {
                resolve(base, path);
                require_file(path)?;
            }
        }
        SchemeConfig::FedAvg(c) => c
            .fedavg_config(0)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?,
        SchemeConfig::DpFedAvg(c) => {
            if c.sigma.is_nan() || c.sigma <= 0.0 {
                return bad("dp_fed_avg needs sigma > 0".into());
            }
            c.fedavg_config(0)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = parse(path)?;
        let base = base_dir(path);
        check_delta(cfg.delta)?;
        check_repeats(cfg.repeats)?;
        prepare_federation(&base, &mut cfg.federation)?;
        prepare_scheme(&base, &mut cfg.scheme)?;
        resolve(&base, &mut cfg.output);
        Ok(cfg)
    }
}

impl CompareConfig {
    /// Load and validate; returns the shared federation alongside.
    pub fn load(path: &Path) -> Result<(Self, FederationSpec), CliError> {
        let mut cfg: CompareConfig = parse(path)?;
        let base = base_dir(path);
        check_delta(cfg.delta)?;
        check_repeats(cfg.repeats)?;
        if cfg.scheme.is_empty() {
            return Err(CliError::Config("no [[scheme]] blocks".into()));
        }
        let mut shared = cfg.federation.clone();
        for block in &cfg.scheme {
            match (&shared, &block.federation) {
                (_, None) => {}
                (None, Some(f)) => shared = Some(f.clone()),
                (Some(s), Some(f)) if s == f => {}
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(
                        "scheme blocks use different federations; comparisons must share data".into(),
                    ))
                }
            }
        }
        let Some(mut federation) = shared else {
            return Err(CliError::Config("no [federation] section".into()));
        };
        prepare_federation(&base, &mut federation)?;
        for block in &mut cfg.scheme {
            prepare_scheme(&base, &mut block.scheme)?;
        }
        resolve(&base, &mut cfg.output);
        Ok((cfg, federation))
    }
}
