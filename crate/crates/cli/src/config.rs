//! Mission configuration files.
//!
//! A config is a TOML file, normally written as flat dotted keys
//! (`nmpc.horizon = 20`). Unknown keys are rejected and every error names the
//! full key path. The resolved config is echoed back in the same flat form,
//! which also feeds the config hash stamped on every artifact.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use lavatube_core::mission::MissionConfig;
use sha2::{Digest, Sha256};

/// Command-line overrides applied on top of the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget_s: Option<f64>,
    pub v_max: Option<f64>,
}

/// A validated config together with its flat echo and hash.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: MissionConfig,
    pub echo: String,
    pub hash: String,
}

pub fn parse_str(text: &str) -> Result<MissionConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| anyhow!("config syntax: {}", e.message()))?;
    let cfg: MissionConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        anyhow!("config key `{path}`: {}", inner.message())
    })?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Resolved> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            parse_str(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => MissionConfig::default(),
    };
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(b) = overrides.budget_s {
        config.budget_s = b;
    }
    if let Some(v) = overrides.v_max {
        config.set_v_max(v);
    }
    resolve(config)
}

pub fn resolve(config: MissionConfig) -> Result<Resolved> {
    config.validate().map_err(|e| anyhow!("config {e}"))?;
    let echo = echo(&config)?;
    let hash = hash(&echo);
    Ok(Resolved { config, echo, hash })
}

/// One `key.path = value` line per leaf, keys sorted.
pub fn echo(config: &MissionConfig) -> Result<String> {
    let value = toml::Value::try_from(config).context("serialising config")?;
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    lines.sort();
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    Ok(out)
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        leaf => out.push(format!("{prefix} = {leaf}")),
    }
}

/// First 16 hex digits of the SHA-256 of the echo.
pub fn hash(echo: &str) -> String {
    hex::encode(Sha256::digest(echo.as_bytes()))[..16].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_only_gets_defaults() {
        let c = parse_str("seed = 12\n").unwrap();
        assert_eq!(c, MissionConfig { seed: 12, ..MissionConfig::default() });
    }

    #[test]
    fn echo_reparses_identically() {
        let mut c = MissionConfig::slow_preset();
        c.seed = 99;
        c.risk.c_unknown = 2.75;
        c.nmpc.w_x[3] = 0.1;
        let e = echo(&c).unwrap();
        assert_eq!(parse_str(&e).unwrap(), c);
        assert_eq!(echo(&parse_str(&e).unwrap()).unwrap(), e);
        assert!(e.lines().all(|l| l.contains(" = ")));
        assert!(e.contains("nmpc.horizon = 20"));
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_str("risk.c_unknwn = 3.0\n").unwrap_err().to_string();
        assert!(e.contains("risk"), "{e}");
        assert!(e.contains("c_unknwn"), "{e}");
        let e = parse_str("nmpc.horizon = \"long\"\n").unwrap_err().to_string();
        assert!(e.contains("nmpc.horizon"), "{e}");
        let c = parse_str("budget_s = -1.0\n").unwrap();
        let e = resolve(c).unwrap_err().to_string();
        assert!(e.contains("budget_s"), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = resolve(MissionConfig::default()).unwrap();
        let b = resolve(MissionConfig { seed: 1, ..MissionConfig::default() }).unwrap();
        assert_eq!(a.hash.len(), 16);
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, resolve(MissionConfig::default()).unwrap().hash);
    }
}
