//! Application configuration: defaults, then a TOML file, then `FAQRANK_*`
//! environment variables, then command-line flags.

use std::path::{Path, PathBuf};

use faqrank_core::{Bm25Params, FusionParams, NormalizationParams, RemoteScorerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "FAQRANK_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Builtin,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub url: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        let remote = RemoteScorerConfig::default();
        Self {
            kind: ScorerKind::Builtin,
            url: remote.url,
            timeout_ms: remote.timeout_ms,
            max_batch: remote.max_batch,
            max_attempts: remote.max_attempts,
            backoff_ms: remote.backoff_ms,
            max_in_flight: remote.max_in_flight,
        }
    }
}

impl ScorerConfig {
    pub fn remote(&self) -> RemoteScorerConfig {
        RemoteScorerConfig {
            url: self.url.clone(),
            timeout_ms: self.timeout_ms,
            max_batch: self.max_batch,
            max_attempts: self.max_attempts,
            backoff_ms: self.backoff_ms,
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub corpus: Option<PathBuf>,
    /// Stopword list; the built-in English list when unset.
    pub stopwords: Option<PathBuf>,
    /// Restrict search to entries with this source tag.
    pub source: Option<String>,
    pub bm25: Bm25Params,
    pub normalization: NormalizationParams,
    pub fusion: FusionParams,
    pub scorer: ScorerConfig,
    pub service: ServiceConfig,
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies `FAQRANK_<SECTION>_<KEY>` (or `FAQRANK_<KEY>` for top-level
    /// keys) overrides. Values are parsed as TOML, falling back to a string.
    pub fn with_env_overrides<I>(self, vars: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root = toml::Value::try_from(&self).map_err(|e| CliError::Config(e.to_string()))?;
        let table = root.as_table_mut().expect("config serializes to a table");
        let mut touched = false;
        for (name, raw) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = rest.to_ascii_lowercase();
            let value = parse_env_value(&raw);
            let sections = ["bm25", "normalization", "fusion", "scorer", "service"];
            match key.split_once('_') {
                Some((section, field)) if sections.contains(&section) => {
                    let entry = table
                        .entry(section.to_string())
                        .or_insert_with(|| toml::Value::Table(Default::default()));
                    let sub = entry
                        .as_table_mut()
                        .ok_or_else(|| CliError::Config(format!("{section} is not a table")))?;
                    sub.insert(field.to_string(), value);
                }
                _ => {
                    table.insert(key, value);
                }
            }
            touched = true;
        }
        if !touched {
            return Ok(self);
        }
        root.try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("environment override: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.bm25.validate().map_err(|e| cfg(&e))?;
        self.normalization.validate().map_err(|e| cfg(&e))?;
        self.fusion.validate().map_err(|e| cfg(&e))?;
        if self.scorer.kind == ScorerKind::Remote {
            self.scorer.remote().validate().map_err(|e| cfg(&e))?;
        }
        Ok(())
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faqrank_core::PoolMode;

    #[test]
    fn defaults_match_published_settings() {
        let c = AppConfig::default();
        assert_eq!((c.normalization.k1, c.normalization.k2), (4.0, 2.0));
        assert_eq!((c.fusion.alpha, c.fusion.t, c.fusion.pool_size), (0.3, 10.0, 10));
        assert_eq!((c.bm25.k, c.bm25.b), (1.2, 0.75));
    }

    #[test]
    fn dump_and_reload() {
        let mut c = AppConfig {
            corpus: Some("faq.jsonl".into()),
            ..AppConfig::default()
        };
        c.fusion.alpha = 0.25;
        c.fusion.pool_mode = PoolMode::RelevanceOnly;
        c.scorer.kind = ScorerKind::Remote;
        let text = c.to_toml_string().unwrap();
        assert_eq!(AppConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            AppConfig::from_toml_str("colour = 1"),
            Err(CliError::Config(_))
        ));
        assert!(AppConfig::from_toml_str("[fusion]\nbeta = 2").is_err());
        let partial = AppConfig::from_toml_str("[fusion]\nalpha = 0.5").unwrap();
        assert_eq!(partial.fusion.alpha, 0.5);
        assert_eq!(partial.fusion.t, 10.0);
    }

    #[test]
    fn env_overrides() {
        let vars = [
            ("FAQRANK_FUSION_POOL_SIZE".to_string(), "7".to_string()),
            ("FAQRANK_NORMALIZATION_K1".to_string(), "3.5".to_string()),
            ("FAQRANK_CORPUS".to_string(), "/tmp/x.jsonl".to_string()),
            ("FAQRANK_SCORER_KIND".to_string(), "remote".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let c = AppConfig::default().with_env_overrides(vars).unwrap();
        assert_eq!(c.fusion.pool_size, 7);
        assert_eq!(c.normalization.k1, 3.5);
        assert_eq!(c.corpus.as_deref(), Some(Path::new("/tmp/x.jsonl")));
        assert_eq!(c.scorer.kind, ScorerKind::Remote);

        let bad = AppConfig::default().with_env_overrides([("FAQRANK_FUSION_GAMMA".to_string(), "1".to_string())]);
        assert!(matches!(bad, Err(CliError::Config(_))));
    }

    #[test]
    fn validation_bounds() {
        let mut c = AppConfig::default();
        c.normalization.k1 = 0.0;
        assert!(c.validate().is_err());
        let mut c = AppConfig::default();
        c.fusion.pool_size = 0;
        assert!(c.validate().is_err());
        let mut c = AppConfig::default();
        c.scorer.kind = ScorerKind::Remote;
        c.scorer.url = "ftp://x".into();
        assert!(c.validate().is_err());
    }
}
