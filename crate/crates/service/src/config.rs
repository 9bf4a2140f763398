//! Service configuration: defaults, then an optional TOML file, then
//! `KINDRED_`-prefixed environment variables.
//!
//! Nested keys use a double underscore in the environment, for example
//! `KINDRED_STUDY__SEED=3` or `KINDRED_REWRITER__POSITIVE_THRESHOLD=4`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use serde::{Deserialize, Serialize};

use kindred_core::analytics::usage::INDIRECT_SIMILARITY;
use kindred_core::platform::PlatformConfig;

pub const ENV_PREFIX: &str = "KINDRED_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub scorer_url: Option<String>,
    pub rewriter_url: Option<String>,
    pub timeout_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            scorer_url: None,
            rewriter_url: None,
            timeout_ms: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen_address: String,
    /// Safety rule file. Required by `serve`.
    pub rules: Option<PathBuf>,
    /// Seeker posts, one `id<TAB>text` per line.
    pub posts: Option<PathBuf>,
    /// Where the event log is written. Must not already hold events.
    pub log: Option<PathBuf>,
    /// Directory overriding bundled templates and lexicons, file by file.
    pub data_dir: Option<PathBuf>,
    pub indirect_similarity: f64,
    pub n_boot: usize,
    #[serde(flatten)]
    pub platform: PlatformConfig,
    pub remote: RemoteConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".into(),
            rules: None,
            posts: None,
            log: None,
            data_dir: None,
            indirect_similarity: INDIRECT_SIMILARITY,
            n_boot: 2_000,
            platform: PlatformConfig::default(),
            remote: RemoteConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let mut fig = Figment::from(Serialized::defaults(ServiceConfig::default()));
        if let Some(p) = path {
            if !p.exists() {
                return Err(format!("config file {} does not exist", p.display()));
            }
            fig = fig.merge(Toml::file(p));
        }
        let cfg: ServiceConfig = fig
            .merge(Env::prefixed(ENV_PREFIX).split("__"))
            .extract()
            .map_err(|e| format!("invalid configuration: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.listen_address
            .parse::<SocketAddr>()
            .map_err(|e| format!("listen_address {:?}: {e}", self.listen_address))?;
        let w = self.platform.study.arm_weights;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(format!("study.arm_weights must be non-negative with a positive sum, got {w:?}"));
        }
        if !(0.0..=1.0).contains(&self.indirect_similarity) {
            return Err("indirect_similarity must lie in [0, 1]".into());
        }
        let align = self.platform.rewriter.align;
        if !(0.0..=1.0).contains(&align.keep_threshold) || align.gap_cost < 0.0 {
            return Err("rewriter.align.keep_threshold must lie in [0, 1] and gap_cost must be non-negative".into());
        }
        if self.platform.rewriter.positive_threshold > 6 {
            return Err("rewriter.positive_threshold is out of the 0..=6 score range".into());
        }
        if self.platform.study.inactivity_timeout_minutes <= 0 {
            return Err("study.inactivity_timeout_minutes must be positive".into());
        }
        if self.n_boot == 0 {
            return Err("n_boot must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ServiceConfig::default();
        c.validate().unwrap();
        assert_eq!(c.platform.rewriter.align.keep_threshold, 0.98);
        assert_eq!(c.platform.study.arm_weights, [0.45, 0.45, 0.10]);
    }

    #[test]
    fn file_then_env() {
        figment::Jail::expect_with(|jail| {
            jail.create_file(
                "k.toml",
                r#"
                listen_address = "0.0.0.0:9000"
                [study]
                seed = 5
                arm_weights = [0.5, 0.5, 0.0]
                [rewriter]
                retry_budget = 3
                "#,
            )?;
            jail.set_env("KINDRED_STUDY__SEED", "9");
            let c = ServiceConfig::load(Some(Path::new("k.toml"))).unwrap();
            assert_eq!(c.listen_address, "0.0.0.0:9000");
            assert_eq!(c.platform.study.seed, 9);
            assert_eq!(c.platform.study.arm_weights, [0.5, 0.5, 0.0]);
            assert_eq!(c.platform.rewriter.retry_budget, 3);
            assert_eq!(c.platform.rewriter.positive_threshold, 5);
            Ok(())
        });
    }

    #[test]
    fn bad_values_are_diagnosed() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("k.toml", "listen_address = \"nowhere\"")?;
            let e = ServiceConfig::load(Some(Path::new("k.toml"))).unwrap_err();
            assert!(e.contains("listen_address"), "{e}");
            jail.create_file("k.toml", "[study]\narm_weights = [0.0, 0.0, 0.0]")?;
            assert!(ServiceConfig::load(Some(Path::new("k.toml"))).is_err());
            Ok(())
        });
        assert!(ServiceConfig::load(Some(Path::new("/definitely/missing.toml"))).is_err());
    }
}
