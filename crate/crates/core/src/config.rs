//! Tool configuration file (`sfvkit.toml`).
//!
//! ```toml
//! [analysis]
//! sample_rate = 22050
//! hop_length = 256
//! frame_length = 1024
//!
//! [paths]
//! features_dir = "work/features"
//!
//! [eval]
//! dtw_normalization = "path-length"
//! report_format = "markdown"
//!
//! [sfv]
//! zero_sfv = false
//! ```
//!
//! Every key is optional. Command-line flags override the file, and the file
//! overrides built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::AnalysisConfig;
use crate::error::{Error, Result};
use crate::eval::{DtwNormalization, ReportFormat};

/// Environment variable naming a config file when `--config` is not given.
pub const CONFIG_ENV: &str = "SFVKIT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub features_dir: Option<PathBuf>,
    pub manifests: Option<PathBuf>,
    pub alignments: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub dtw_normalization: DtwNormalization,
    #[serde(default)]
    pub report_format: ReportFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfvConfig {
    #[serde(default)]
    pub zero_sfv: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sfv: SfvConfig,
}

impl ToolConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ToolConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.analysis.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Resolve the config: explicit path, then `$SFVKIT_CONFIG`, then defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Check that every configured directory exists.
    pub fn check_paths(&self) -> Result<()> {
        let dirs = [&self.paths.features_dir, &self.paths.manifests, &self.paths.alignments];
        for dir in dirs.into_iter().flatten() {
            if !dir.exists() {
                return Err(Error::InvalidConfig(format!("configured path {} does not exist", dir.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let cfg = ToolConfig::parse("").unwrap();
        assert_eq!(cfg, ToolConfig::default());
        assert_eq!(cfg.analysis.hop_length, 256);
        assert_eq!(cfg.analysis.frame_length, 1024);
        assert_eq!(cfg.analysis.mel_bands, 80);
        assert_eq!(cfg.analysis.sample_rate, 22050);
    }

    #[test]
    fn parses_sections() {
        let cfg = ToolConfig::parse(
            r#"
            [analysis]
            sample_rate = 16000
            hop_length = 160
            frame_length = 640

            [eval]
            dtw_normalization = "none"
            report_format = "markdown"

            [sfv]
            zero_sfv = true
            "#,
        )
        .unwrap();
        assert_eq!(cfg.analysis.sample_rate, 16000);
        assert_eq!(cfg.analysis.mel_bands, 80);
        assert_eq!(cfg.eval.dtw_normalization, DtwNormalization::None);
        assert_eq!(cfg.eval.report_format, ReportFormat::Markdown);
        assert!(cfg.sfv.zero_sfv);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_analysis() {
        assert!(ToolConfig::parse("[analysis]\nhop = 3\n").is_err());
        assert!(ToolConfig::parse("[analysis]\nhop_length = 4096\n").is_err());
        assert!(ToolConfig::parse("[paths]\nfeatures_dir = \"/definitely/not/here\"\n")
            .unwrap()
            .check_paths()
            .is_err());
    }
}
