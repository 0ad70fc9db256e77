//! Declarative run configuration.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use groundsynth_core::element::SizeFilter;
use groundsynth_core::eval::Frame;
use groundsynth_core::filter::RuleConfig;
use groundsynth_core::geometry::ResizeConfig;
use groundsynth_core::provider::ProviderConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub sequential: bool,
    pub image_root: Option<PathBuf>,
    /// Scripted mock used instead of `provider` when set.
    pub mock: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub resize: ResizeConfig,
    pub size: SizeFilter,
    pub synth: SynthSection,
    pub filter: FilterSection,
    pub refusal: RefusalSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub samples_per_space: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            samples_per_space: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    #[serde(flatten)]
    pub rules: RuleConfig,
    pub llm: bool,
    pub visual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefusalSection {
    pub rate: f64,
}

impl Default for RefusalSection {
    fn default() -> Self {
        Self { rate: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub frame: Frame,
    pub refusal_patterns: Option<Vec<String>>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            frame: Frame::Resized,
            refusal_patterns: None,
        }
    }
}

impl RunConfig {
    /// Relative paths in the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.image_root,
            &mut cfg.mock,
            &mut cfg.provider.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 7
            [filter]
            max_edge_density = 0.1
            llm = true
            [eval]
            frame = "native"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.filter.rules.max_edge_density, 0.1);
        assert_eq!(cfg.filter.rules.max_color_variance, 0.01);
        assert!(cfg.filter.llm);
        assert_eq!(cfg.eval.frame, Frame::Native);
        assert_eq!(cfg.synth.samples_per_space, 2);
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }
}
