use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::SplitSpec;
use crate::decompose::DecomposeMode;
use crate::ensemble::Scenario2Target;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// One input CSV and the column name it gets in the prepared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_value_column() -> String {
    "value".into()
}

impl SourceSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            path: PathBuf::from(format!("data/{name}.csv")),
            date_column: default_date_column(),
            value_column: default_value_column(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub mode: DecomposeMode,
    pub ma_window: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            mode: DecomposeMode::Centered,
            ma_window: 21,
        }
    }
}

/// Architecture sizes shared by every trained variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 64,
            head_hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub grid_step: f64,
    pub scenario2_target: Scenario2Target,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            scenario2_target: Scenario2Target::Price,
        }
    }
}

/// Everything that defines an experiment. Relative source paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: SourceSpec,
    pub candidates: Vec<SourceSpec>,
    pub split: SplitSpec,
    pub selection_threshold: f64,
    pub window: usize,
    pub horizon: usize,
    pub decomposition: DecompositionConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: SourceSpec::named("brent"),
            candidates: ["sent", "usdx", "teni", "tasi", "spx", "gas", "gold"]
                .into_iter()
                .map(SourceSpec::named)
                .collect(),
            split: SplitSpec::default(),
            selection_threshold: 0.6,
            window: 5,
            horizon: 3,
            decomposition: DecompositionConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ensemble: EnsembleConfig::default(),
            out_dir: None,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.train_end >= self.split.valid_end {
            return Err(Error::Parameter(
                "split.train_end must precede split.valid_end".into(),
            ));
        }
        if self.window == 0 || self.horizon == 0 {
            return Err(Error::Parameter(
                "window and horizon must be at least 1".into(),
            ));
        }
        if !self.selection_threshold.is_finite() || self.selection_threshold < 0.0 {
            return Err(Error::Parameter(
                "selection_threshold must be a non-negative number".into(),
            ));
        }
        let mut names = vec![&self.target.name];
        names.extend(self.candidates.iter().map(|c| &c.name));
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Parameter(format!("source name `{n}` is used twice")));
            }
        }
        self.train.validate()
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn digest(&self) -> String {
        let canonical = Self {
            out_dir: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"window": 10, "train": {"max_epochs": 3}}"#).unwrap();
        assert_eq!(c.window, 10);
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.train.batch_size, 16);
        assert_eq!(c.selection_threshold, 0.6);
        assert_eq!(c.decomposition.ma_window, 21);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"windw": 10}"#).is_err());
    }

    #[test]
    fn digest_ignores_out_dir_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: Some("elsewhere".into()),
            ..a.clone()
        };
        let c = ExperimentConfig {
            seed: 7,
            ..a.clone()
        };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        let mut shipped = ExperimentConfig::load(&path).unwrap();
        assert_eq!(shipped.out_dir.take(), Some("../runs/default".into()));
        for s in std::iter::once(&mut shipped.target).chain(&mut shipped.candidates) {
            s.path = s.path.strip_prefix("..").unwrap().to_path_buf();
        }
        assert_eq!(shipped, ExperimentConfig::default());
    }
}
