use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_digest: String,
    pub completed_at: String,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

/// Index of everything written into an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub version: String,
    pub created_at: String,
    pub updated_at: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn load_or_new(out: &Path, config_digest: &str) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            return Ok(serde_json::from_str(&text)?);
        }
        let now = timestamp();
        Ok(Self {
            config_digest: config_digest.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created_at: now.clone(),
            updated_at: now,
            stages: BTreeMap::new(),
        })
    }

    pub fn record(&mut self, stage: &str, config_digest: &str, mut files: Vec<String>) {
        files.sort();
        files.dedup();
        let now = timestamp();
        self.config_digest = config_digest.into();
        self.version = env!("CARGO_PKG_VERSION").into();
        self.updated_at = now.clone();
        self.stages.insert(
            stage.into(),
            StageRecord {
                config_digest: config_digest.into(),
                completed_at: now,
                files,
            },
        );
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
