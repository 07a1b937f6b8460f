use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Axis;

/// Record of one run. `config` is the fully resolved configuration, so a
/// manifest can be fed back as `--config` or through `rerun`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    pub config: Value,
    /// Fit data, embedded so the manifest stays self-contained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_csv: Option<String>,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    pub converged: BTreeMap<String, bool>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn all_converged(&self) -> bool {
        self.converged.values().all(|&c| c)
    }

    pub fn write(&self, dir: &Path) -> lambdamix::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// A parsed document is a manifest when it carries both `subcommand` and `config`.
pub fn as_manifest(doc: &Value) -> Option<RunManifest> {
    let obj = doc.as_object()?;
    if obj.contains_key("subcommand") && obj.contains_key("config") {
        serde_json::from_value(doc.clone()).ok()
    } else {
        None
    }
}
