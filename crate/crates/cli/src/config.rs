use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use rfsep::datagen::DatasetSpec;
use rfsep::train::TrainConfig;
use rfsep::wavenet::WaveNetConfig;
use rfsep::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub target_ber: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { target_ber: 1e-3 }
    }
}

/// Everything a subcommand may need; each reads only its own sections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub model: WaveNetConfig,
    pub model_seed: u64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

fn from_value(v: Value) -> Result<RunConfig> {
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

/// Sets `key` (dotted path) in `root`; the key must already exist.
fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(Error::io(p))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        // round-trip through the typed config so every key is present
        let mut full = serde_json::to_value(from_value(file)?).expect("config serializes");
        for o in overrides {
            apply_override(&mut full, o)?;
        }
        let config = from_value(full)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let t = self.eval.target_ber;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("eval.target_ber must lie in (0, 1), got {t}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(Error::io(path))
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
