//! Split manifests and ensemble manifests on disk.

use std::path::{Path, PathBuf};

use patclass_core::corpus::{Section, SplitManifest};
use patclass_core::ensemble::EnsembleModel;
use patclass_core::textprep::FeatureSpec;
use serde::{Deserialize, Serialize};

use crate::checkpoint::load_checkpoint;
use crate::error::{Error, Result};
use crate::ingest::{read_file, write_file};

pub const SPLIT_FILE: &str = "split.json";

pub fn save_split(path: &Path, manifest: &SplitManifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn load_split(path: &Path) -> Result<SplitManifest> {
    Ok(serde_json::from_str(&read_file(path)?)?)
}

/// One ensemble member: the section it was trained on, the word selection it reads
/// and its checkpoint, relative to the manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub section: String,
    pub feature: FeatureSpec,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub members: Vec<MemberEntry>,
}

impl EnsembleManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_file(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_file(path)?)?)
    }

    /// Loads exactly three members and checks that each checkpoint's pool and feature
    /// spec match its entry. The identity check (three copies of one checkpoint) is allowed.
    pub fn load_ensemble(&self, manifest_path: &Path) -> Result<EnsembleModel> {
        if self.members.len() != 3 {
            return Err(Error::Format(format!("ensemble manifest needs 3 members, found {}", self.members.len())));
        }
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        let mut models = Vec::with_capacity(3);
        for m in &self.members {
            let section = Section::from_name(&m.section)
                .ok_or_else(|| Error::Format(format!("unknown section {:?} in ensemble manifest", m.section)))?;
            let model = load_checkpoint(&base.join(&m.checkpoint))?;
            let pool_section = model.config().pool.section();
            if pool_section.is_some() && pool_section != Some(section) {
                return Err(Error::Format(format!(
                    "{}: trained on pool {} but listed as section {}",
                    m.checkpoint.display(),
                    model.config().pool,
                    section
                )));
            }
            if model.config().feature != m.feature {
                return Err(Error::Format(format!(
                    "{}: reads the {} but listed with the {}",
                    m.checkpoint.display(),
                    model.config().feature,
                    m.feature
                )));
            }
            models.push(model);
        }
        let members: [_; 3] = models.try_into().map_err(|_| Error::Format("ensemble needs 3 members".into()))?;
        Ok(EnsembleModel::new(members)?)
    }
}
