//! Stimuli shared by every session: the item pool, the exemplar grid and
//! the rendered image corpus.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vsc_core::hash::{content_hash, sha256_hex};
use vsc_core::{ClipMeta, ExemplarSet};

use crate::error::{AnnotateError, Result};

const SALT_FILE: &str = "alias_salt";

/// Image reference as handed to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExemplarRef {
    pub category: String,
    pub image: String,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub classes: Vec<String>,
    /// Every clip that may appear as a test item, across folds.
    pub view: Vec<ClipMeta>,
    pub exemplars: ExemplarSet,
    /// Directory holding `<stem>.png` for every item and exemplar.
    pub image_dir: PathBuf,
    pub config_hash: String,
    pub exemplars_hash: String,
    aliases: HashMap<String, String>,
    alias_of: HashMap<String, String>,
}

impl Study {
    /// Builds the alias table. `salt` keeps aliases unlinkable to file
    /// names, which carry the class index in ESC-style datasets.
    pub fn new(
        classes: Vec<String>,
        view: Vec<ClipMeta>,
        exemplars: ExemplarSet,
        image_dir: PathBuf,
        config_hash: String,
        salt: &str,
    ) -> Result<Self> {
        exemplars.validate(&classes)?;
        let mut aliases = HashMap::new();
        let mut alias_of = HashMap::new();
        let names = view.iter().map(|m| m.filename.clone()).chain(exemplars.ordered().into_iter().map(|(_, m)| m.filename.clone()));
        for name in names {
            let alias = format!("{}.png", &sha256_hex(format!("{salt}\0{name}").as_bytes())[..24]);
            alias_of.insert(name.clone(), alias.clone());
            aliases.insert(alias, name);
        }
        let exemplars_hash = content_hash(&exemplars);
        Ok(Study { classes, view, exemplars, image_dir, config_hash, exemplars_hash, aliases, alias_of })
    }

    /// Sorted test items of `fold`.
    pub fn fold_items(&self, fold: u8) -> Vec<ClipMeta> {
        let mut items: Vec<ClipMeta> = self.view.iter().filter(|m| m.fold == fold).cloned().collect();
        items.sort_by(|a, b| a.filename.cmp(&b.filename));
        items
    }

    pub fn image_url(&self, filename: &str) -> String {
        format!("/images/{}/{}", self.config_hash, self.alias_of[filename])
    }

    pub fn exemplar_refs(&self) -> Vec<ExemplarRef> {
        self.exemplars
            .ordered()
            .into_iter()
            .map(|(c, m)| ExemplarRef { category: c.to_string(), image: self.image_url(&m.filename) })
            .collect()
    }

    /// On-disk path behind an alias, if it names a study image.
    pub fn resolve_image(&self, config_hash: &str, alias: &str) -> Option<PathBuf> {
        if config_hash != self.config_hash {
            return None;
        }
        let filename = self.aliases.get(alias)?;
        let stem = Path::new(filename).file_stem()?.to_string_lossy().into_owned();
        Some(self.image_dir.join(format!("{stem}.png")))
    }
}

/// Reads the alias salt stored beside the session logs, creating it on first use.
pub fn load_or_create_salt(sessions_dir: &Path) -> Result<String> {
    let path = sessions_dir.join(SALT_FILE);
    if path.exists() {
        let s = std::fs::read_to_string(&path).map_err(|e| AnnotateError::io(&path, e))?;
        if !s.trim().is_empty() {
            return Ok(s.trim().to_string());
        }
    }
    std::fs::create_dir_all(sessions_dir).map_err(|e| AnnotateError::io(sessions_dir, e))?;
    let salt = hex::encode(rand::random::<[u8; 16]>());
    std::fs::write(&path, format!("{salt}\n")).map_err(|e| AnnotateError::io(&path, e))?;
    Ok(salt)
}
