//! On-disk cache of IDS tables keyed by a hash of everything that determines them.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use strip_anderson::ids::{Boundary, IdsTable};
use strip_anderson::model::ModelFile;

use crate::error::CliResult;

/// Bump when the IDS computation changes in a way that alters results.
const CACHE_FORMAT: u32 = 1;

#[derive(Serialize)]
struct Key<'a> {
    format: u32,
    model: &'a ModelFile,
    box_length: usize,
    mesh: f64,
    boundary: Boundary,
    energies: &'a [f64],
    seed: u64,
}

pub fn key(model: &ModelFile, box_length: usize, mesh: f64, boundary: Boundary, energies: &[f64], seed: u64) -> String {
    let key = Key { format: CACHE_FORMAT, model, box_length, mesh, boundary, energies, seed };
    let bytes = serde_json::to_vec(&key).expect("cache key serializes");
    hex::encode(Sha256::digest(bytes))
}

pub struct IdsCache {
    dir: PathBuf,
}

impl IdsCache {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("ids-{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<IdsTable> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Writes through a temporary file so concurrent readers never see a partial table.
    pub fn store(&self, key: &str, table: &IdsTable) -> CliResult<()> {
        let tmp = self.dir.join(format!(".ids-{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(table)?)?;
        std::fs::rename(tmp, self.path(key))?;
        Ok(())
    }
}
