//! Atomic file output and checkpoint directories.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::nn::{read_params, write_params};
use crate::train_eval::{build_model, RunMetadata, TrainConfig};

pub const PARAMS_FILE: &str = "params.csv";
pub const METADATA_FILE: &str = "metadata.txt";

/// Write `path` through a temp file in the same directory and rename it
/// into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let tmp = NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(dir: &Path, model: &Model, metadata: &RunMetadata) -> Result<()> {
    write_atomic(&dir.join(PARAMS_FILE), |w| write_params(model, w))?;
    write_atomic(&dir.join(METADATA_FILE), |w| {
        w.write_all(metadata.to_text().as_bytes())
    })
}

/// Rebuild the model described by `dir/metadata.txt` and load its weights.
pub fn load_checkpoint(dir: &Path) -> Result<(TrainConfig, Model)> {
    let config = RunMetadata::parse_config(&read_text(&dir.join(METADATA_FILE))?)?;
    let mut model = build_model(&config)?;
    let path = dir.join(PARAMS_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    read_params(&mut model, BufReader::new(file), &path)?;
    Ok((config, model))
}
