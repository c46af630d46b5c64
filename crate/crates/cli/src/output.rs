use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mibci_core::experiment::short_hash;

/// Destination for command outputs. Every file carries the hash of the
/// invocation that produced it; in dry-run mode nothing is written.
pub struct Sink {
    pub dry_run: bool,
    pub hash: String,
}

impl Sink {
    pub fn new(dry_run: bool, invocation: &str) -> Self {
        Sink {
            dry_run,
            hash: short_hash(invocation),
        }
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        if self.dry_run {
            println!(
                "would write {} ({} bytes, config={})",
                path.display(),
                bytes.len(),
                self.hash
            );
            return Ok(());
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_with(&self, path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(path, &buf)
    }

    /// Pretty JSON with a top-level `config_hash` field.
    pub fn write_json(&self, path: &Path, value: &impl serde::Serialize) -> Result<()> {
        let mut json = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut json {
            map.insert("config_hash".into(), self.hash.clone().into());
        }
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }
}
