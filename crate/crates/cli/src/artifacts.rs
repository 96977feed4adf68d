//! Atomic artifact emission: write to a temp file, then rename.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Write `bytes` atomically. Refuses to overwrite unless `force`.
pub fn write_artifact(path: &Path, bytes: &[u8], force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::OutputExists(path.display().to_string()));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// CSV with leading `# key=value` provenance comments.
pub fn csv_with_provenance(header: &str, rows: &[String], digest: &str, seed: u64) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_digest={digest}\n# seed={seed}\n"));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}
