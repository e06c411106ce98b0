//! Atomic artifact writes with a resolved-config record next to each file.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tablerec::config::ExperimentConfig;

/// Write through a temporary file in the target directory and rename it into
/// place, so a failed step never leaves a partial artifact behind.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    let mut out = BufWriter::new(tmp);
    fill(&mut out)?;
    let tmp = out.into_inner().map_err(|e| e.into_error())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn config_header(command: &str, cfg: &ExperimentConfig) -> Vec<String> {
    let mut lines = vec![format!("tablerec {command}")];
    lines.extend(cfg.resolved_lines());
    lines
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".config");
    path.with_file_name(name)
}

/// Artifact whose format has no comment syntax: the header goes to
/// `<file>.config` in config-file syntax.
pub fn write_with_sidecar(
    path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    fill: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    write_atomic(path, fill)?;
    write_atomic(&sidecar_path(path), |w| {
        writeln!(w, "# tablerec {command}")?;
        for line in cfg.resolved_lines() {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}
