//! Artifact plumbing for the command-line tool: JSON input loading with
//! parse-classified errors, SHA-256 input hashing, atomic output writes
//! (temp file + rename, so interrupted runs leave no half-written files),
//! reproducible timestamps, and the run manifest that closes every output
//! bundle.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::genmodel::CharacterizationData;
use crate::topology::ProcessorGraph;

// ====================== Reading ======================

/// Reads an input file, classifying any failure — a missing file included —
/// as a parse error so the CLI reports it as bad input rather than an
/// internal fault.
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::parse(format!("cannot read {}: {e}", path.display())))
}

/// Loads one JSON document, naming the file in any error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
}

// ====================== Hashing ======================

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Digest of a file's contents; failures classify as parse errors like any
/// other unreadable input.
pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_input(path)?))
}

// ====================== Atomic writes ======================

/// Writes `bytes` to `path` via a temporary sibling file and a rename, so a
/// crash mid-write never leaves a truncated artifact under the final name.
/// Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent)?;
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    if let Err(e) = fs::write(&tmp, bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline, written atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

// ====================== Timestamps ======================

/// RFC 3339 UTC timestamp of "now". When `SOURCE_DATE_EPOCH` is set it wins,
/// so rebuilds and CI reruns can produce byte-identical bundles.
pub fn timestamp_utc() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    format_epoch(secs)
}

/// Formats Unix seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_epoch(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem / 60) % 60,
        rem % 60
    )
}

/// Proleptic Gregorian date for a day count relative to 1970-01-01, using
/// the era decomposition (400-year cycles of 146097 days).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097); // [0, 146096]
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365; // [0, 399]
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100); // [0, 365]
    let mp = (5 * doy + 2) / 153; // [0, 11], March-based
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

// ====================== Characterization bundle ======================

/// On-disk characterization bundle: the processor geometry together with its
/// characterization data, so every downstream command needs a single file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharFile {
    pub processor: ProcessorGraph,
    pub data: CharacterizationData,
}

// ====================== Run manifest ======================

/// Provenance record written last into every output bundle. Input files are
/// keyed by file name (not path) so identical runs rooted in different
/// directories produce identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the bundle.
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp: String,
    /// Input file name → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Artifact names written into the bundle, in write order.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> RunManifest {
        RunManifest {
            tool: "snakeopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            timestamp: timestamp_utc(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Hashes an input file into the manifest, keyed by its file name.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let hash = sha256_file(path)?;
        self.inputs.insert(name, hash);
        Ok(())
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.into());
    }

    /// Writes `manifest.json` into the bundle directory; call after every
    /// other artifact so its presence marks a complete bundle.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json_atomic(&dir.join("manifest.json"), self)
    }
}

// ====================== Tests ======================
