//! Atomic file writes and the run manifest.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::SweepPoint;

/// Writes through a temporary file in the same directory, then renames,
/// so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = tempfile::Builder::new().prefix(".crit-cycle-").tempfile_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub status: PointStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub config_hash: String,
    pub code_version: String,
    pub jobs: usize,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub points_ok: usize,
    pub points_failed: usize,
    pub points: Vec<PointRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// `summary.json`: one entry per point, in sweep order. Contains no
/// timing so it is as reproducible as the CSV files.
pub fn summary_json(records: &[(SweepPoint, Result<Value, String>)]) -> String {
    let list: Vec<Value> = records
        .iter()
        .map(|(p, r)| {
            let mut v = serde_json::to_value(p).expect("point serializes");
            match r {
                Ok(result) => {
                    v["status"] = "ok".into();
                    v["result"] = result.clone();
                }
                Err(e) => {
                    v["status"] = "failed".into();
                    v["error"] = e.clone().into();
                }
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&list).expect("summary serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.csv", b"one\n").unwrap();
        write_atomic(dir.path(), "a.csv", b"two\n").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).unwrap(), "two\n");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
