//! Run manifest: the audit record of one replay. Every input and output
//! file is listed with its CRC-32 and size; per-stage counts and wall-clock
//! timings round out the picture. Written as `manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileStamp {
    pub path: String,
    pub bytes: u64,
    pub crc32: String,
}

impl FileStamp {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            crc32: format!("{:08x}", crc32fast::hash(&data)),
        })
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct RunManifest {
    pub artifact: String,
    pub artifact_version: String,
    pub seed: u64,
    pub config_text: String,
    pub inputs: Vec<FileStamp>,
    pub stage_counts: BTreeMap<String, u64>,
    pub timings_ms: BTreeMap<String, u64>,
    pub outputs: Vec<FileStamp>,
    pub monotonicity_violations: Vec<String>,
}

impl RunManifest {
    pub fn new(seed: u64, config_text: String) -> Self {
        Self {
            artifact: "vesseledge".into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_text,
            ..Default::default()
        }
    }

    pub fn count(&mut self, stage: &str, value: u64) {
        self.stage_counts.insert(stage.to_string(), value);
    }

    pub fn timing(&mut self, stage: &str, ms: u64) {
        self.timings_ms.insert(stage.to_string(), ms);
    }

    pub fn stamp_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push(FileStamp::of(path)?);
        Ok(())
    }

    pub fn stamp_output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push(FileStamp::of(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamps_record_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("x.csv");
        std::fs::write(&file, b"hello").unwrap();
        let stamp = FileStamp::of(&file).unwrap();
        assert_eq!(stamp.bytes, 5);
        assert_eq!(stamp.crc32, format!("{:08x}", crc32fast::hash(b"hello")));
    }

    #[test]
    fn manifest_writes_json_with_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.txt");
        std::fs::write(&out, b"data").unwrap();
        let mut m = RunManifest::new(42, "version = 1".into());
        m.count("records_in", 100);
        m.timing("ingest", 12);
        m.stamp_output(&out).unwrap();
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["seed"], 42);
        assert_eq!(v["stage_counts"]["records_in"], 100);
        assert_eq!(v["outputs"][0]["bytes"], 4);
    }
}
