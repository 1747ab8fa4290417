//! Atomic output files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use critdet_core::integrate::fmt17;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;
use crate::settings::CoefficientChoice;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, without `--out` and `--config`.
    pub argv: Vec<String>,
    /// Entries of the configuration file, if one was given.
    pub config: BTreeMap<String, String>,
    pub coefficients: Option<CoefficientChoice>,
    /// Every resolved setting, tolerances and integrator configs included.
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub version: String,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| crate::failure::bad_args(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub struct OutputDir {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a sibling temporary file so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, records: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    #[cfg(test)]
    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn with<F>(&mut self, name: &str, fill: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    /// Numeric table, every value at seventeen significant digits.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), Failure>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        self.with(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                let cells: Vec<String> = row.as_ref().iter().map(|v| fmt17(*v)).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        })
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, Failure> {
        manifest.outputs = self.records;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_rows_round_trip() {
        let dir = std::env::temp_dir().join(format!("critdet-out-{}", std::process::id()));
        let mut out = OutputDir::create(dir.clone()).unwrap();
        let v = 0.1 + 0.2;
        out.csv("a.csv", &["x"], [[v]]).unwrap();
        let text = fs::read_to_string(dir.join("a.csv")).unwrap();
        let back: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back.to_bits(), v.to_bits());
        assert_eq!(out.records()[0].bytes, text.len() as u64);
        fs::remove_dir_all(dir).unwrap();
    }
}
