use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Reproducibility record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub seed: u64,
    pub versions: BTreeMap<&'static str, &'static str>,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<String>,
    pub wall_ms: f64,
    /// Per-stage wall time, when the command reports it.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stage_ms: Vec<(String, f64)>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(seed: u64) -> Self {
        Self {
            command_line: std::env::args().collect(),
            seed,
            versions: BTreeMap::from([
                ("psdxc", psdxc::VERSION),
                ("psdxc-cli", env!("CARGO_PKG_VERSION")),
            ]),
            inputs: BTreeMap::new(),
            output_sha256: None,
            wall_ms: 0.0,
            stage_ms: Vec::new(),
            exit_code: 0,
            error: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("out/r.json")),
            PathBuf::from("out/r.json.manifest.json")
        );
    }
}
