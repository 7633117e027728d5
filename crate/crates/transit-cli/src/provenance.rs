//! Provenance headers.
//!
//! CSV files carry them as leading `# key: value` lines; JSON documents as a
//! leading `provenance` object.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, ExperimentConfig};

pub const GIT_REV: &str = env!("TRANSIT_GIT_REV");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub git_rev: String,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    /// Resolved configuration, defaults included.
    pub config: ExperimentConfig,
}

/// `sha256:` digest of the compact JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_string(config).expect("config serialises");
    let digest = Sha256::digest(json.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

impl Provenance {
    pub fn new(command: Command, config: &ExperimentConfig, tolerances: BTreeMap<String, f64>) -> Self {
        Self {
            tool: format!("transit {}", env!("CARGO_PKG_VERSION")),
            git_rev: GIT_REV.to_string(),
            command: command.name(),
            config_hash: config_hash(config),
            seed: config.seed,
            tolerances,
            config: config.clone(),
        }
    }

    /// `# key: value` lines, one JSON value per line for structured fields.
    pub fn csv_header(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# tool: {}\n", self.tool));
        s.push_str(&format!("# git_rev: {}\n", self.git_rev));
        s.push_str(&format!("# command: {}\n", self.command));
        s.push_str(&format!("# config_hash: {}\n", self.config_hash));
        s.push_str(&format!("# seed: {}\n", self.seed));
        s.push_str(&format!("# tolerances: {}\n", json(&self.tolerances)));
        s.push_str(&format!("# config: {}\n", json(&self.config)));
        s
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serialisable")
}

/// Builds a tolerance map from `(name, value)` pairs.
pub fn tolerances<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_config_but_not_destination() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = Some("x.csv".into());
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), "sha256:".len() + 64);
    }

    #[test]
    fn csv_header_lines_are_comments() {
        let p = Provenance::new(Command::Spectrum, &ExperimentConfig::default(), tolerances([("tol", 1e-12)]));
        let h = p.csv_header();
        assert!(h.lines().all(|l| l.starts_with("# ")));
        assert!(h.contains("# seed: 7\n") && h.contains("\"tol\":1e-12"));
    }
}
