//! Gates, JSON summaries and the on-disk artifact layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::JobConfig;
use crate::CliError;

/// Version of the summary and CSV layout; bumped on any format change.
pub const FORMAT_VERSION: u32 = 1;

/// A pass/fail check `observed <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    /// Acceptance criterion the gate implements, `C1` to `C8`.
    pub criterion: &'static str,
    pub threshold: f64,
    pub observed: f64,
    pub pass: bool,
}

impl Gate {
    pub fn new(
        name: impl Into<String>,
        criterion: &'static str,
        threshold: f64,
        observed: f64,
    ) -> Self {
        Gate {
            name: name.into(),
            criterion,
            threshold,
            observed,
            pass: observed.is_finite() && observed <= threshold,
        }
    }

    /// One-line human-readable verdict.
    pub fn describe(&self) -> String {
        let (verdict, cmp) = if self.pass {
            ("PASS", "<=")
        } else {
            ("FAIL", ">")
        };
        format!(
            "{verdict} gate {} [{}]: observed {:e} {cmp} threshold {:e}",
            self.name, self.criterion, self.observed, self.threshold
        )
    }
}

/// Everything a job produces before it is written out.
#[derive(Debug, Clone, Default)]
pub struct JobOutput {
    /// Top-level summary fields specific to the job (`law`, `ks`, ...).
    pub headline: Map<String, Value>,
    pub metrics: BTreeMap<String, f64>,
    pub gates: Vec<Gate>,
    pub csv: Vec<u8>,
}

impl JobOutput {
    pub fn pass(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

/// A job that has been written to disk.
#[derive(Debug, Clone)]
pub struct Artifact {
    /// Directory name relative to the output root.
    pub dir: String,
    pub job: String,
    pub gates: Vec<Gate>,
    pub pass: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    format_version: u32,
    job: &'a str,
    config_hash: &'a str,
    config: &'a JobConfig,
    #[serde(flatten)]
    headline: &'a Map<String, Value>,
    metrics: &'a BTreeMap<String, f64>,
    gates: &'a [Gate],
    pass: bool,
}

/// First 16 hex digits of the SHA-256 of the canonical JSON of `value`.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<out>/<job>-<hash>/data.csv` and `summary.json`.
pub fn write_job(out: &Path, config: &JobConfig, output: &JobOutput) -> Result<Artifact, CliError> {
    let job = config.kind().name();
    let hash = hash_json(config);
    let dir = format!("{job}-{hash}");
    let summary = Summary {
        format_version: FORMAT_VERSION,
        job,
        config_hash: &hash,
        config,
        headline: &output.headline,
        metrics: &output.metrics,
        gates: &output.gates,
        pass: output.pass(),
    };
    write_dir(out, &dir, &output.csv, &to_json(&summary))?;
    Ok(Artifact {
        dir,
        job: job.to_string(),
        gates: output.gates.clone(),
        pass: output.pass(),
    })
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("summary serializes");
    bytes.push(b'\n');
    bytes
}

pub fn write_dir(out: &Path, dir: &str, csv: &[u8], summary: &[u8]) -> Result<(), CliError> {
    let path = out.join(dir);
    fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
    for (name, bytes) in [("data.csv", csv), ("summary.json", summary)] {
        let file = path.join(name);
        fs::write(&file, bytes).map_err(|e| CliError::io(&file, e))?;
    }
    Ok(())
}

/// Shortest round-trip formatting used in CSV cells.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_verdicts() {
        assert!(Gate::new("g", "C1", 0.02, 0.02).pass);
        assert!(!Gate::new("g", "C1", 0.02, 0.0201).pass);
        assert!(!Gate::new("g", "C1", 0.02, f64::NAN).pass);
        let line = Gate::new("ratio_ks", "C1", 0.02, 0.5).describe();
        assert_eq!(
            line,
            "FAIL gate ratio_ks [C1]: observed 5e-1 > threshold 2e-2"
        );
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            hash_json(&serde_json::json!({"a": 1})),
            hash_json(&serde_json::json!({"a": 1}))
        );
        assert_ne!(hash_json(&[1.0]), hash_json(&[1.0000000000000002]));
        assert_eq!(hash_json("x").len(), 16);
    }

    #[test]
    fn num_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
