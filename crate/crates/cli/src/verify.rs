//! The `verify-all` battery: every acceptance experiment in one invocation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use agecycle::stream::splitmix64;
use serde::Serialize;

use crate::config::{resolve, Forcing, JobConfig, JobKind, Overrides, RawConfig};
use crate::jobs::run_job;
use crate::report::{num, to_json, write_dir, write_job, Artifact, Gate, FORMAT_VERSION};
use crate::CliError;

/// One battery entry before resolution.
struct Entry {
    job: JobKind,
    raw: RawConfig,
}

fn gates(pairs: &[(&str, Option<f64>)]) -> Option<BTreeMap<String, Option<f64>>> {
    Some(pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect())
}

fn entries() -> Vec<Entry> {
    let ratio = |law: &str, t: f64, g: &[(&str, Option<f64>)]| Entry {
        job: JobKind::RatioSim,
        raw: RawConfig {
            law: Some(law.into()),
            t: Some(t),
            n: Some(1e5),
            gates: gates(g),
            ..RawConfig::default()
        },
    };
    vec![
        ratio(
            "pareto(0.3,1)",
            1e6,
            &[("ratio_ks", Some(0.03)), ("age_ks", None)],
        ),
        ratio(
            "pareto(0.5,1)",
            1e6,
            &[("ratio_ks", Some(0.02)), ("age_ks", Some(0.02))],
        ),
        ratio(
            "pareto(0.7,1)",
            1e6,
            &[("ratio_ks", Some(0.03)), ("age_ks", None)],
        ),
        ratio(
            "exp(1)",
            1e3,
            &[("ratio_ks", Some(0.01)), ("cycle_ks", Some(0.015))],
        ),
        Entry {
            job: JobKind::RenewalFn,
            raw: RawConfig {
                law: Some("pareto(0.5,1)".into()),
                t_grid: Some(vec![1e2, 1e3, 1e4, 1e5, 1e6]),
                n: Some(1e4),
                ..RawConfig::default()
            },
        },
        Entry {
            job: JobKind::Solve,
            raw: RawConfig {
                law: Some("pareto(0.5,1)".into()),
                forcing: Some(Forcing::Renewal),
                horizon: Some(1e4),
                step: Some(0.01),
                ..RawConfig::default()
            },
        },
        Entry {
            job: JobKind::Solve,
            raw: RawConfig {
                law: Some("pareto(0.5,1)".into()),
                x: Some(0.5),
                horizon: Some(1e4),
                step: Some(0.05),
                t_grid: Some(vec![100.0, 1000.0]),
                n: Some(1e5),
                ..RawConfig::default()
            },
        },
        Entry {
            job: JobKind::Solve,
            raw: RawConfig {
                law: Some("exp(1)".into()),
                x: Some(0.5),
                horizon: Some(50.0),
                step: Some(0.01),
                compose: Some(true),
                ..RawConfig::default()
            },
        },
        Entry {
            job: JobKind::DlCheck,
            raw: RawConfig::default(),
        },
        Entry {
            job: JobKind::Identities,
            raw: RawConfig::default(),
        },
    ]
}

/// Resolved battery; entry `i` uses seed `splitmix64(master_seed + i)`.
pub fn battery(master_seed: u64, quick: bool) -> Result<Vec<JobConfig>, CliError> {
    entries()
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let overrides = Overrides {
                seed: Some(splitmix64(master_seed.wrapping_add(i as u64))),
                quick,
            };
            resolve(e.job, &e.raw, overrides)
        })
        .collect()
}

#[derive(Serialize)]
struct BatteryConfig {
    job: &'static str,
    seed: u64,
    quick: bool,
}

#[derive(Serialize)]
struct JobLine<'a> {
    job: &'a str,
    dir: &'a str,
    pass: bool,
    gates: &'a [Gate],
}

#[derive(Serialize)]
struct BatterySummary<'a> {
    format_version: u32,
    job: &'static str,
    config_hash: &'a str,
    config: &'a BatteryConfig,
    jobs: Vec<JobLine<'a>>,
    pass: bool,
}

/// Runs the battery, writing each job and an aggregate `verify-all-<hash>`
/// directory. `on_job` sees every artifact as soon as it is written.
pub fn verify_all(
    out: &Path,
    master_seed: u64,
    quick: bool,
    mut on_job: impl FnMut(&Artifact),
) -> Result<Artifact, CliError> {
    let mut artifacts = Vec::new();
    for config in battery(master_seed, quick)? {
        let output = run_job(&config)?;
        let artifact = write_job(out, &config, &output)?;
        on_job(&artifact);
        artifacts.push(artifact);
    }

    let config = BatteryConfig {
        job: "verify-all",
        seed: master_seed,
        quick,
    };
    let hash = crate::report::hash_json(&config);
    let pass = artifacts.iter().all(|a| a.pass);
    let summary = BatterySummary {
        format_version: FORMAT_VERSION,
        job: "verify-all",
        config_hash: &hash,
        config: &config,
        jobs: artifacts
            .iter()
            .map(|a| JobLine {
                job: &a.job,
                dir: &a.dir,
                pass: a.pass,
                gates: &a.gates,
            })
            .collect(),
        pass,
    };

    let mut csv = String::from("job,dir,gate,criterion,threshold,observed,pass\n");
    for a in &artifacts {
        for g in &a.gates {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                a.job,
                a.dir,
                g.name,
                g.criterion,
                num(g.threshold),
                num(g.observed),
                g.pass
            );
        }
    }
    let dir = format!("verify-all-{hash}");
    write_dir(out, &dir, csv.as_bytes(), &to_json(&summary))?;
    Ok(Artifact {
        dir,
        job: "verify-all".into(),
        gates: artifacts.iter().flat_map(|a| a.gates.clone()).collect(),
        pass,
    })
}
