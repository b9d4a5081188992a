//! Execution of single jobs.

use std::fmt::Write as _;

use agecycle::limits::{self, LimitLaw};
use agecycle::simulate::{self, ReplicationPlan, Snapshot};
use agecycle::solver::{self, GridFunction};
use agecycle::stats::{dkw_epsilon, Ecdf};
use serde_json::{json, Map, Value};

use crate::config::{
    regime, DlCheckConfig, Forcing, IdentitiesConfig, JobConfig, RatioSimConfig, Regime,
    RenewalFnConfig, SolveConfig,
};
use crate::report::{num, Gate, JobOutput};
use crate::CliError;

/// Number of standard errors allowed in the solver/Monte Carlo comparison.
pub const MC_SIGMAS: f64 = 3.0;

pub fn run_job(config: &JobConfig) -> Result<JobOutput, CliError> {
    match config {
        JobConfig::RatioSim(c) => ratio_sim(c),
        JobConfig::RenewalFn(c) => renewal_fn(c),
        JobConfig::Solve(c) => solve(c),
        JobConfig::DlCheck(c) => dl_check(c),
        JobConfig::Identities(c) => identities(c),
    }
}

/// Adds `name` to `out.gates` when the config enables it.
fn gate(
    out: &mut JobOutput,
    gates: &std::collections::BTreeMap<String, f64>,
    name: &str,
    criterion: &'static str,
    observed: f64,
) {
    if let Some(&threshold) = gates.get(name) {
        out.gates
            .push(Gate::new(name, criterion, threshold, observed));
    }
}

fn ratio_sim(c: &RatioSimConfig) -> Result<JobOutput, CliError> {
    let plan = ReplicationPlan::new(c.law, c.t, c.n, c.seed);
    let snaps = simulate::run_snapshots(&plan)?;

    let ratios: Vec<f64> = snaps.iter().map(Snapshot::ratio).collect();
    let (target, criterion) = match c.alpha {
        Some(alpha) => (LimitLaw::RatioPower { alpha }, "C1"),
        None => (LimitLaw::Uniform01, "C2"),
    };
    target.validate()?;
    let ks = Ecdf::new(&ratios)?.ks_distance(&target);
    let eps = dkw_epsilon(c.n, c.delta);

    let mut out = JobOutput::default();
    out.metrics.insert("ratio_ks".into(), ks);
    gate(&mut out, &c.gates, "ratio_ks", criterion, ks);

    match c.alpha {
        Some(alpha) => {
            let age: Vec<f64> = snaps.iter().map(Snapshot::age_fraction).collect();
            let law = LimitLaw::DlAge { alpha };
            law.validate()?;
            let age_ks = Ecdf::new(&age)?.ks_distance(&law);
            out.metrics.insert("age_ks".into(), age_ks);
            gate(&mut out, &c.gates, "age_ks", "C7", age_ks);
        }
        None => {
            let cycles: Vec<f64> = snaps.iter().map(|s| s.cycle).collect();
            let law = LimitLaw::SizeBiasedCycle { base: c.law };
            law.validate()?;
            let cycle_ks = Ecdf::new(&cycles)?.ks_distance(&law);
            out.metrics.insert("cycle_ks".into(), cycle_ks);
            gate(&mut out, &c.gates, "cycle_ks", "C2", cycle_ks);
        }
    }
    let mean_count = snaps.iter().map(|s| s.count as f64).sum::<f64>() / c.n as f64;
    out.metrics.insert("mean_count".into(), mean_count);

    out.headline = headline(&[
        ("law", json!(c.law.to_string())),
        ("t", json!(c.t)),
        ("n", json!(c.n)),
        ("seed", json!(c.seed)),
        ("delta", json!(c.delta)),
        ("ks", json!(ks)),
        ("dkw_epsilon", json!(eps)),
    ]);

    let mut csv = String::with_capacity(c.n * 128);
    csv.push_str("rep_index,t,age,residual,cycle,count,ratio\n");
    for (i, s) in snaps.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{}",
            num(s.t),
            num(s.age),
            num(s.residual),
            num(s.cycle),
            s.count,
            num(s.ratio())
        );
    }
    out.csv = csv.into_bytes();
    Ok(out)
}

fn renewal_fn(c: &RenewalFnConfig) -> Result<JobOutput, CliError> {
    let estimates = simulate::renewal_function_mc(&c.law, &c.t_grid, c.n, c.seed)?;
    let mut out = JobOutput::default();
    let mut csv = String::from("t,mean,stderr,survival,product\n");
    for e in &estimates {
        let s = c.law.survival(e.t);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(e.t),
            num(e.mean),
            num(e.stderr),
            num(s),
            num(e.mean * s)
        );
    }
    out.csv = csv.into_bytes();

    let last = estimates.last().expect("grid is non-empty");
    let product = last.mean * c.law.survival(last.t);
    out.metrics.insert("product".into(), product);
    if let Regime::Power(alpha) = regime(&c.law)? {
        let c_star = limits::erickson_constant(alpha)?;
        let rel = (product / c_star - 1.0).abs();
        out.metrics.insert("c_star".into(), c_star);
        out.metrics.insert("erickson_ratio".into(), rel);
        gate(&mut out, &c.gates, "erickson_ratio", "C3", rel);
    }
    out.headline = headline(&[
        ("law", json!(c.law.to_string())),
        ("t", json!(last.t)),
        ("n", json!(c.n)),
        ("seed", json!(c.seed)),
    ]);
    Ok(out)
}

fn solve(c: &SolveConfig) -> Result<JobOutput, CliError> {
    let mut out = JobOutput::default();
    let law = c.law;
    let z = match c.forcing {
        Forcing::RatioTail => {
            let x = c.x.expect("ratio-tail jobs carry x");
            let forcing = solver::ratio_tail_forcing(law, x)?;
            let z = solver::solve_renewal(&law, &forcing, c.horizon, c.step)?;
            let res = solver::residual(&law, &forcing, &z)?;
            out.metrics.insert("residual".into(), res);

            let limit = match regime(&law)? {
                Regime::Power(alpha) => 1.0 - x.powf(alpha),
                Regime::Uniform => 1.0 - x,
            };
            let gap = (z.last() - limit).abs();
            out.metrics.insert("limit".into(), limit);
            out.metrics.insert("limit_gap".into(), gap);
            gate(&mut out, &c.gates, "limit_gap", "C5", gap);

            let mut residual_worst = res;
            if c.compose {
                let one = |_: f64| 1.0;
                let u = solver::solve_renewal(&law, one, c.horizon, c.step)?;
                let res_u = solver::residual(&law, one, &u)?;
                residual_worst = residual_worst.max(res_u);
                out.metrics.insert("residual_renewal".into(), res_u);
                let b = GridFunction::sample(c.step, z.len(), &forcing)?;
                let composed = solver::key_renewal_compose(&u, &b)?;
                let gap = composed.sup_distance(&z);
                out.metrics.insert("compose_gap".into(), gap);
                gate(&mut out, &c.gates, "compose_gap", "C5", gap);
            }
            gate(&mut out, &c.gates, "residual", "C5", residual_worst);

            if let (Some(n), Some(seed)) = (c.n, c.seed) {
                for &t in &c.t_grid {
                    let ratios =
                        simulate::run_ratio_experiment(&ReplicationPlan::new(law, t, n, seed))?;
                    let p = ratios.iter().filter(|&&v| v > x).count() as f64 / n as f64;
                    let stderr = (p * (1.0 - p) / n as f64).sqrt();
                    let gap = (z.at(t) - p).abs();
                    let label = format!("mc_gap@{t}");
                    out.metrics.insert(format!("mc_p@{t}"), p);
                    out.metrics.insert(format!("mc_stderr@{t}"), stderr);
                    out.metrics.insert(label.clone(), gap);
                    if let Some(&slack) = c.gates.get("mc_gap") {
                        let threshold = MC_SIGMAS * stderr + slack;
                        out.gates.push(Gate::new(label, "C6", threshold, gap));
                    }
                }
            }
            z
        }
        Forcing::Renewal => {
            let one = |_: f64| 1.0;
            let u = solver::solve_renewal(&law, one, c.horizon, c.step)?;
            let res = solver::residual(&law, one, &u)?;
            out.metrics.insert("residual".into(), res);
            gate(&mut out, &c.gates, "residual", "C5", res);
            let product = u.last() * law.survival(u.horizon());
            out.metrics.insert("product".into(), product);
            if let Regime::Power(alpha) = regime(&law)? {
                let c_star = limits::erickson_constant(alpha)?;
                let rel = (product / c_star - 1.0).abs();
                out.metrics.insert("c_star".into(), c_star);
                out.metrics.insert("erickson_ratio".into(), rel);
                gate(&mut out, &c.gates, "erickson_ratio", "C3", rel);
            }
            u
        }
    };

    out.headline = headline(&[
        ("law", json!(law.to_string())),
        ("t", json!(z.horizon())),
        ("value", json!(z.last())),
    ]);
    let mut csv = Vec::with_capacity(z.len() * 48);
    z.write_csv(&mut csv).expect("writing to memory");
    out.csv = csv;
    Ok(out)
}

fn dl_check(c: &DlCheckConfig) -> Result<JobOutput, CliError> {
    let mut out = JobOutput::default();
    let mut csv = String::from("alpha,x,value,target\n");
    let mut worst: f64 = 0.0;
    for &alpha in &c.alpha_grid {
        for &x in &c.x_grid {
            let value = limits::ratio_cdf_from_dl(alpha, x)?;
            let target = limits::ratio_limit_cdf(alpha, x);
            worst = worst.max((value - target).abs());
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                num(alpha),
                num(x),
                num(value),
                num(target)
            );
        }
    }
    out.csv = csv.into_bytes();
    out.metrics.insert("dl_ratio_cdf".into(), worst);
    gate(&mut out, &c.gates, "dl_ratio_cdf", "C7", worst);
    Ok(out)
}

fn identities(c: &IdentitiesConfig) -> Result<JobOutput, CliError> {
    let mut out = JobOutput::default();
    let mut csv = String::from("alpha,c_star,beta_integral,product\n");
    let (mut product_err, mut beta_err): (f64, f64) = (0.0, 0.0);
    for &alpha in &c.alpha_grid {
        let beta = limits::beta_integral(alpha)?;
        let c_star = limits::erickson_constant(alpha)?;
        let product = c_star * alpha * beta;
        let closed = std::f64::consts::PI / (std::f64::consts::PI * alpha).sin();
        product_err = product_err.max((product - 1.0).abs());
        beta_err = beta_err.max((beta / closed - 1.0).abs());
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(alpha),
            num(c_star),
            num(beta),
            num(product)
        );
    }
    out.csv = csv.into_bytes();
    out.metrics.insert("identity_product".into(), product_err);
    out.metrics.insert("beta_closed_form".into(), beta_err);
    gate(&mut out, &c.gates, "identity_product", "C4", product_err);
    gate(&mut out, &c.gates, "beta_closed_form", "C4", beta_err);
    Ok(out)
}

fn headline(fields: &[(&str, Value)]) -> Map<String, Value> {
    fields
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}
