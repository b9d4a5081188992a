//! Experiment configuration: raw JSON documents and their validated, fully
//! defaulted form.
//!
//! A raw config is a single JSON object. Unknown keys are rejected, and so are
//! known keys that the selected job does not use. Resolution fills in defaults,
//! applies `--quick` scaling and checks every numeric range; the resolved
//! config is what gets hashed into the output directory name.

use std::collections::BTreeMap;
use std::fmt;

use agecycle::limits::LimitLaw;
use agecycle::{InterArrivalLaw, Mean};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::CliError;

/// Factor applied to `n`, `t`, `t_grid` and `horizon` in quick mode.
pub const QUICK_SCALE: f64 = 0.1;
/// Factor applied to every gate threshold in quick mode.
pub const QUICK_LOOSEN: f64 = 3.0;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_LAW: &str = "pareto(0.5,1)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    RatioSim,
    RenewalFn,
    Solve,
    DlCheck,
    Identities,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::RatioSim => "ratio-sim",
            JobKind::RenewalFn => "renewal-fn",
            JobKind::Solve => "solve",
            JobKind::DlCheck => "dl-check",
            JobKind::Identities => "identities",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            JobKind::RatioSim => &["law", "alpha", "t", "n", "seed", "delta"],
            JobKind::RenewalFn => &["law", "t_grid", "n", "seed"],
            JobKind::Solve => &[
                "law", "forcing", "x", "horizon", "step", "compose", "t_grid", "n", "seed",
            ],
            JobKind::DlCheck => &["alpha_grid", "x_grid"],
            JobKind::Identities => &["alpha_grid"],
        }
    }
}

impl fmt::Display for JobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Right-hand side of a `solve` job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Forcing {
    /// `b(t) = F̄(t) - F̄(t/x)`; the solution is `P(A(t)/C(t) > x)`.
    RatioTail,
    /// `f = 1`; the solution is the renewal function.
    Renewal,
}

/// A config document as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub job: Option<JobKind>,
    pub law: Option<String>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub x: Option<f64>,
    pub x_grid: Option<Vec<f64>>,
    pub forcing: Option<Forcing>,
    pub compose: Option<bool>,
    pub n: Option<f64>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub out: Option<String>,
    /// Threshold overrides; `null` disables a gate.
    pub gates: Option<BTreeMap<String, Option<f64>>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        if !value.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut mark = |set: bool, key| {
            if set {
                keys.push(key)
            }
        };
        mark(self.law.is_some(), "law");
        mark(self.alpha.is_some(), "alpha");
        mark(self.alpha_grid.is_some(), "alpha_grid");
        mark(self.t.is_some(), "t");
        mark(self.t_grid.is_some(), "t_grid");
        mark(self.horizon.is_some(), "horizon");
        mark(self.step.is_some(), "step");
        mark(self.x.is_some(), "x");
        mark(self.x_grid.is_some(), "x_grid");
        mark(self.forcing.is_some(), "forcing");
        mark(self.compose.is_some(), "compose");
        mark(self.n.is_some(), "n");
        mark(self.seed.is_some(), "seed");
        mark(self.delta.is_some(), "delta");
        keys
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub quick: bool,
}

/// A validated job with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "job", rename_all = "kebab-case")]
pub enum JobConfig {
    RatioSim(RatioSimConfig),
    RenewalFn(RenewalFnConfig),
    Solve(SolveConfig),
    DlCheck(DlCheckConfig),
    Identities(IdentitiesConfig),
}

impl JobConfig {
    pub fn kind(&self) -> JobKind {
        match self {
            JobConfig::RatioSim(_) => JobKind::RatioSim,
            JobConfig::RenewalFn(_) => JobKind::RenewalFn,
            JobConfig::Solve(_) => JobKind::Solve,
            JobConfig::DlCheck(_) => JobKind::DlCheck,
            JobConfig::Identities(_) => JobKind::Identities,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSimConfig {
    #[serde(serialize_with = "display")]
    pub law: InterArrivalLaw,
    /// Exponent of the `U^(1/alpha)` target; `None` when the target is uniform.
    pub alpha: Option<f64>,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub delta: f64,
    pub quick: bool,
    pub gates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalFnConfig {
    #[serde(serialize_with = "display")]
    pub law: InterArrivalLaw,
    pub t_grid: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub quick: bool,
    pub gates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    #[serde(serialize_with = "display")]
    pub law: InterArrivalLaw,
    pub forcing: Forcing,
    pub x: Option<f64>,
    pub horizon: f64,
    pub step: f64,
    pub compose: bool,
    /// Times of the Monte Carlo comparison, with its sample size and seed.
    pub t_grid: Vec<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub quick: bool,
    pub gates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlCheckConfig {
    pub alpha_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub quick: bool,
    pub gates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitiesConfig {
    pub alpha_grid: Vec<f64>,
    pub quick: bool,
    pub gates: BTreeMap<String, f64>,
}

fn display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Which limit the ratio converges to for a given law and optional exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Infinite mean with tail index `alpha` in (0, 1).
    Power(f64),
    /// Finite mean.
    Uniform,
}

pub fn regime(law: &InterArrivalLaw) -> Result<Regime, CliError> {
    match law.mean()? {
        Mean::Finite(_) => Ok(Regime::Uniform),
        Mean::Infinite => match law.tail_index() {
            Some(a) if a < 1.0 => Ok(Regime::Power(a)),
            _ => Err(CliError::Config(format!(
                "{law} has tail index 1: no limit law is available for its gates"
            ))),
        },
    }
}

impl Regime {
    pub fn ratio_law(self) -> LimitLaw {
        match self {
            Regime::Power(alpha) => LimitLaw::RatioPower { alpha },
            Regime::Uniform => LimitLaw::Uniform01,
        }
    }
}

/// Default gates of a job as `(name, threshold)`.
pub fn default_gates(config: &JobConfig) -> Vec<(&'static str, f64)> {
    match config {
        JobConfig::RatioSim(c) => match c.alpha {
            Some(_) => vec![("ratio_ks", 0.02), ("age_ks", 0.02)],
            None => vec![("ratio_ks", 0.01), ("cycle_ks", 0.015)],
        },
        JobConfig::RenewalFn(c) => match regime(&c.law) {
            Ok(Regime::Power(_)) => vec![("erickson_ratio", 0.10)],
            _ => vec![],
        },
        JobConfig::Solve(c) => {
            let mut gates = vec![("residual", 1e-12)];
            match c.forcing {
                Forcing::RatioTail => gates.push(("limit_gap", 0.01)),
                Forcing::Renewal => {
                    if let Ok(Regime::Power(_)) = regime(&c.law) {
                        gates.push(("erickson_ratio", 0.10));
                    }
                }
            }
            if c.compose {
                gates.push(("compose_gap", 0.01));
            }
            if !c.t_grid.is_empty() {
                gates.push(("mc_gap", 0.01));
            }
            gates
        }
        JobConfig::DlCheck(_) => vec![("dl_ratio_cdf", 1e-4)],
        JobConfig::Identities(_) => vec![("identity_product", 1e-12), ("beta_closed_form", 1e-10)],
    }
}

/// Validates `raw` for `job` and fills in defaults.
pub fn resolve(job: JobKind, raw: &RawConfig, overrides: Overrides) -> Result<JobConfig, CliError> {
    if let Some(declared) = raw.job {
        if declared != job {
            return Err(CliError::Config(format!(
                "config declares job `{declared}` but `{job}` was requested"
            )));
        }
    }
    if let Some(key) = raw.present().into_iter().find(|k| !job.keys().contains(k)) {
        return Err(CliError::Config(format!(
            "key `{key}` is not used by job `{job}`"
        )));
    }
    let scale = if overrides.quick { QUICK_SCALE } else { 1.0 };
    let seed = overrides.seed.or(raw.seed).unwrap_or(DEFAULT_SEED);

    let mut config = match job {
        JobKind::RatioSim => {
            let law = parse_law(raw)?;
            let alpha = match raw.alpha {
                Some(a) => Some(open_alpha(a)?),
                None => match regime(&law)? {
                    Regime::Power(a) => Some(a),
                    Regime::Uniform => None,
                },
            };
            JobConfig::RatioSim(RatioSimConfig {
                law,
                alpha,
                t: positive("t", raw.t.unwrap_or(1e6) * scale)?,
                n: count("n", raw.n.unwrap_or(1e5), scale)?,
                seed,
                delta: probability("delta", raw.delta.unwrap_or(1e-3))?,
                quick: overrides.quick,
                gates: BTreeMap::new(),
            })
        }
        JobKind::RenewalFn => {
            let law = parse_law(raw)?;
            let grid = raw
                .t_grid
                .clone()
                .unwrap_or_else(|| vec![1e2, 1e3, 1e4, 1e5, 1e6]);
            JobConfig::RenewalFn(RenewalFnConfig {
                law,
                t_grid: time_grid(&grid, scale)?,
                n: count("n", raw.n.unwrap_or(1e4), scale)?,
                seed,
                quick: overrides.quick,
                gates: BTreeMap::new(),
            })
        }
        JobKind::Solve => resolve_solve(raw, seed, overrides.quick)?,
        JobKind::DlCheck => {
            let alpha_grid = raw
                .alpha_grid
                .clone()
                .unwrap_or_else(|| vec![0.3, 0.5, 0.7]);
            let x_grid = raw
                .x_grid
                .clone()
                .unwrap_or_else(|| (1..=9).map(|k| k as f64 / 10.0).collect());
            for &a in &alpha_grid {
                open_alpha(a)?;
            }
            nonempty("alpha_grid", &alpha_grid)?;
            nonempty("x_grid", &x_grid)?;
            if let Some(&x) = x_grid.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
                return Err(CliError::Config(format!("x_grid value {x} outside [0,1]")));
            }
            JobConfig::DlCheck(DlCheckConfig {
                alpha_grid,
                x_grid,
                quick: overrides.quick,
                gates: BTreeMap::new(),
            })
        }
        JobKind::Identities => {
            let alpha_grid = raw
                .alpha_grid
                .clone()
                .unwrap_or_else(|| (1..=19).map(|k| k as f64 / 20.0).collect());
            nonempty("alpha_grid", &alpha_grid)?;
            for &a in &alpha_grid {
                open_alpha(a)?;
            }
            JobConfig::Identities(IdentitiesConfig {
                alpha_grid,
                quick: overrides.quick,
                gates: BTreeMap::new(),
            })
        }
    };

    let gates = resolve_gates(&config, raw.gates.as_ref(), overrides.quick)?;
    match &mut config {
        JobConfig::RatioSim(c) => c.gates = gates,
        JobConfig::RenewalFn(c) => c.gates = gates,
        JobConfig::Solve(c) => c.gates = gates,
        JobConfig::DlCheck(c) => c.gates = gates,
        JobConfig::Identities(c) => c.gates = gates,
    }
    Ok(config)
}

fn resolve_solve(raw: &RawConfig, seed: u64, quick: bool) -> Result<JobConfig, CliError> {
    let scale = if quick { QUICK_SCALE } else { 1.0 };
    let law = parse_law(raw)?;
    let forcing = raw.forcing.unwrap_or(Forcing::RatioTail);
    let ratio_only = |key: &str, set: bool| -> Result<(), CliError> {
        if set && forcing != Forcing::RatioTail {
            return Err(CliError::Config(format!(
                "`{key}` requires forcing \"ratio-tail\""
            )));
        }
        Ok(())
    };
    ratio_only("x", raw.x.is_some())?;
    ratio_only("compose", raw.compose.is_some())?;
    ratio_only("t_grid", raw.t_grid.is_some())?;
    if raw.t_grid.is_none() && raw.n.is_some() {
        return Err(CliError::Config(
            "`n` requires a Monte Carlo `t_grid`".into(),
        ));
    }

    let x = match forcing {
        Forcing::RatioTail => {
            let x = raw.x.unwrap_or(0.5);
            if !(x > 0.0 && x < 1.0) {
                return Err(CliError::Config(format!("x = {x} outside (0,1)")));
            }
            Some(x)
        }
        Forcing::Renewal => None,
    };
    let horizon = positive("horizon", raw.horizon.unwrap_or(1e4) * scale)?;
    let step = positive("step", raw.step.unwrap_or(0.05))?;
    agecycle::solver::grid_points(horizon, step)?;
    if law.survival(step) == 0.0 {
        return Err(CliError::Config(format!(
            "step {step} is too coarse for {law}"
        )));
    }

    let t_grid = match &raw.t_grid {
        Some(grid) => time_grid(grid, scale)?,
        None => Vec::new(),
    };
    for &t in &t_grid {
        let cells = t / step;
        if t > horizon || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(CliError::Config(format!(
                "t_grid point {t} is not a solver grid point in [0, {horizon}]"
            )));
        }
    }
    let (n, mc_seed) = if t_grid.is_empty() {
        (None, None)
    } else {
        (Some(count("n", raw.n.unwrap_or(1e5), scale)?), Some(seed))
    };

    Ok(JobConfig::Solve(SolveConfig {
        law,
        forcing,
        x,
        horizon,
        step,
        compose: raw.compose.unwrap_or(false),
        t_grid,
        n,
        seed: mc_seed,
        quick,
        gates: BTreeMap::new(),
    }))
}

fn resolve_gates(
    config: &JobConfig,
    requested: Option<&BTreeMap<String, Option<f64>>>,
    quick: bool,
) -> Result<BTreeMap<String, f64>, CliError> {
    let defaults = default_gates(config);
    let mut gates: BTreeMap<String, f64> = defaults
        .iter()
        .map(|&(name, threshold)| (name.to_string(), threshold))
        .collect();
    for (name, threshold) in requested.into_iter().flatten() {
        if !defaults.iter().any(|(d, _)| d == name) {
            return Err(CliError::Config(format!(
                "gate `{name}` does not apply to this {} job",
                config.kind()
            )));
        }
        match threshold {
            Some(v) if v.is_finite() && *v > 0.0 => {
                gates.insert(name.clone(), *v);
            }
            Some(v) => {
                return Err(CliError::Config(format!(
                    "gate `{name}` threshold {v} must be positive and finite"
                )))
            }
            None => {
                gates.remove(name);
            }
        }
    }
    if quick {
        gates.values_mut().for_each(|v| *v *= QUICK_LOOSEN);
    }
    Ok(gates)
}

fn parse_law(raw: &RawConfig) -> Result<InterArrivalLaw, CliError> {
    let text = raw.law.as_deref().unwrap_or(DEFAULT_LAW);
    let law: InterArrivalLaw = text.parse()?;
    law.validate()?;
    Ok(law)
}

fn open_alpha(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(CliError::Config(format!("alpha outside (0,1): {alpha}")))
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "`{name}` = {v} must be positive and finite"
        )))
    }
}

fn probability(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{name}` = {v} outside (0,1)")))
    }
}

fn count(name: &str, v: f64, scale: f64) -> Result<usize, CliError> {
    if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= 9.0e15) {
        return Err(CliError::Config(format!(
            "`{name}` = {v} must be a positive integer"
        )));
    }
    Ok(((v * scale).round() as usize).max(1))
}

fn nonempty(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        Err(CliError::Config(format!("`{name}` must not be empty")))
    } else {
        Ok(())
    }
}

fn time_grid(grid: &[f64], scale: f64) -> Result<Vec<f64>, CliError> {
    nonempty("t_grid", grid)?;
    let scaled: Vec<f64> = grid
        .iter()
        .map(|&t| positive("t_grid", t * scale))
        .collect::<Result<_, _>>()?;
    if scaled.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "`t_grid` must be strictly increasing".into(),
        ));
    }
    Ok(scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> RawConfig {
        RawConfig::parse(text).unwrap()
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RawConfig::parse(r#"{"job":"ratio-sim","colour":1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field `colour`"), "{err}");
    }

    #[test]
    fn foreign_key_rejected() {
        let err = resolve(
            JobKind::Identities,
            &raw(r#"{"t":5}"#),
            Overrides::default(),
        );
        assert!(err.unwrap_err().to_string().contains("`t` is not used"));
    }

    #[test]
    fn job_mismatch_rejected() {
        let err = resolve(
            JobKind::Solve,
            &raw(r#"{"job":"dl-check"}"#),
            Overrides::default(),
        );
        assert!(matches!(err, Err(CliError::Config(_))));
    }

    #[test]
    fn alpha_out_of_range() {
        let err = resolve(
            JobKind::RatioSim,
            &raw(r#"{"law":"pareto(0.5,1)","alpha":1.5}"#),
            Overrides::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("alpha outside (0,1)"), "{err}");
    }

    #[test]
    fn ratio_sim_defaults_follow_regime() {
        let c = resolve(
            JobKind::RatioSim,
            &raw(r#"{"law":"exp(1)","t":1000}"#),
            Overrides::default(),
        )
        .unwrap();
        let JobConfig::RatioSim(c) = c else { panic!() };
        assert_eq!(c.alpha, None);
        assert_eq!(c.gates.keys().collect::<Vec<_>>(), ["cycle_ks", "ratio_ks"]);

        let c = resolve(JobKind::RatioSim, &raw("{}"), Overrides::default()).unwrap();
        let JobConfig::RatioSim(c) = c else { panic!() };
        assert_eq!(c.alpha, Some(0.5));
        assert_eq!(c.gates["age_ks"], 0.02);
    }

    #[test]
    fn gates_override_and_disable() {
        let c = resolve(
            JobKind::RatioSim,
            &raw(r#"{"gates":{"ratio_ks":0.03,"age_ks":null}}"#),
            Overrides::default(),
        )
        .unwrap();
        let JobConfig::RatioSim(c) = c else { panic!() };
        assert_eq!(c.gates.len(), 1);
        assert_eq!(c.gates["ratio_ks"], 0.03);

        let err = resolve(
            JobKind::RatioSim,
            &raw(r#"{"gates":{"residual":1}}"#),
            Overrides::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn quick_scales_sizes_and_gates() {
        let quick = Overrides {
            seed: Some(7),
            quick: true,
        };
        let c = resolve(JobKind::RatioSim, &raw(r#"{"seed":3}"#), quick).unwrap();
        let JobConfig::RatioSim(c) = c else { panic!() };
        assert_eq!((c.t, c.n, c.seed), (1e5, 10_000, 7));
        assert!((c.gates["ratio_ks"] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn solve_validation() {
        let ok = resolve(
            JobKind::Solve,
            &raw(r#"{"horizon":1000,"step":0.05,"t_grid":[100,1000],"n":1000}"#),
            Overrides::default(),
        )
        .unwrap();
        let JobConfig::Solve(c) = ok else { panic!() };
        assert_eq!(c.n, Some(1000));
        assert!(c.gates.contains_key("mc_gap"));

        for bad in [
            r#"{"forcing":"renewal","x":0.5}"#,
            r#"{"t_grid":[100.01]}"#,
            r#"{"horizon":10,"t_grid":[100]}"#,
            r#"{"n":5}"#,
            r#"{"x":1.0}"#,
            r#"{"law":"exp(1)","step":1000}"#,
        ] {
            assert!(
                resolve(JobKind::Solve, &raw(bad), Overrides::default()).is_err(),
                "{bad}"
            );
        }
    }

    #[test]
    fn tail_index_one_has_no_gates() {
        let err = resolve(
            JobKind::RatioSim,
            &raw(r#"{"law":"pareto(1,1)"}"#),
            Overrides::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn resolved_config_serializes_canonically() {
        let c = resolve(
            JobKind::Identities,
            &raw(r#"{"alpha_grid":[0.25]}"#),
            Overrides::default(),
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"job":"identities","alpha_grid":[0.25],"quick":false,"gates":{"beta_closed_form":1e-10,"identity_product":1e-12}}"#
        );
    }
}
