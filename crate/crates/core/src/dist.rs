//! Inter-arrival laws: regularly varying tails and finite-mean baselines.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Distribution of the i.i.d. inter-arrival times of a renewal process.
///
/// All variants are continuous (non-arithmetic) and supported on `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterArrivalLaw {
    /// Survival `(xm / t)^alpha` for `t >= xm`, identically 1 below `xm`.
    Pareto { alpha: f64, xm: f64 },
    /// Survival `(xm / t)^alpha * (ln t / ln xm)^beta` for `t >= xm`: a Pareto tail
    /// multiplied by a logarithmic slowly varying factor.
    ParetoLog { alpha: f64, xm: f64, beta: f64 },
    /// Survival `exp(-rate * t)`.
    Exponential { rate: f64 },
}

/// First moment of a law, which may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mean {
    Finite(f64),
    Infinite,
}

impl Mean {
    pub fn finite(self) -> Option<f64> {
        match self {
            Mean::Finite(m) => Some(m),
            Mean::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Mean::Infinite)
    }
}

const QUANTILE_REL_TOL: f64 = 1e-12;
const MEAN_TOL: Tolerance = Tolerance::relative(1e-12);

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

impl InterArrivalLaw {
    pub fn pareto(alpha: f64, xm: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("xm", xm)?;
        Ok(InterArrivalLaw::Pareto { alpha, xm })
    }

    /// Pareto tail with a `(ln t / ln xm)^beta` factor.
    ///
    /// Requires `xm > e` so that `ln t > 1` on the support, and `beta <= alpha ln xm`
    /// so that the density `S(t) (alpha - beta / ln t) / t` is non-negative.
    pub fn pareto_log(alpha: f64, xm: f64, beta: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("xm", xm)?;
        if xm <= std::f64::consts::E {
            return Err(Error::InvalidParameter {
                name: "xm",
                value: xm,
                reason: "paretolog scale must exceed e",
            });
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be finite",
            });
        }
        if beta > alpha * xm.ln() {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "density would be negative near xm (need beta <= alpha * ln xm)",
            });
        }
        Ok(InterArrivalLaw::ParetoLog { alpha, xm, beta })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(InterArrivalLaw::Exponential { rate })
    }

    /// Re-runs the constructor checks; useful for values built as enum literals.
    pub fn validate(&self) -> Result<()> {
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => Self::pareto(alpha, xm).map(|_| ()),
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                Self::pareto_log(alpha, xm, beta).map(|_| ())
            }
            InterArrivalLaw::Exponential { rate } => Self::exponential(rate).map(|_| ()),
        }
    }

    /// Tail index of a regularly varying law, `None` for light tails.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            InterArrivalLaw::Pareto { alpha, .. } | InterArrivalLaw::ParetoLog { alpha, .. } => {
                Some(alpha)
            }
            InterArrivalLaw::Exponential { .. } => None,
        }
    }

    /// Lower end of the support (`xm` for the Pareto families, 0 otherwise).
    pub fn support_start(&self) -> f64 {
        match *self {
            InterArrivalLaw::Pareto { xm, .. } | InterArrivalLaw::ParetoLog { xm, .. } => xm,
            InterArrivalLaw::Exponential { .. } => 0.0,
        }
    }

    /// `P(X > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => {
                if t <= xm {
                    1.0
                } else {
                    (xm / t).powf(alpha)
                }
            }
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                if t <= xm {
                    1.0
                } else if t.is_infinite() {
                    0.0
                } else {
                    (xm / t).powf(alpha) * (t.ln() / xm.ln()).powf(beta)
                }
            }
            InterArrivalLaw::Exponential { rate } => (-rate * t.max(0.0)).exp(),
        }
    }

    /// Probability density at `t`.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => {
                if t < xm {
                    0.0
                } else {
                    alpha / t * (xm / t).powf(alpha)
                }
            }
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                if t < xm {
                    0.0
                } else {
                    self.survival(t) * (alpha - beta / t.ln()) / t
                }
            }
            InterArrivalLaw::Exponential { rate } => {
                if t < 0.0 {
                    0.0
                } else {
                    rate * (-rate * t).exp()
                }
            }
        }
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// Inverse of the survival function: the `t` with `survival(t) = u`.
    pub fn quantile_survival(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "u",
                value: u,
                reason: "survival level must lie in (0, 1]",
            });
        }
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => Ok(xm * u.powf(-1.0 / alpha)),
            InterArrivalLaw::Exponential { rate } => Ok(-u.ln() / rate),
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                paretolog_quantile(alpha, xm, beta, u)
            }
        }
    }

    /// One draw by inversion of a uniform on the open interval `(0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.sample_from_uniform(u)
    }

    /// Inversion for a uniform already drawn from `(0, 1)`.
    #[inline]
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => xm * u.powf(-1.0 / alpha),
            InterArrivalLaw::Exponential { rate } => -u.ln() / rate,
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                paretolog_quantile(alpha, xm, beta, u)
                    .expect("validated paretolog law inverts every u in (0, 1)")
            }
        }
    }

    /// `E X`, or [`Mean::Infinite`] when the tail index is at most 1.
    pub fn mean(&self) -> Result<Mean> {
        match *self {
            InterArrivalLaw::Exponential { rate } => Ok(Mean::Finite(1.0 / rate)),
            InterArrivalLaw::Pareto { alpha, xm } => {
                if alpha <= 1.0 {
                    Ok(Mean::Infinite)
                } else {
                    Ok(Mean::Finite(alpha * xm / (alpha - 1.0)))
                }
            }
            InterArrivalLaw::ParetoLog { alpha, .. } => {
                if alpha <= 1.0 {
                    Ok(Mean::Infinite)
                } else {
                    self.integrated_survival(f64::INFINITY).map(Mean::Finite)
                }
            }
        }
    }

    /// `int_0^x survival(s) ds`, i.e. `E min(X, x)`. Infinite `x` gives the mean.
    pub fn integrated_survival(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match *self {
            InterArrivalLaw::Exponential { rate } => Ok(-(-rate * x).exp_m1() / rate),
            InterArrivalLaw::Pareto { xm, .. } | InterArrivalLaw::ParetoLog { xm, .. } => {
                if x <= xm {
                    return Ok(x);
                }
                if x.is_infinite() && self.tail_index().is_some_and(|a| a <= 1.0) {
                    return Ok(f64::INFINITY);
                }
                // s = xm e^y turns the power tail into an exponential one.
                let tail = |y: f64| {
                    let s = xm * y.exp();
                    match self.survival(s) {
                        0.0 => 0.0,
                        v => v * s,
                    }
                };
                let est = if x.is_infinite() {
                    quad::gauss_kronrod_semi_infinite(tail, 0.0, MEAN_TOL)?
                } else {
                    quad::gauss_kronrod(tail, 0.0, (x / xm).ln(), MEAN_TOL)?
                };
                Ok(xm + est.value)
            }
        }
    }
}

/// Solves `ln S(t) = ln u` in `y = ln t` by bisection down to a narrow bracket,
/// then safeguarded Newton.
fn paretolog_quantile(alpha: f64, xm: f64, beta: f64, u: f64) -> Result<f64> {
    if u == 1.0 {
        return Ok(xm);
    }
    let lxm = xm.ln();
    let llxm = lxm.ln();
    let target = u.ln();
    // g(y) = ln S(e^y) - ln u is decreasing on y >= ln xm.
    let g = |y: f64| alpha * (lxm - y) + beta * (y.ln() - llxm) - target;
    let dg = |y: f64| -alpha + beta / y;

    let mut lo = lxm;
    let mut hi = lxm + (-target / alpha).max(1.0);
    let mut expansions = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi = lxm + 2.0 * (hi - lxm);
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::RootFinding(u));
        }
    }

    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut y = 0.5 * (lo + hi);
    for _ in 0..100 {
        let gy = g(y);
        if gy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let slope = dg(y);
        let mut next = if slope < 0.0 {
            y - gy / slope
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - y).abs();
        y = next;
        // Relative accuracy of t = e^y equals the absolute accuracy of y.
        if step <= QUANTILE_REL_TOL * 1e-1 || hi - lo <= QUANTILE_REL_TOL * 1e-1 {
            return Ok(y.exp());
        }
    }
    Err(Error::RootFinding(u))
}

impl fmt::Display for InterArrivalLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InterArrivalLaw::Pareto { alpha, xm } => write!(f, "pareto({alpha},{xm})"),
            InterArrivalLaw::ParetoLog { alpha, xm, beta } => {
                write!(f, "paretolog({alpha},{xm},{beta})")
            }
            InterArrivalLaw::Exponential { rate } => write!(f, "exp({rate})"),
        }
    }
}

impl FromStr for InterArrivalLaw {
    type Err = Error;

    /// Parses `pareto(alpha,xm)`, `paretolog(alpha,xm,beta)` or `exp(rate)`.
    /// Numbers use Rust's correctly rounded decimal conversion.
    fn from_str(s: &str) -> Result<Self> {
        let syntax = || Error::LawSyntax(s.to_string());
        let trimmed = s.trim();
        let open = trimmed.find('(').ok_or_else(syntax)?;
        let inner = trimmed[open + 1..].strip_suffix(')').ok_or_else(syntax)?;
        let name = trimmed[..open].trim().to_ascii_lowercase();
        let args = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| syntax()))
            .collect::<Result<Vec<f64>>>()?;
        match (name.as_str(), args.as_slice()) {
            ("pareto", &[alpha, xm]) => Self::pareto(alpha, xm),
            ("paretolog", &[alpha, xm, beta]) => Self::pareto_log(alpha, xm, beta),
            ("exp", &[rate]) => Self::exponential(rate),
            _ => Err(syntax()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p05() -> InterArrivalLaw {
        InterArrivalLaw::pareto(0.5, 1.0).unwrap()
    }

    #[test]
    fn survival_examples() {
        assert_eq!(p05().survival(4.0), 0.5);
        assert_eq!(p05().survival(0.5), 1.0);
        assert_eq!(p05().survival(0.0), 1.0);
        let e = InterArrivalLaw::exponential(1.0).unwrap();
        assert!((e.survival(2f64.ln()) - 0.5).abs() < 1e-15);
        assert_eq!(e.survival(0.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(p05().quantile_survival(0.25).unwrap(), 16.0);
        let e = InterArrivalLaw::exponential(1.0).unwrap();
        assert_eq!(e.quantile_survival(1.0).unwrap(), 0.0);
        assert!(p05().quantile_survival(0.0).is_err());
        assert!(p05().quantile_survival(1.5).is_err());
    }

    #[test]
    fn paretolog_round_trip_at_nine() {
        for beta in [0.5, -1.0, 0.2] {
            let law = InterArrivalLaw::pareto_log(0.5, 3.0, beta).unwrap();
            let t = law.quantile_survival(law.survival(9.0)).unwrap();
            assert!((t / 9.0 - 1.0).abs() < 1e-10, "beta {beta}: {t}");
        }
    }

    #[test]
    fn paretolog_rejects_negative_density() {
        // alpha ln 3 = 0.549 < 1: the survival would exceed 1 just above xm.
        assert!(InterArrivalLaw::pareto_log(0.5, 3.0, 1.0).is_err());
        assert!(InterArrivalLaw::pareto_log(0.5, 2.0, 0.0).is_err());
        assert!(InterArrivalLaw::pareto_log(0.5, 3.0, 0.54).is_ok());
    }

    #[test]
    fn means() {
        assert_eq!(
            InterArrivalLaw::exponential(2.0).unwrap().mean().unwrap(),
            Mean::Finite(0.5)
        );
        assert_eq!(p05().mean().unwrap(), Mean::Infinite);
        assert_eq!(
            InterArrivalLaw::pareto(2.0, 1.0).unwrap().mean().unwrap(),
            Mean::Finite(2.0)
        );
        assert_eq!(
            InterArrivalLaw::pareto(1.0, 1.0).unwrap().mean().unwrap(),
            Mean::Infinite
        );
        assert_eq!(
            InterArrivalLaw::pareto_log(0.7, 5.0, 0.3)
                .unwrap()
                .mean()
                .unwrap(),
            Mean::Infinite
        );
    }

    #[test]
    fn paretolog_mean_reduces_to_pareto_at_beta_zero() {
        let law = InterArrivalLaw::pareto_log(2.5, 4.0, 0.0).unwrap();
        let m = law.mean().unwrap().finite().unwrap();
        let exact = 2.5 * 4.0 / 1.5;
        assert!((m / exact - 1.0).abs() < 1e-10, "{m} vs {exact}");
    }

    #[test]
    fn paretolog_mean_matches_independent_log_integral() {
        // E X = xm + xm * int_0^inf e^{-(a-1) y} (1 + y / ln xm)^b dy, evaluated here
        // with a plain composite Simpson rule on a truncated range.
        let (a, xm, b) = (2.0, 5.0, -0.7);
        let law = InterArrivalLaw::pareto_log(a, xm, b).unwrap();
        let m = law.mean().unwrap().finite().unwrap();
        let f = |y: f64| (-(a - 1.0) * y).exp() * (1.0 + y / xm.ln()).powf(b);
        let (upper, steps) = (60.0, 600_000);
        let h = upper / steps as f64;
        let mut s = f(0.0) + f(upper);
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let oracle = xm + xm * s * h / 3.0;
        assert!((m / oracle - 1.0).abs() < 1e-10, "{m} vs {oracle}");
    }

    #[test]
    fn integrated_survival_exponential() {
        let e = InterArrivalLaw::exponential(0.5).unwrap();
        let v = e.integrated_survival(3.0).unwrap();
        assert!((v - 2.0 * (1.0 - (-1.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sample_by_forced_uniform() {
        assert_eq!(p05().sample_from_uniform(0.25), 16.0);
    }

    #[test]
    fn pareto_tail_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let above = (0..n).filter(|_| p05().sample(&mut rng) > 4.0).count();
        let frac = above as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "{frac}");
    }

    #[test]
    fn exponential_sample_mean() {
        let e = InterArrivalLaw::exponential(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mean = (0..n).map(|_| e.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() <= 0.01, "{mean}");
    }

    #[test]
    fn parse_and_display() {
        let law: InterArrivalLaw = "pareto(0.5,1)".parse().unwrap();
        assert_eq!(law, p05());
        let law: InterArrivalLaw = " paretolog(0.5, 3, -1.25) ".parse().unwrap();
        assert_eq!(
            law,
            InterArrivalLaw::ParetoLog {
                alpha: 0.5,
                xm: 3.0,
                beta: -1.25
            }
        );
        assert_eq!(law.to_string(), "paretolog(0.5,3,-1.25)");
        assert_eq!(
            "exp(0.1)".parse::<InterArrivalLaw>().unwrap().to_string(),
            "exp(0.1)"
        );
        // 0.1 must parse to the correctly rounded double.
        assert_eq!(
            "exp(0.1)".parse::<InterArrivalLaw>().unwrap(),
            InterArrivalLaw::Exponential { rate: 0.1 }
        );
        for bad in [
            "pareto(0.5)",
            "gamma(1,2)",
            "exp(-1)",
            "exp 1",
            "pareto(a,1)",
            "exp(1))",
        ] {
            assert!(bad.parse::<InterArrivalLaw>().is_err(), "{bad}");
        }
    }

    #[test]
    fn tail_index_recovery_pareto_exact() {
        let law = InterArrivalLaw::pareto(0.7, 1.0).unwrap();
        let (t1, t2) = (1e6, 1e9);
        let slope = (law.survival(t2).ln() - law.survival(t1).ln()) / (t2.ln() - t1.ln());
        assert!((slope + 0.7).abs() < 1e-12);
    }

    #[test]
    fn tail_index_recovery_paretolog() {
        // Log-log slope over [1e6, 1e9] is -alpha + beta * ln(ln t2 / ln t1) / ln(t2 / t1),
        // i.e. -alpha + 0.0587 beta; |beta| <= 0.15 keeps it within 2% at alpha = 0.5.
        for beta in [0.15, -0.15] {
            let law = InterArrivalLaw::pareto_log(0.5, 3.0, beta).unwrap();
            let (t1, t2) = (1e6, 1e9);
            let slope = (law.survival(t2).ln() - law.survival(t1).ln()) / (t2.ln() - t1.ln());
            assert!(
                (slope / -0.5 - 1.0).abs() < 0.02,
                "beta {beta}: slope {slope}"
            );
        }
    }
}
