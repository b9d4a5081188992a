//! Limit laws of the age/cycle ratio and the constants behind them.
//!
//! For tail index `alpha` in `(0, 1)`:
//!
//! * `A(t)/C(t)` converges to `U^(1/alpha)`, whose CDF is `x^alpha` on `[0, 1]`;
//! * `A(t)/t` converges to the generalized arcsine law `Beta(1 - alpha, alpha)`;
//! * `u(t) F̄(t) -> c*` with `c* = sin(pi alpha) / (pi alpha)`, which is the value
//!   that makes `c* alpha B(alpha, 1 - alpha) = 1`.
//!
//! In the finite-mean case the ratio is uniform and the cycle is size-biased.

use std::f64::consts::PI;

use crate::dist::{InterArrivalLaw, Mean};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::stats::Cdf;

const BETA_TOL: Tolerance = Tolerance::relative(1e-14);
const SIZE_BIASED_TOL: Tolerance = Tolerance::relative(1e-12);
const DL_OUTER_TOL: Tolerance = Tolerance {
    abs: 1e-10,
    rel: 1e-9,
};
const DL_INNER_TOL: Tolerance = Tolerance::relative(1e-11);

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "alpha outside (0,1)",
        })
    }
}

/// `P(U^(1/alpha) <= x) = clamp(x, 0, 1)^alpha`.
pub fn ratio_limit_cdf(alpha: f64, x: f64) -> f64 {
    x.clamp(0.0, 1.0).powf(alpha)
}

/// `int_0^x r^(p-1) (1-r)^(q-1) dr` for `p, q` in `(0, 1]` and `x <= 1/2`.
///
/// The substitution `s = r^p` absorbs the endpoint singularity:
/// the integral becomes `(1/p) int_0^{x^p} (1 - s^(1/p))^(q-1) ds` with a bounded
/// integrand.
fn beta_head(p: f64, q: f64, x: f64) -> Result<f64> {
    debug_assert!(x <= 0.5);
    if x <= 0.0 {
        return Ok(0.0);
    }
    let inv_p = 1.0 / p;
    let est = quad::gauss_kronrod(
        |s| ((q - 1.0) * (-s.powf(inv_p)).ln_1p()).exp(),
        0.0,
        x.powf(p),
        BETA_TOL,
    )?;
    Ok(est.value / p)
}

/// `int_0^1 (1-r)^(-alpha) r^(alpha-1) dr = B(alpha, 1 - alpha)`, by quadrature.
///
/// Analytically `pi / sin(pi alpha)`.
pub fn beta_integral(alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    // [0, 1/2] directly; [1/2, 1] after reflecting r -> 1 - r.
    let left = beta_head(alpha, 1.0 - alpha, 0.5)?;
    let right = beta_head(1.0 - alpha, alpha, 0.5)?;
    Ok(left + right)
}

/// The constant `c*` in `u(t) ~ c* / F̄(t)`: `1 / (alpha B(alpha, 1 - alpha))`.
pub fn erickson_constant(alpha: f64) -> Result<f64> {
    Ok(1.0 / (alpha * beta_integral(alpha)?))
}

/// Closed form of [`erickson_constant`], `sin(pi alpha) / (pi alpha)`.
pub fn erickson_constant_closed_form(alpha: f64) -> f64 {
    (PI * alpha).sin() / (PI * alpha)
}

/// Density of the `Beta(1 - alpha, alpha)` age limit `A(t)/t`.
pub fn dl_age_density(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    (PI * alpha).sin() / PI * x.powf(-alpha) * (1.0 - x).powf(alpha - 1.0)
}

/// CDF of the generalized arcsine law `Beta(1 - alpha, alpha)`, the limit of `A(t)/t`.
pub fn dl_age_cdf(alpha: f64, x: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "age fraction must lie in [0, 1]",
        });
    }
    let norm = (PI * alpha).sin() / PI;
    let value = if x <= 0.5 {
        norm * beta_head(1.0 - alpha, alpha, x)?
    } else {
        1.0 - norm * beta_head(alpha, 1.0 - alpha, 1.0 - x)?
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Joint limit density of `(A(t), B(t)) / t`:
/// `g(u, v) = (alpha sin(pi alpha) / pi) (1-u)^(alpha-1) (u+v)^(-alpha-1)` on
/// `(0, 1) x (0, inf)`.
pub fn dl_joint_density(alpha: f64, u: f64, v: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 || v <= 0.0 {
        return 0.0;
    }
    dl_joint_constant(alpha) * (1.0 - u).powf(alpha - 1.0) * (u + v).powf(-alpha - 1.0)
}

fn dl_joint_constant(alpha: f64) -> f64 {
    alpha * (PI * alpha).sin() / PI
}

/// `int_{v0}^inf (u + v)^(-alpha-1) dv` by tanh-sinh after `v = v0 + tau / (1 - tau)`.
///
/// With `c = 1 - tau` the transformed integrand is `c^(alpha-1) (c (u+v0) + tau)^(-alpha-1)`,
/// which keeps the endpoint singularity at `tau = 1` in closed form.
fn dl_residual_tail(alpha: f64, u: f64, v0: f64) -> Result<f64> {
    let w0 = u + v0;
    let est = quad::tanh_sinh(
        |_, tau, c| c.powf(alpha - 1.0) * (c * w0 + tau).powf(-alpha - 1.0),
        0.0,
        1.0,
        DL_INNER_TOL,
    )?;
    Ok(est.value)
}

/// `int_0^inf g(u, v) dv` computed numerically; should equal [`dl_age_density`].
pub fn dl_age_marginal(alpha: f64, u: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if u <= 0.0 || u >= 1.0 {
        return Ok(0.0);
    }
    Ok(dl_joint_constant(alpha) * (1.0 - u).powf(alpha - 1.0) * dl_residual_tail(alpha, u, 0.0)?)
}

/// `P(A/(A+B) <= x)` under the joint density [`dl_joint_density`], by nested
/// quadrature over `{(u, v) : u / (u + v) <= x}`, i.e. `v >= u (1 - x) / x`.
///
/// The outer integral over `u` is split at 1/2. On `[0, 1/2]` the substitution
/// `s = u^(1-alpha)` cancels the `u^(-alpha)` growth of the inner integral; on
/// `[1/2, 1]` the substitution `s = (1-u)^alpha` cancels `(1-u)^(alpha-1)`. Both
/// halves are then smooth and handled by adaptive Gauss–Kronrod; the inner
/// semi-infinite integral uses tanh-sinh.
///
/// Should reproduce `x^alpha`.
pub fn ratio_cdf_from_dl(alpha: f64, x: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "ratio level must lie strictly inside (0, 1)",
        });
    }
    let k = dl_joint_constant(alpha);
    let slope = (1.0 - x) / x;
    let mut failure = None;
    let mut inner = |u: f64| match dl_residual_tail(alpha, u, u * slope) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };

    // u in (0, 1/2]: u = s^(1/(1-alpha)), du = u^alpha ds / (1-alpha).
    let near_zero = quad::gauss_kronrod(
        |s| {
            let u = s.powf(1.0 / (1.0 - alpha));
            k * (1.0 - u).powf(alpha - 1.0) * inner(u) * u.powf(alpha) / (1.0 - alpha)
        },
        0.0,
        0.5f64.powf(1.0 - alpha),
        DL_OUTER_TOL,
    );
    // w = 1 - u in (0, 1/2]: w = s^(1/alpha), w^(alpha-1) dw = ds / alpha.
    let near_one = quad::gauss_kronrod(
        |s| {
            let w = s.powf(1.0 / alpha);
            k * inner(1.0 - w) / alpha
        },
        0.0,
        0.5f64.powf(alpha),
        DL_OUTER_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((near_zero?.value + near_one?.value).clamp(0.0, 1.0))
}

/// Limit law of the cycle straddling `t` when `E X < inf`:
/// `P(C <= x) = E[X; X <= x] / E X`.
pub fn sizebiased_cycle_cdf(law: &InterArrivalLaw, x: f64) -> Result<f64> {
    let mean = match law.mean()? {
        Mean::Finite(m) => m,
        Mean::Infinite => return Err(Error::InfiniteMean(law.to_string())),
    };
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let value = match *law {
        InterArrivalLaw::Exponential { rate } => {
            let lx = rate * x;
            -(-lx).exp_m1() - lx * (-lx).exp()
        }
        _ => {
            // int_xm^x s f(s) ds with s = xm e^y.
            let xm = law.support_start();
            if x <= xm {
                return Ok(0.0);
            }
            let est = quad::gauss_kronrod(
                |y| {
                    let s = xm * y.exp();
                    s * s * law.density(s)
                },
                0.0,
                (x / xm).ln(),
                SIZE_BIASED_TOL,
            )?;
            est.value / mean
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Named limit distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitLaw {
    /// `U^(1/alpha)`: CDF `x^alpha` on `[0, 1]`.
    RatioPower { alpha: f64 },
    /// `U(0, 1)`.
    Uniform01,
    /// `Beta(1 - alpha, alpha)`, the age limit `A(t)/t`.
    DlAge { alpha: f64 },
    /// Size-biased version of a finite-mean inter-arrival law.
    SizeBiasedCycle { base: InterArrivalLaw },
}

impl LimitLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            LimitLaw::RatioPower { alpha } | LimitLaw::DlAge { alpha } => check_open_alpha(*alpha),
            LimitLaw::Uniform01 => Ok(()),
            LimitLaw::SizeBiasedCycle { base } => match base.mean()? {
                Mean::Finite(_) => Ok(()),
                Mean::Infinite => Err(Error::InfiniteMean(base.to_string())),
            },
        }
    }
}

impl Cdf for LimitLaw {
    /// Panics if the law fails [`LimitLaw::validate`].
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::RatioPower { alpha } => ratio_limit_cdf(alpha, x),
            LimitLaw::Uniform01 => x.clamp(0.0, 1.0),
            LimitLaw::DlAge { alpha } => {
                dl_age_cdf(alpha, x.clamp(0.0, 1.0)).expect("validated DL age law")
            }
            LimitLaw::SizeBiasedCycle { base } => {
                sizebiased_cycle_cdf(&base, x).expect("validated size-biased law")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_limit_examples() {
        assert_eq!(ratio_limit_cdf(0.5, 0.25), 0.5);
        assert_eq!(ratio_limit_cdf(0.3, 1.0), 1.0);
        assert_eq!(ratio_limit_cdf(0.3, 2.0), 1.0);
        assert_eq!(ratio_limit_cdf(0.3, -1.0), 0.0);
        assert!((ratio_limit_cdf(0.3, 0.5) - 0.812_252).abs() < 1e-6);
    }

    #[test]
    fn ratio_limit_is_a_cdf() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
            let values: Vec<f64> = grid.iter().map(|&x| ratio_limit_cdf(alpha, x)).collect();
            assert_eq!(values[0], 0.0);
            assert_eq!(values[1000], 1.0);
            assert!(values.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn beta_integral_against_reflection() {
        assert!((beta_integral(0.5).unwrap() - PI).abs() < 1e-12);
        let b = beta_integral(0.3).unwrap();
        assert!((b - 3.883_3).abs() < 1e-4, "{b}");
        for i in 1..20 {
            let alpha = i as f64 * 0.05;
            let b = beta_integral(alpha).unwrap();
            let exact = PI / (PI * alpha).sin();
            assert!(
                (b / exact - 1.0).abs() < 1e-10,
                "alpha {alpha}: {b} vs {exact}"
            );
        }
    }

    #[test]
    fn beta_integral_rejects_endpoints() {
        for alpha in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(beta_integral(alpha).is_err());
            assert!(erickson_constant(alpha).is_err());
        }
    }

    #[test]
    fn erickson_values_and_identity() {
        assert!((erickson_constant(0.5).unwrap() - 2.0 / PI).abs() < 1e-12);
        assert!((erickson_constant(0.3).unwrap() - 0.858_4).abs() < 1e-4);
        for i in 1..20 {
            let alpha = i as f64 * 0.05;
            let product = erickson_constant(alpha).unwrap() * alpha * beta_integral(alpha).unwrap();
            assert!((product - 1.0).abs() <= 1e-12);
            let closed = erickson_constant_closed_form(alpha);
            assert!((erickson_constant(alpha).unwrap() / closed - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dl_age_examples() {
        assert!((dl_age_cdf(0.5, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(dl_age_cdf(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(dl_age_cdf(0.3, 1.0).unwrap(), 1.0);
        let arcsine = 2.0 / PI * 0.25f64.sqrt().asin();
        assert!((dl_age_cdf(0.5, 0.25).unwrap() - arcsine).abs() < 1e-12);
        assert!((arcsine - 1.0 / 3.0).abs() < 1e-12);
        assert!(dl_age_cdf(0.5, 1.2).is_err());
        assert!(dl_age_cdf(1.0, 0.2).is_err());
    }

    #[test]
    fn dl_age_cdf_matches_regularized_incomplete_beta() {
        use statrs::function::beta::beta_reg;
        for &alpha in &[0.1, 0.3, 0.5, 0.7, 0.95] {
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let ours = dl_age_cdf(alpha, x).unwrap();
                let oracle = beta_reg(1.0 - alpha, alpha, x);
                assert!(
                    (ours - oracle).abs() < 1e-10,
                    "alpha {alpha} x {x}: {ours} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn dl_marginal_reproduces_age_density() {
        for &alpha in &[0.3, 0.5, 0.7] {
            for &u in &[1e-6, 0.01, 0.2, 0.5, 0.8, 0.999] {
                let numeric = dl_age_marginal(alpha, u).unwrap();
                let exact = dl_age_density(alpha, u);
                assert!(
                    (numeric / exact - 1.0).abs() < 1e-8,
                    "alpha {alpha} u {u}: {numeric} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn ratio_from_dl_examples() {
        assert!((ratio_cdf_from_dl(0.5, 0.25).unwrap() - 0.5).abs() <= 1e-4);
        let v = ratio_cdf_from_dl(0.7, 0.5).unwrap();
        assert!((v - 0.5f64.powf(0.7)).abs() <= 1e-4);
        assert!((v - 0.615_6).abs() < 1e-4);
        assert!(ratio_cdf_from_dl(0.5, 0.0).is_err());
        assert!(ratio_cdf_from_dl(0.5, 1.0).is_err());
    }

    #[test]
    fn sizebiased_exponential() {
        let e = InterArrivalLaw::exponential(1.0).unwrap();
        assert_eq!(sizebiased_cycle_cdf(&e, f64::INFINITY).unwrap(), 1.0);
        assert!((sizebiased_cycle_cdf(&e, 60.0).unwrap() - 1.0).abs() < 1e-15);
        let v = sizebiased_cycle_cdf(&e, 1.0).unwrap();
        assert!((v - (1.0 - 2.0 * (-1f64).exp())).abs() < 1e-15);
        assert!((v - 0.264_24).abs() < 1e-5);
    }

    #[test]
    fn sizebiased_pareto_against_closed_form() {
        // For Pareto(a, xm), a > 1: E[X; X <= x] / E X = 1 - (xm / x)^(a - 1).
        let law = InterArrivalLaw::pareto(2.5, 2.0).unwrap();
        assert_eq!(sizebiased_cycle_cdf(&law, 1.0).unwrap(), 0.0);
        for &x in &[2.5, 4.0, 10.0, 1e3, 1e6] {
            let ours = sizebiased_cycle_cdf(&law, x).unwrap();
            let exact = 1.0 - (2.0f64 / x).powf(1.5);
            assert!(
                (ours / exact - 1.0).abs() < 1e-10,
                "x {x}: {ours} vs {exact}"
            );
        }
    }

    #[test]
    fn sizebiased_rejects_infinite_mean() {
        let law = InterArrivalLaw::pareto(0.5, 1.0).unwrap();
        assert!(matches!(
            sizebiased_cycle_cdf(&law, 3.0),
            Err(Error::InfiniteMean(_))
        ));
        assert!(LimitLaw::SizeBiasedCycle { base: law }.validate().is_err());
    }

    #[test]
    fn limit_laws_are_cdfs() {
        let laws = [
            LimitLaw::RatioPower { alpha: 0.4 },
            LimitLaw::Uniform01,
            LimitLaw::DlAge { alpha: 0.4 },
            LimitLaw::SizeBiasedCycle {
                base: InterArrivalLaw::exponential(2.0).unwrap(),
            },
        ];
        for law in laws {
            law.validate().unwrap();
            let (lo, hi) = match law {
                LimitLaw::SizeBiasedCycle { .. } => (0.0, 40.0),
                _ => (0.0, 1.0),
            };
            let values: Vec<f64> = (0..=200)
                .map(|i| law.cdf(lo + (hi - lo) * i as f64 / 200.0))
                .collect();
            assert_eq!(values[0], 0.0, "{law:?}");
            assert!((values[200] - 1.0).abs() < 1e-12, "{law:?}");
            assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-15), "{law:?}");
        }
    }
}
