//! One-dimensional quadrature.
//!
//! Two rules are provided:
//!
//! * [`gauss_kronrod`]: globally adaptive 7/15-point Gauss–Kronrod bisection for
//!   integrands that are smooth, or at worst have weak derivative singularities.
//! * [`tanh_sinh`]: double-exponential quadrature for integrands with integrable
//!   algebraic singularities at one or both endpoints. The integrand receives the
//!   abscissa together with its exact distances to both endpoints, so factors such
//!   as `(1 - u)^(a - 1)` can be evaluated without cancellation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Absolute/relative tolerance pair; the goal is `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    pub const fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

// Tabulated to more digits than f64 holds.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 20_000;

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Interval {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Interval {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let first = kronrod15(&mut f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    loop {
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        if error <= tol.target(value) {
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one interval");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in double precision.
            heap.push(worst);
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift accumulated by incremental updates.
    let mut parts: Vec<Interval> = heap.into_vec();
    parts.sort_by(|l, r| l.a.total_cmp(&r.a));
    let value = parts.iter().map(|p| p.value).sum();
    let error = parts.iter().map(|p| p.error).sum();
    Ok(Estimate { value, error })
}

/// Integrates `f` over `[a, inf)` via the map `x = a + s / (1 - s)`, `s` in `[0, 1)`.
pub fn gauss_kronrod_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    gauss_kronrod(
        |s| {
            let c = 1.0 - s;
            let fx = f(a + s / c);
            if fx == 0.0 {
                0.0
            } else {
                fx / (c * c)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

const TS_MAX_T: f64 = 6.2;
const TS_MAX_LEVEL: u32 = 14;
const TS_MIN_LEVEL: u32 = 4;

/// Tanh-sinh quadrature over `[a, b]`.
///
/// The integrand is called as `f(x, x - a, b - x)` where the two distances are
/// computed directly from the transformation, not by subtraction, so they stay
/// accurate down to the smallest normal doubles. Nodes whose distance underflows
/// to zero are skipped.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    let width = b - a;
    if width == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }

    // Contribution of the symmetric node pair at +t and -t (or the center when t = 0).
    let mut pair = |t: f64| -> f64 {
        let z = FRAC_PI_2 * t.sinh();
        let q = (-2.0 * z).exp();
        if q == 0.0 {
            return 0.0;
        }
        let onepq = 1.0 + q;
        let weight = 0.5 * width * FRAC_PI_2 * t.cosh() * 4.0 * q / (onepq * onepq);
        if t == 0.0 {
            let half = 0.5 * width;
            return weight * f(a + half, half, half);
        }
        let d = width * q / onepq;
        let far = width / onepq;
        let mut sum = 0.0;
        if d > 0.0 {
            sum += f(a + d, d, far);
            sum += f(b - d, far, d);
        }
        weight * sum
    };

    let mut h = 1.0;
    let mut raw = pair(0.0);
    let mut k = 1.0;
    while k <= TS_MAX_T {
        raw += pair(k);
        k += 1.0;
    }
    let mut value = raw * h;
    let mut error = f64::INFINITY;

    for level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        let mut added = 0.0;
        while t <= TS_MAX_T {
            added += pair(t);
            t += 2.0 * h;
        }
        raw += added;
        let next = raw * h;
        if !next.is_finite() {
            return Err(Error::Quadrature {
                estimate: next,
                error: f64::INFINITY,
            });
        }
        error = (next - value).abs();
        value = next;
        if level >= TS_MIN_LEVEL && error <= tol.target(value) {
            return Ok(Estimate { value, error });
        }
    }
    Err(Error::Quadrature {
        estimate: value,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let est = gauss_kronrod(|x| 3.0 * x * x, 0.0, 2.0, Tolerance::relative(1e-14)).unwrap();
        assert!((est.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn gk_oscillatory() {
        let est = gauss_kronrod(f64::sin, 0.0, 50.0, Tolerance::absolute(1e-12)).unwrap();
        assert!((est.value - (1.0 - 50f64.cos())).abs() < 1e-11);
    }

    #[test]
    fn gk_weak_singularity_by_bisection() {
        // sqrt(x) has an unbounded derivative at 0.
        let est = gauss_kronrod(f64::sqrt, 0.0, 1.0, Tolerance::relative(1e-13)).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gk_semi_infinite_exponential() {
        let est =
            gauss_kronrod_semi_infinite(|x| (-x).exp(), 1.0, Tolerance::relative(1e-13)).unwrap();
        assert!((est.value - (-1f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn gk_reports_non_convergence() {
        let res = gauss_kronrod(|x| 1.0 / x, 0.0, 1.0, Tolerance::relative(1e-12));
        assert!(matches!(res, Err(Error::Quadrature { .. })), "{res:?}");
    }

    #[test]
    fn tanh_sinh_both_endpoint_singularities() {
        // B(0.3, 0.4) = Gamma(0.3) Gamma(0.4) / Gamma(0.7)
        let expected = 5.112_091_244_457_351;
        let est = tanh_sinh(
            |_, da, db| da.powf(-0.7) * db.powf(-0.6),
            0.0,
            1.0,
            Tolerance::relative(1e-12),
        )
        .unwrap();
        assert!(
            (est.value / expected - 1.0).abs() < 1e-11,
            "{} vs {}",
            est.value,
            expected
        );
    }

    #[test]
    fn tanh_sinh_smooth() {
        let est = tanh_sinh(|x, _, _| x.exp(), -1.0, 2.0, Tolerance::relative(1e-14)).unwrap();
        let expected = 2f64.exp() - (-1f64).exp();
        assert!((est.value - expected).abs() < 1e-13);
    }
}
