//! Empirical CDFs, Kolmogorov–Smirnov distances and DKW bands.

use crate::error::{Error, Result};

/// A cumulative distribution function that can be evaluated pointwise.
pub trait Cdf {
    /// `P(X <= x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(X < x)`; equal to [`Cdf::cdf`] for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Empirical distribution of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(pos) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(pos));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Exact sup-distance to `cdf`.
    pub fn ks_distance<C: Cdf + ?Sized>(&self, cdf: &C) -> f64 {
        ks_distance(self, cdf)
    }
}

impl Cdf for Ecdf {
    fn cdf(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v < x) as f64 / self.len() as f64
    }
}

/// Builds the empirical CDF of `sample`.
pub fn ecdf(sample: &[f64]) -> Result<Ecdf> {
    Ecdf::new(sample)
}

/// `sup_x |F_n(x) - G(x)|`, evaluated exactly as
/// `max_i max(i/n - G(x_i), G(x_i-) - (i-1)/n)` over the sorted sample.
pub fn ks_distance<C: Cdf + ?Sized>(e: &Ecdf, cdf: &C) -> f64 {
    let n = e.len() as f64;
    e.sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - cdf.cdf(x);
            let below = cdf.cdf_left(x) - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// Dvoretzky–Kiefer–Wolfowitz half-width: `P(D_n > eps) <= delta` for
/// `eps = sqrt(ln(2 / delta) / (2 n))`.
pub fn dkw_epsilon(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}
