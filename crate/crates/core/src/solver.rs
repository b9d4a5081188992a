//! Grid solvers for renewal-type equations `z = f + F * z`.
//!
//! # Discretization
//!
//! On the grid `t_i = i h` with exact law increments `dF_j = F(jh) - F((j-1)h)`:
//!
//! ```text
//! z_0 = f_0
//! z_1 = f_1 + dF_1 z_0
//! z_i = f_i + sum_{j=1}^{i-1} dF_j (z_{i-j} + z_{i-j+1}) / 2 + dF_i z_0      (i >= 2)
//! ```
//!
//! Each increment is paired with the trapezoid (midpoint) value of `z` over the
//! cell it maps to, except the last cell `j = i`, which uses `z_0`. The `j = 1`
//! term contains `z_i` itself with weight `dF_1 / 2`; it is moved to the left-hand
//! side, so each step divides by `1 - dF_1 / 2`. For the Pareto laws with
//! `h < xm` that weight is zero and the recursion is fully explicit.
//!
//! Collecting coefficients, the convolution at step `i >= 2` is
//!
//! ```text
//! sum_{k=2}^{i-1} W_{i-k} z_k + dF_i z_0 + dF_{i-1}/2 z_1 + dF_1/2 z_i,
//! W_m = (dF_m + dF_{m+1}) / 2.
//! ```
//!
//! The first sum is accumulated in a fixed order: chunks of [`CHUNK`] indices
//! aligned to multiples of `CHUNK`, each reduced by [`dot`], chunk partials added
//! in ascending order. [`solve_renewal`] and [`residual`] share this order, so the
//! residual of a solver output is pure rounding of the last few operations.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::dist::InterArrivalLaw;
use crate::error::{Error, Result};

/// Largest supported grid (points).
pub const MAX_POINTS: usize = 10_000_001;

/// Chunk length of the canonical summation order.
pub const CHUNK: usize = 512;

/// Values of a function at `t_i = i h`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    step: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        check_step(step)?;
        if values.is_empty() {
            return Err(Error::GridMismatch(
                "grid function needs at least one point".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteForcing {
                index: i,
                value: values[i],
            });
        }
        Ok(GridFunction { step, values })
    }

    /// Evaluates `f` on `n` grid points.
    pub fn sample<F: Fn(f64) -> f64>(step: f64, n: usize, f: F) -> Result<Self> {
        check_step(step)?;
        let values = (0..n).map(|i| f(i as f64 * step)).collect();
        GridFunction::new(step, values)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.t(self.len() - 1)
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> f64 {
        self.values[self.len() - 1]
    }

    /// Value at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let i = (t / self.step).round().clamp(0.0, (self.len() - 1) as f64) as usize;
        self.values[i]
    }

    /// `max_i |self_i - other_i|` over the common prefix.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `t,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.t(i), v)?;
        }
        Ok(())
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "h",
            value: step,
            reason: "grid step must be positive and finite",
        })
    }
}

/// `b(t) = F̄(t) - F̄(t/x)`, the probability that the first renewal falls in
/// `(t, t/x]`: the forcing term of the equation for `P(A(t)/C(t) > x)`.
pub fn b_function(law: &InterArrivalLaw, x: f64, t: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "ratio level must lie in (0, 1); P(V > x) = 0 for x >= 1",
        });
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "time must be non-negative",
        });
    }
    Ok((law.survival(t) - law.survival(t / x)).max(0.0))
}

/// Closure form of [`b_function`] with `x` validated once.
pub fn ratio_tail_forcing(law: InterArrivalLaw, x: f64) -> Result<impl Fn(f64) -> f64> {
    b_function(&law, x, 0.0)?;
    Ok(move |t: f64| (law.survival(t) - law.survival(t / x)).max(0.0))
}

/// Number of grid points for horizon `T` and step `h`: `round(T / h) + 1`.
pub fn grid_points(horizon: f64, step: f64) -> Result<usize> {
    check_step(step)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "T",
            value: horizon,
            reason: "horizon must be positive and finite",
        });
    }
    let cells = (horizon / step).round();
    if cells < 1.0 || cells + 1.0 > MAX_POINTS as f64 {
        return Err(Error::InvalidParameter {
            name: "T/h",
            value: horizon / step,
            reason: "grid must have between 1 and 1e7 cells",
        });
    }
    Ok(cells as usize + 1)
}

/// Law increments and convolution weights for one grid.
struct Kernel {
    /// `dF[j]` for `j = 0..=n` (`dF[0] = 0`).
    df: Vec<f64>,
    /// `rev[n - m] = W_m`.
    rev: Vec<f64>,
    n: usize,
    dot: DotFn,
    batch: DotBatch,
}

impl Kernel {
    fn new(law: &InterArrivalLaw, step: f64, n: usize) -> Result<Self> {
        law.validate()?;
        if law.survival(step) == 0.0 {
            return Err(Error::InvalidParameter {
                name: "h",
                value: step,
                reason: "F(h) = 1: step too coarse for this law",
            });
        }
        let survival: Vec<f64> = (0..=n).map(|j| law.survival(j as f64 * step)).collect();
        let mut df = vec![0.0; n + 1];
        for j in 1..=n {
            df[j] = survival[j - 1] - survival[j];
        }
        let mut rev = vec![0.0; n + 1];
        for m in 1..n {
            rev[n - m] = 0.5 * (df[m] + df[m + 1]);
        }
        Ok(Kernel {
            df,
            rev,
            n,
            dot: select_dot(),
            batch: select_batch(),
        })
    }

    /// `sum_{k in [k0, k1)} W_{i-k} z_k` in the canonical lane order.
    #[inline]
    fn partial(&self, z: &[f64], i: usize, k0: usize, k1: usize) -> f64 {
        let base = self.n - i;
        (self.dot)(&self.rev[base + k0..base + k1], &z[k0..k1])
    }

    /// Canonical range of chunk `c` for output `i`, or `None` when empty.
    #[inline]
    fn chunk_range(i: usize, c: usize) -> Option<(usize, usize)> {
        let k0 = (c * CHUNK).max(2);
        let k1 = ((c + 1) * CHUNK).min(i);
        (k0 < k1).then_some((k0, k1))
    }

    /// Adds the full-chunk partials `c < chunks` into `acc[i - start]`.
    ///
    /// Every chunk below the open block is complete for all outputs of the block,
    /// so outputs `i..i + 4` share `[k0, k1)` and their weight windows differ by a
    /// one-element shift; [`DotBatch`] evaluates them together.
    fn accumulate_history(&self, z: &[f64], start: usize, acc: &mut [f64], chunks: usize) {
        // Larger groups stream `z` and `rev` fewer times; smaller ones spread
        // the block over more workers. Grouping never changes the sums.
        let width = (CHUNK / rayon::current_num_threads()).clamp(64, CHUNK) / BATCH * BATCH;
        let batch = self.batch;
        acc.par_chunks_mut(width)
            .enumerate()
            .for_each(|(g, group)| {
                let first = start + g * width;
                for c in 0..chunks {
                    let (k0, k1) = Kernel::chunk_range(first, c)
                        .expect("history chunks are complete for every output");
                    let done = group.len() / BATCH * BATCH;
                    let mut quads = group.chunks_exact_mut(BATCH);
                    for (q, slots) in quads.by_ref().enumerate() {
                        let i = first + q * BATCH;
                        let top = self.n - (i + BATCH - 1);
                        let mut out = [0.0; BATCH];
                        batch(
                            &self.rev[top + k0..top + k1 + BATCH - 1],
                            &z[k0..k1],
                            &mut out,
                        );
                        for (slot, v) in slots.iter_mut().zip(out) {
                            *slot += v;
                        }
                    }
                    for (offset, slot) in quads.into_remainder().iter_mut().enumerate() {
                        *slot += self.partial(z, first + done + offset, k0, k1);
                    }
                }
            });
    }

    /// Convolution terms of step `i >= 2` other than the self term `dF_1/2 z_i`.
    #[inline]
    fn known_terms(&self, z: &[f64], i: usize, history: f64) -> f64 {
        let c = i / CHUNK;
        let mut total = history;
        if let Some((k0, k1)) = Kernel::chunk_range(i, c) {
            total += self.partial(z, i, k0, k1);
        }
        total + self.df[i] * z[0] + 0.5 * self.df[i - 1] * z[1]
    }
}

/// Solves `z(t) = forcing(t) + int_0^t z(t - s) F(ds)` on `[0, horizon]`.
pub fn solve_renewal<F: Fn(f64) -> f64>(
    law: &InterArrivalLaw,
    forcing: F,
    horizon: f64,
    step: f64,
) -> Result<GridFunction> {
    let n = grid_points(horizon, step)?;
    let f = forcing_values(&forcing, step, n)?;
    let kernel = Kernel::new(law, step, n)?;

    let mut z = vec![0.0; n];
    z[0] = f[0];
    if n > 1 {
        z[1] = f[1] + kernel.df[1] * z[0];
    }
    let denom = 1.0 - 0.5 * kernel.df[1];
    let mut history = vec![0.0; CHUNK];
    let mut start = 2;
    while start < n {
        let block = start / CHUNK;
        let end = ((block + 1) * CHUNK).min(n);
        let acc = &mut history[..end - start];
        acc.iter_mut().for_each(|a| *a = 0.0);
        kernel.accumulate_history(&z, start, acc, block);
        for i in start..end {
            let s = kernel.known_terms(&z, i, acc[i - start]);
            z[i] = (f[i] + s) / denom;
        }
        start = end;
    }
    GridFunction::new(step, z)
}

/// `max_i |z_i - forcing(t_i) - (F * z)_i|` for the discrete operator of
/// [`solve_renewal`].
pub fn residual<F: Fn(f64) -> f64>(
    law: &InterArrivalLaw,
    forcing: F,
    z: &GridFunction,
) -> Result<f64> {
    let n = z.len();
    let f = forcing_values(&forcing, z.step(), n)?;
    let kernel = Kernel::new(law, z.step(), n)?;
    let zv = z.values();

    let mut worst = (zv[0] - f[0]).abs();
    if n > 1 {
        worst = worst.max((zv[1] - (f[1] + kernel.df[1] * zv[0])).abs());
    }
    let half_df1 = 0.5 * kernel.df[1];
    let mut history = vec![0.0; CHUNK];
    let mut start = 2;
    while start < n {
        let block = start / CHUNK;
        let end = ((block + 1) * CHUNK).min(n);
        let acc = &mut history[..end - start];
        acc.iter_mut().for_each(|a| *a = 0.0);
        kernel.accumulate_history(zv, start, acc, block);
        for i in start..end {
            let s = kernel.known_terms(zv, i, acc[i - start]);
            let r = (zv[i] - (f[i] + s + half_df1 * zv[i])).abs();
            worst = worst.max(r);
        }
        start = end;
    }
    Ok(worst)
}

/// `a(t_i) = int_0^{t_i} forcing(t_i - s) u(ds)` as a discrete Stieltjes sum.
///
/// `u` is treated as a measure with an atom `u_0` at the origin and increments
/// `u_k - u_{k-1}` on `(t_{k-1}, t_k]`, each paired with the midpoint value
/// `(f_{i-k} + f_{i-k+1}) / 2`.
pub fn key_renewal_compose(u: &GridFunction, forcing: &GridFunction) -> Result<GridFunction> {
    let h = u.step();
    if (forcing.step() - h).abs() > 1e-12 * h {
        return Err(Error::GridMismatch(format!(
            "steps differ: {} vs {}",
            h,
            forcing.step()
        )));
    }
    if forcing.len() != u.len() {
        return Err(Error::GridMismatch(format!(
            "lengths differ: {} vs {}",
            u.len(),
            forcing.len()
        )));
    }
    let n = u.len();
    let uv = u.values();
    let fv = forcing.values();
    let du: Vec<f64> = (0..n)
        .map(|k| if k == 0 { uv[0] } else { uv[k] - uv[k - 1] })
        .collect();
    // rev_mid[n - 1 - m] = (f_m + f_{m+1}) / 2, so lags i - k (k >= 1) read ascending.
    let mut rev_mid = vec![0.0; n];
    for m in 0..n.saturating_sub(1) {
        rev_mid[n - 1 - m] = 0.5 * (fv[m] + fv[m + 1]);
    }
    let dot = select_dot();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let atom = fv[i] * du[0];
            if i == 0 {
                return atom;
            }
            // k = 1..=i pairs with lag m = i - k.
            let base = n - i;
            atom + dot(&rev_mid[base..base + i], &du[1..=i])
        })
        .collect();
    GridFunction::new(h, values)
}

fn forcing_values<F: Fn(f64) -> f64>(forcing: &F, step: f64, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|i| {
            let v = forcing(i as f64 * step);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteForcing { index: i, value: v })
            }
        })
        .collect()
}

type DotFn = fn(&[f64], &[f64]) -> f64;

const LANES: usize = 32;

/// Dot product with 32 independent accumulators combined in a fixed tree.
/// The result depends only on the inputs, never on the instruction set used.
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    finish_lanes(acc, ra, rb)
}

#[inline(always)]
fn finish_lanes(mut acc: [f64; LANES], ra: &[f64], rb: &[f64]) -> f64 {
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for l in 0..width {
            acc[l] += acc[l + width];
        }
    }
    acc[0] + tail
}

fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    dot_lanes(a, b)
}

// The SIMD variants keep lane `l` accumulating elements `l mod 32` with a
// separate multiply and add, so they round exactly like `dot_lanes`.

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_avx2_inner(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let len = a.len().min(b.len());
    let blocks = len / LANES;
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut v = [_mm256_setzero_pd(); LANES / 4];
    for blk in 0..blocks {
        let off = blk * LANES;
        for (r, acc) in v.iter_mut().enumerate() {
            let x = _mm256_loadu_pd(pa.add(off + 4 * r));
            let y = _mm256_loadu_pd(pb.add(off + 4 * r));
            *acc = _mm256_add_pd(*acc, _mm256_mul_pd(x, y));
        }
    }
    let mut acc = [0.0f64; LANES];
    for (r, x) in v.iter().enumerate() {
        _mm256_storeu_pd(acc.as_mut_ptr().add(4 * r), *x);
    }
    let done = blocks * LANES;
    finish_lanes(acc, &a[done..len], &b[done..len])
}

#[cfg(target_arch = "x86_64")]
fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    // SAFETY: only selected by `select_dot` after runtime detection of AVX2.
    unsafe { dot_avx2_inner(a, b) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn dot_avx512_inner(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let len = a.len().min(b.len());
    let blocks = len / LANES;
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut v = [_mm512_setzero_pd(); LANES / 8];
    for blk in 0..blocks {
        let off = blk * LANES;
        for (r, acc) in v.iter_mut().enumerate() {
            let x = _mm512_loadu_pd(pa.add(off + 8 * r));
            let y = _mm512_loadu_pd(pb.add(off + 8 * r));
            *acc = _mm512_add_pd(*acc, _mm512_mul_pd(x, y));
        }
    }
    let mut acc = [0.0f64; LANES];
    for (r, x) in v.iter().enumerate() {
        _mm512_storeu_pd(acc.as_mut_ptr().add(8 * r), *x);
    }
    let done = blocks * LANES;
    finish_lanes(acc, &a[done..len], &b[done..len])
}

#[cfg(target_arch = "x86_64")]
fn dot_avx512(a: &[f64], b: &[f64]) -> f64 {
    // SAFETY: only selected by `select_dot` after runtime detection of AVX-512F.
    unsafe { dot_avx512_inner(a, b) }
}

/// Outputs per batched call.
const BATCH: usize = 4;

/// `out[r] = dot(a[BATCH - 1 - r..][..b.len()], b)` for `r < BATCH`, each in the
/// canonical lane order.
type DotBatch = fn(&[f64], &[f64], &mut [f64; BATCH]);

fn batch_portable(a: &[f64], b: &[f64], out: &mut [f64; BATCH]) {
    let len = b.len();
    for (r, o) in out.iter_mut().enumerate() {
        let s = BATCH - 1 - r;
        *o = dot_lanes(&a[s..s + len], b);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn batch_avx512_inner(a: &[f64], b: &[f64], out: &mut [f64; BATCH]) {
    use std::arch::x86_64::*;
    let len = b.len();
    assert!(a.len() >= len + BATCH - 1);
    let blocks = len / LANES;
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut v = [[_mm512_setzero_pd(); LANES / 8]; BATCH];
    for blk in 0..blocks {
        let off = blk * LANES;
        for q in 0..LANES / 8 {
            let y = _mm512_loadu_pd(pb.add(off + 8 * q));
            for (r, acc) in v.iter_mut().enumerate() {
                let x = _mm512_loadu_pd(pa.add(BATCH - 1 - r + off + 8 * q));
                acc[q] = _mm512_add_pd(acc[q], _mm512_mul_pd(x, y));
            }
        }
    }
    let done = blocks * LANES;
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = [0.0f64; LANES];
        for (q, x) in v[r].iter().enumerate() {
            _mm512_storeu_pd(acc.as_mut_ptr().add(8 * q), *x);
        }
        let s = BATCH - 1 - r;
        *o = finish_lanes(acc, &a[s + done..s + len], &b[done..len]);
    }
}

#[cfg(target_arch = "x86_64")]
fn batch_avx512(a: &[f64], b: &[f64], out: &mut [f64; BATCH]) {
    // SAFETY: only selected by `select_batch` after runtime detection of AVX-512F.
    unsafe { batch_avx512_inner(a, b, out) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn batch_avx2_inner(a: &[f64], b: &[f64], out: &mut [f64; BATCH]) {
    let len = b.len();
    for (r, o) in out.iter_mut().enumerate() {
        let s = BATCH - 1 - r;
        *o = dot_avx2_inner(&a[s..s + len], b);
    }
}

#[cfg(target_arch = "x86_64")]
fn batch_avx2(a: &[f64], b: &[f64], out: &mut [f64; BATCH]) {
    // SAFETY: only selected by `select_batch` after runtime detection of AVX2.
    unsafe { batch_avx2_inner(a, b, out) }
}

fn select_batch() -> DotBatch {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            return batch_avx512;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            return batch_avx2;
        }
    }
    batch_portable
}

fn select_dot() -> DotFn {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            return dot_avx512;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            return dot_avx2;
        }
    }
    dot_portable
}

/// Canonical dot product used by the solver, exposed for tests.
pub fn canonical_dot(a: &[f64], b: &[f64]) -> f64 {
    select_dot()(a, b)
}
