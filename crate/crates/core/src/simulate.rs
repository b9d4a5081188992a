//! Renewal-path snapshots and seeded Monte Carlo replication.

use rand::Rng;
use rayon::prelude::*;

use crate::dist::InterArrivalLaw;
use crate::error::{Error, Result};
use crate::stream::substream;

/// Upper bound on inter-arrival draws for a single replication.
pub const DEFAULT_DRAW_LIMIT: u64 = 1 << 34;

/// State of one renewal path at inspection time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// `A(t) = t - S_{N(t)}`.
    pub age: f64,
    /// `B(t) = S_{N(t)+1} - t`.
    pub residual: f64,
    /// `C(t) = A(t) + B(t)`.
    pub cycle: f64,
    /// `N(t) = max{n >= 0 : S_n <= t}`.
    pub count: u64,
}

impl Snapshot {
    /// `A(t) / C(t)`, in `[0, 1)`.
    pub fn ratio(&self) -> f64 {
        self.age / self.cycle
    }

    /// `A(t) / t`.
    pub fn age_fraction(&self) -> f64 {
        self.age / self.t
    }
}

/// `A(t) / C(t)` of a snapshot.
pub fn ratio(s: &Snapshot) -> f64 {
    s.ratio()
}

/// Draws inter-arrival times until the partial sum first exceeds `t` and returns
/// the straddling cycle. A renewal landing exactly on `t` is counted.
pub fn snapshot<R: Rng + ?Sized>(law: &InterArrivalLaw, t: f64, rng: &mut R) -> Snapshot {
    snapshot_bounded(law, t, rng, u64::MAX).expect("unbounded draw limit")
}

/// [`snapshot`] with a cap on the number of draws; `None` when the cap is hit.
pub fn snapshot_bounded<R: Rng + ?Sized>(
    law: &InterArrivalLaw,
    t: f64,
    rng: &mut R,
    draw_limit: u64,
) -> Option<Snapshot> {
    let mut sum = 0.0;
    let mut count = 0u64;
    loop {
        if count >= draw_limit {
            return None;
        }
        let next = sum + law.sample(rng);
        if next > t {
            debug_assert!(sum <= t && t < next);
            let age = t - sum;
            let residual = next - t;
            return Some(Snapshot {
                t,
                age,
                residual,
                cycle: age + residual,
                count,
            });
        }
        sum = next;
        count += 1;
    }
}

/// Description of a replicated snapshot experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationPlan {
    pub law: InterArrivalLaw,
    pub t: f64,
    pub n: usize,
    pub master_seed: u64,
    pub draw_limit: u64,
}

impl ReplicationPlan {
    pub fn new(law: InterArrivalLaw, t: f64, n: usize, master_seed: u64) -> Self {
        ReplicationPlan {
            law,
            t,
            n,
            master_seed,
            draw_limit: DEFAULT_DRAW_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                value: self.t,
                reason: "inspection time must be positive and finite",
            });
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                reason: "at least one replication is required",
            });
        }
        Ok(())
    }
}

/// One snapshot per replication, in replication order.
///
/// Replication `i` uses substream `(master_seed, i)` only, so the output is
/// identical for any thread count.
pub fn run_snapshots(plan: &ReplicationPlan) -> Result<Vec<Snapshot>> {
    plan.validate()?;
    let results: Vec<Option<Snapshot>> = (0..plan.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(plan.master_seed, i as u64);
            snapshot_bounded(&plan.law, plan.t, &mut rng, plan.draw_limit)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            s.ok_or(Error::DrawLimit {
                index,
                limit: plan.draw_limit,
            })
        })
        .collect()
}

/// The `n` ratio samples `A(t) / C(t)` of a plan.
pub fn run_ratio_experiment(plan: &ReplicationPlan) -> Result<Vec<f64>> {
    Ok(run_snapshots(plan)?.iter().map(Snapshot::ratio).collect())
}

/// Monte Carlo estimate of the renewal function `u(t) = E[N(t) + 1]` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalEstimate {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Estimates `u(t)` on an increasing grid; each path is generated once up to the
/// largest grid time and read off at every grid point.
pub fn renewal_function_mc(
    law: &InterArrivalLaw,
    t_grid: &[f64],
    n: usize,
    master_seed: u64,
) -> Result<Vec<RenewalEstimate>> {
    law.validate()?;
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            value: 0.0,
            reason: "grid must not be empty",
        });
    }
    if let Some(&bad) = t_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            value: bad,
            reason: "grid times must be positive and finite",
        });
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            value: f64::NAN,
            reason: "grid must be strictly increasing",
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "at least one replication is required",
        });
    }

    let counts: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(master_seed, i as u64);
            path_counts(law, t_grid, &mut rng)
        })
        .collect();

    let nf = n as f64;
    let estimates = t_grid
        .iter()
        .enumerate()
        .map(|(g, &t)| {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for path in &counts {
                let v = (path[g] + 1) as f64;
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / nf;
            let stderr = if n > 1 {
                let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            } else {
                0.0
            };
            RenewalEstimate { t, mean, stderr }
        })
        .collect();
    Ok(estimates)
}

/// `N(t_g)` for every grid time along one path.
fn path_counts<R: Rng + ?Sized>(law: &InterArrivalLaw, t_grid: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut sum = 0.0;
    let mut count = 0u64;
    while out.len() < t_grid.len() {
        let next = sum + law.sample(rng);
        while out.len() < t_grid.len() && t_grid[out.len()] < next {
            out.push(count);
        }
        sum = next;
        count += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;

    fn p05() -> InterArrivalLaw {
        InterArrivalLaw::pareto(0.5, 1.0).unwrap()
    }

    #[test]
    fn before_first_renewal() {
        let mut rng = substream(1, 0);
        for _ in 0..1000 {
            let s = snapshot(&p05(), 0.5, &mut rng);
            assert_eq!(s.count, 0);
            assert_eq!(s.age, 0.5);
            assert!(s.cycle >= 1.0);
        }
    }

    #[test]
    fn ratio_examples() {
        let s = Snapshot {
            t: 3.0,
            age: 0.5,
            residual: 1.5,
            cycle: 2.0,
            count: 2,
        };
        assert_eq!(ratio(&s), 0.25);
        let s = Snapshot {
            t: 3.0,
            age: 0.0,
            residual: 1.0,
            cycle: 1.0,
            count: 2,
        };
        assert_eq!(s.ratio(), 0.0);
        let s = Snapshot {
            t: 0.5,
            age: 0.5,
            residual: 3.5,
            cycle: 4.0,
            count: 0,
        };
        assert_eq!(s.ratio(), 0.125);
    }

    #[test]
    fn snapshot_algebra_holds() {
        let laws = [
            p05(),
            InterArrivalLaw::exponential(3.0).unwrap(),
            InterArrivalLaw::pareto_log(0.6, 4.0, 0.5).unwrap(),
        ];
        for (k, law) in laws.iter().enumerate() {
            let mut rng = substream(5, k as u64);
            for &t in &[0.1, 1.0, 17.3, 1e4] {
                let s = snapshot(law, t, &mut rng);
                assert_eq!(s.cycle, s.age + s.residual);
                assert!(s.age >= 0.0 && s.age <= t);
                assert!(s.residual > 0.0);
                assert!(s.ratio() >= 0.0 && s.ratio() < 1.0);
            }
        }
    }

    #[test]
    fn single_replication_is_substream_zero() {
        let plan = ReplicationPlan::new(p05(), 1e3, 1, 99);
        let ratios = run_ratio_experiment(&plan).unwrap();
        let direct = snapshot(&p05(), 1e3, &mut substream(99, 0)).ratio();
        assert_eq!(ratios, vec![direct]);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let plan = ReplicationPlan::new(p05(), 1e4, 2000, 3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_snapshots(&plan).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.age.to_bits(), y.age.to_bits());
            assert_eq!(x.residual.to_bits(), y.residual.to_bits());
            assert_eq!(x.count, y.count);
        }
    }

    #[test]
    fn draw_limit_names_the_replication() {
        let mut plan = ReplicationPlan::new(InterArrivalLaw::exponential(1.0).unwrap(), 50.0, 4, 1);
        plan.draw_limit = 3;
        match run_snapshots(&plan) {
            Err(Error::DrawLimit { index, limit }) => {
                assert_eq!(index, 0);
                assert_eq!(limit, 3);
            }
            other => panic!("expected draw-limit error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_plans_rejected() {
        assert!(run_snapshots(&ReplicationPlan::new(p05(), 0.0, 1, 0)).is_err());
        assert!(run_snapshots(&ReplicationPlan::new(p05(), 1.0, 0, 0)).is_err());
    }

    #[test]
    fn count_monotone_in_t_on_fixed_stream() {
        let law = InterArrivalLaw::exponential(1.0).unwrap();
        for seed in 0..20 {
            let mut last = 0;
            for &t in &[0.5, 1.0, 2.0, 5.0, 10.0, 40.0] {
                let s = snapshot(&law, t, &mut substream(seed, 0));
                assert!(s.count >= last);
                last = s.count;
            }
        }
    }

    #[test]
    fn poisson_mean_count() {
        let law = InterArrivalLaw::exponential(1.0).unwrap();
        let snaps = run_snapshots(&ReplicationPlan::new(law, 1e3, 100_000, 21)).unwrap();
        let mean = snaps.iter().map(|s| s.count as f64).sum::<f64>() / snaps.len() as f64;
        assert!((mean - 1e3).abs() <= 1.0, "{mean}");
    }

    #[test]
    fn renewal_function_poisson() {
        let law = InterArrivalLaw::exponential(1.0).unwrap();
        let est = renewal_function_mc(&law, &[1.0, 10.0], 10_000, 4).unwrap();
        assert!((est[1].mean - 11.0).abs() <= 0.1, "{:?}", est[1]);
        assert!(est[1].stderr > 0.0 && est[1].stderr < 0.05);
    }

    #[test]
    fn renewal_function_below_support_is_one() {
        let est = renewal_function_mc(&p05(), &[0.25, 0.999], 500, 8).unwrap();
        for e in est {
            assert_eq!(e.mean, 1.0);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn renewal_function_matches_single_time_counts() {
        // The multi-time path reader must agree with independent snapshots.
        let law = InterArrivalLaw::exponential(2.0).unwrap();
        let grid = [0.3, 1.0, 4.0];
        let est = renewal_function_mc(&law, &grid, 200, 17).unwrap();
        for (g, &t) in grid.iter().enumerate() {
            let mean = (0..200)
                .map(|i| (snapshot(&law, t, &mut substream(17, i)).count + 1) as f64)
                .sum::<f64>()
                / 200.0;
            assert_eq!(est[g].mean, mean);
        }
    }

    #[test]
    fn renewal_grid_validation() {
        assert!(renewal_function_mc(&p05(), &[], 10, 0).is_err());
        assert!(renewal_function_mc(&p05(), &[2.0, 1.0], 10, 0).is_err());
        assert!(renewal_function_mc(&p05(), &[-1.0], 10, 0).is_err());
    }
}
