//! Age-to-cycle ratio of renewal processes with regularly varying inter-arrival
//! times: simulation, limit laws, renewal-equation solvers and goodness-of-fit
//! statistics.

pub mod dist;
pub mod error;
pub mod limits;
pub mod quad;
pub mod simulate;
pub mod solver;
pub mod stats;
pub mod stream;

pub use dist::{InterArrivalLaw, Mean};
pub use error::{Error, Result};
pub use limits::LimitLaw;
pub use simulate::{ReplicationPlan, Snapshot};
pub use solver::GridFunction;
pub use stats::{Cdf, Ecdf};
