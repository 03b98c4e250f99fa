//! Finite-volume laboratory for the Dirichlet-to-Neumann operator of the
//! 1-Laplacian on 2-D polygonal domains.
//!
//! The crate is organized around a staggered finite-volume grid ([`grid`])
//! whose gradient/divergence/trace/co-normal operators satisfy an exact
//! summation-by-parts identity. On top of it:
//!
//! * [`tvmin`] solves the relaxed least-gradient Dirichlet problem by a
//!   primal-dual saddle-point iteration and returns a dual certificate,
//! * [`dtn`] evaluates the Dirichlet-to-Neumann selection g and the boundary
//!   energy phi together with its structural properties,
//! * [`resolvent`] solves the truncated Robin problem and realizes the
//!   resolvent (I + lambda Lambda)^-1,
//! * [`evolution`] runs the implicit-Euler boundary semigroup with a full
//!   diagnostic battery,
//! * [`plap`] solves regularized p-Laplace Robin problems and the
//!   continuation p -> 1,
//! * [`oracle`] is an exact coarea/min-cut solver used to validate golden
//!   values at desk scale,
//! * [`io`] persists grids and fields (JSON, CSV, binary).

pub mod dtn;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod plap;
pub mod resolvent;
mod saddle;
pub mod tvmin;

pub use error::{Error, Result};
pub use grid::{BoundaryData, BulkField, DualField, Grid};
