//! Phase-space dynamics of Gaussian initial states.
//!
//! One Gaussian start, many treatments: exact classical trajectories and
//! Liouville grids, exact split-step quantum evolution with Wigner
//! transforms, classical and quantum moment hierarchies with pluggable
//! closures, and the Gaussian propagators (TDVP, truncated Gaussian,
//! Heller, multiple-packet) together with Lyapunov diagnostics.
//!
//! Units are natural: `hbar` and the mass are plain parameters.

pub mod error;
pub mod gaussian;
pub mod hierarchy;
pub mod io;
pub mod ode;
pub mod oracles;
pub mod par;
pub mod potential;
pub mod states;

pub use error::{Error, Result};
pub use potential::{Drive, PolynomialPotential};
pub use states::{Flavor, GaussianState, MomentSet};
