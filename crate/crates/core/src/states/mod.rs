//! State representations and the conversions between them.
//!
//! Every treatment starts from a [`GaussianState`]. Exact classical states
//! are particle ensembles or gridded densities, exact quantum states are
//! wavefunctions on a position grid with their Wigner transforms, and all of
//! them reduce to a [`MomentSet`] for comparison.

mod ensemble;
mod gaussian_state;
mod grid;
pub(crate) mod moments;
pub(crate) mod wave;

pub use ensemble::{moments_from_ensemble, sample_ensemble, EnsembleMoments, Particle, TrajectoryEnsemble};
pub use gaussian_state::{sigma2_of_gaussian, GaussianState};
pub use grid::{moments_from_grid, moments_from_wigner, sigma_n, Lattice, PhaseDensity, PhaseSpaceGrid, WignerGrid};
pub use moments::{binomial, central_from_raw, moments_from_gaussian, CentralMoments, Flavor, MomentSet};
pub use wave::{
    moments_from_wavefunction, wavefunction_from_gaussian, wigner_transform, PositionGrid, WavefunctionGrid,
};
