//! Entropy production for unitary work protocols on finite-dimensional quantum
//! systems, decomposed into population and coherence contributions.
//!
//! A protocol drives a system from `H_0` to `H_tau` through a unitary `U`,
//! starting from the Gibbs state at inverse temperature `beta`. The
//! irreversibility of the process is measured by the entropy production
//! `Sigma = S(rho_tau || rho_tau_th)`, which this crate splits two ways:
//!
//! * the population/coherence split `(Gamma_cl, Gamma_qu)` through the state
//!   dephased in the final energy basis, and
//! * the dephased-Hamiltonian split `(Lambda_cl, Lambda_qu)` through the Gibbs
//!   state of `H_tau` dephased in the basis of the final state.
//!
//! Both splits are available at the level of averages ([`splitting`]),
//! stochastic two-point-measurement trajectories, distributions and cumulant
//! generating functions ([`trajectories`]), and second-order expansions for
//! infinitesimal quenches ([`perturbation`]). Analytic backends cover the
//! transverse-field Ising chain ([`tfim`]) and a driven macrospin
//! ([`models`]).
//!
//! All kernels work in log-space on spectral data (`ln p = -beta*eps - ln Z`
//! via shifted log-sum-exp), so thermal tails stay exact down to very low
//! temperatures instead of underflowing.

pub mod error;
pub mod models;
pub mod operators;
pub mod perturbation;
pub mod quadrature;
pub mod random;
pub mod splitting;
pub mod stable;
pub mod tfim;
pub mod trajectories;

mod spectra;

pub use error::{Error, Result};
pub use operators::{
    coherence_q, dephase, dephase_density, evolution_unitary, gibbs_state, j_superoperator,
    relative_entropy, renyi_trace, skew_information, spectral_decompose, von_neumann_entropy,
    DensityMatrix, GibbsState, HermitianMatrix, SpectralDecomposition, TraceValue, UnitaryMatrix,
    DEFAULT_DEGENERACY_REL_TOL, SUPPORT_TOL,
};
pub use splitting::{
    average_split, gamma_split, lambda_split, nonequilibrium_free_energy, reference_states, sigma,
    AverageSplit, ReferenceStates, WorkProtocol,
};
pub use trajectories::{
    build_table, cgf_empirical, cgf_trace, cumulants, distribution, fluctuation_theorem_check,
    histogram, CgfKind, CumulantSet, DiscreteDistribution, FluctuationReport, Histogram, Quantity,
    TrajectoryTable,
};
