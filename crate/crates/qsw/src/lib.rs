//! Simulator and analysis toolkit for dissipative continuous-time quantum
//! walks on networks.
//!
//! The quantum stochastic walk interpolates between a coherent quantum walk
//! and a classical random walk inside a single Lindblad master equation,
//!
//! ```text
//! drho/dt = (1 - alpha) * (-i [H0, rho])
//!         + alpha * (D_hop[rho] + D_deph[rho])
//! ```
//!
//! with `alpha` in `[0, 1]`. The crate builds the network Hamiltonian and
//! golden-rule hopping rates ([`network`]), evaluates the master-equation
//! right-hand side in closed form ([`dynamics`]), integrates it with an
//! adaptive Runge-Kutta 5(4) scheme over a log-spaced time grid
//! ([`propagator`]), computes von Neumann / Shannon entropy and return
//! probabilities ([`observables`]), and extracts the information dimension
//! as the slope of entropy versus `ln t` ([`scaling`]). The [`experiment`]
//! module orchestrates alpha scans and writes reproducible CSV output.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod network;
pub mod observables;
pub mod propagator;
pub mod scaling;

pub use error::{QswError, Result};

pub use dynamics::{
    classical_generator, ctqw_term, ctrw_dissipator, dephasing_dissipator, qsw_rhs,
    DensityMatrix, QswParams,
};
pub use network::{
    golden_rule_rates, hamiltonian, make_chain, make_sierpinski, Convention, HermitianMatrix,
    Network, RateMatrix, Topology,
};
pub use observables::{
    entropy_trace, return_probability, shannon_entropy, von_neumann_entropy, EntropyKind,
    EntropyTrace,
};
pub use propagator::{propagate, propagate_classical, TimeGrid, Trajectory};
pub use scaling::{
    auto_window, dimension_curve, dimer_short_time, fit_information_dimension, AutoWindowParams,
    FitResult, FitWindow,
};
