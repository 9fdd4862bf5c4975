//! Time-evolved quantum expectation values for semiclassical Schrödinger
//! dynamics, computed by transporting Husimi- or Wigner-distributed
//! phase-space samples along an ε-corrected classical flow.
//!
//! The equation of interest is `iε ∂_t ψ = -(ε²/2) Δψ + V(q) ψ` with a small
//! semiclassical parameter ε. Expectation values of Weyl-quantised observables
//! `a(q, p)` admit an ε²-accurate particle discretisation:
//!
//! * draw nodes from the Husimi function of the initial state,
//! * move them with the flow of the corrected Hamiltonian
//!   `h_ε = h - (ε/4)(d + ΔV)`,
//! * evaluate the corrected symbol `a_ε = a - (ε/4) Δa` at the endpoints, and
//! * subtract a correction term driven by two auxiliary ODEs (a matrix Λ and a
//!   vector Γ) transported along each trajectory.
//!
//! The crate provides the full pipeline ([`estimator`]), the pieces it is made
//! of (potentials, Hamiltonians, quasi-Monte-Carlo and Markov-chain sampling,
//! symplectic integrators, the correction ODEs), and an independent
//! grid-based split-step Fourier reference solver ([`grid`]) used to validate
//! the particle results.
//!
//! # Example
//!
//! Second-order convergence of a transported observable for a torsional
//! potential, checked against the exact initial value:
//!
//! ```
//! use semiclass::prelude::*;
//!
//! let potential = TorsionalPotential::new(2);
//! let model = HamiltonianModel::new(potential.into_shared(), 0.05).unwrap();
//! let z0 = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
//! let psi0 = GaussianSuperposition::single(z0, 0.05).unwrap();
//!
//! let config = EstimatorConfig {
//!     n_leading: 1 << 10,
//!     n_correction: 1 << 7,
//!     t_final: 0.0,
//!     ..EstimatorConfig::default()
//! };
//! let series = estimate(&model, &psi0, Method::HusimiCorrected, &config).unwrap();
//! let kinetic = series.column("kinetic").unwrap()[0];
//! // Weyl expectation of |p|²/2 in this coherent state: |p0|²/2 + ε d/4.
//! assert!((kinetic - 0.025).abs() < 1e-3);
//! ```

// Validation guards use `!(x > 0.0)` rather than `x <= 0.0` on purpose: the
// negated form also rejects NaN, which is exactly what parameter checks must
// do.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod flow;
pub mod grid;
pub mod hamiltonian;
pub mod normal;
pub mod observable;
pub mod phase;
pub mod potential;
pub mod sampling;
pub mod sobol;
pub mod states;
pub(crate) mod util;

pub use error::{Error, Result};

/// Convenient re-exports of the types most callers need.
pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::estimator::{
        compare_methods, estimate, estimate_report, EstimateReport, EstimatorConfig,
        ExpectationSeries, Method, MethodComparison, Sampling,
    };
    pub use crate::flow::{propagate_correction, yoshida6_flow, CorrectionState, ForceField};
    pub use crate::grid::{
        grid_expectations, high_wavenumber_fraction, read_checkpoint, write_checkpoint,
        GridState, SplitStepPropagator,
    };
    pub use crate::hamiltonian::HamiltonianModel;
    pub use crate::observable::{
        builtin_observables, correct_symbol, ObservableKind, ObservableSymbol,
    };
    pub use crate::phase::{PhasePoint, SymplecticStructure};
    pub use crate::potential::{
        FreePotential, HarmonicPotential, HenonHeilesChain, Potential, PotentialExt,
        SharedPotential, TorsionalPotential,
    };
    pub use crate::sampling::{McmcConfig, SampleEnsemble};
    pub use crate::states::{
        initial_expectation_oracle, GaussianSuperposition, GaussianWavePacket,
        PhaseSpaceDensity,
    };
}
