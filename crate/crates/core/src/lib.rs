//! Numerical laboratory for the two-phase Muskat problem in a periodic strip.
//!
//! The interface `y = f(t, x)` between two fluids in a porous strip
//! `𝕊 × (-1, 1)` evolves by `∂ₜf = Φ(t, f)`, where `Φ` is assembled from
//! elliptic solves on fixed reference strips. The crate provides the
//! transformed operators and their solvers, time integrators, the flat
//! linearized spectrum, steady finger branches and the moving-frame
//! reformulation.

pub mod csv;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod krylov;
pub mod linear;
pub mod model;
pub mod moving_frame;
pub mod operators;
pub mod spectral;
pub mod steady;

pub use elliptic::{flat_multiplier_oracle, EllipticSolver, FrozenOperators, MixedBvp, Multiplier, SolverSettings};
pub use error::{Error, Result};
pub use model::{
    classify_parabolicity, curvature, optimal_velocity, BoundaryData, FluidParams, InterfaceState,
    Parabolicity, PerturbationTerm, SpectralGrid,
};
pub use operators::{Side, StripField};
pub use evolution::{simulate, Evolution, SimulationConfig, SimulationStatus, Stepper, Trajectory, TrajectoryPoint};
pub use linear::{lambda_spectrum, DecayFit, SpectrumEntry};
pub use moving_frame::{to_moving_frame, MovingFrameConfig, MovingTrajectory};
pub use steady::{continue_branch, detect_bifurcation_points, Branch, BranchPoint, ContinuationSettings, SteadyProblem};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/elliptic.md")]
    mod elliptic {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/linear.md")]
    mod linear {}
    #[doc = include_str!("../../../book/src/steady.md")]
    mod steady {}
    #[doc = include_str!("../../../book/src/moving_frame.md")]
    mod moving_frame {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
