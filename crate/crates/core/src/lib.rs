//! Numerical toolkit for a nonsmooth semilinear elliptic optimal control
//! problem with distributed and boundary controls under unilateral pointwise
//! constraints.
//!
//! The governing state equation is
//!
//! ```text
//!   -Δy + d(y) = u   in Ω,      ∂y/∂ν + b y = v   on Γ,
//! ```
//!
//! where `d` is monotone and piecewise C¹ with a single kink. The crate
//! provides the finite-difference discretization on axis-aligned rectangles
//! ([`grid`]), the kinked nonlinearity and its generalized derivatives
//! ([`nonsmooth`]), semismooth Newton and conjugate-gradient solvers
//! ([`pde`]), the control-to-state map with its left/right Bouligand
//! generalized derivatives and limit diagnostics ([`operator`]), the tracking
//! objective and its adjoint-based gradient ([`objective`]), a projected
//! gradient method over the admissible set ([`optimize`]), and numerical
//! verification of B-stationarity, strong stationarity, and the multiplier
//! systems at candidate minimizers ([`stationarity`]).

pub mod grid;
pub mod nonsmooth;
pub mod objective;
pub mod operator;
pub mod optimize;
pub mod pde;
pub mod stationarity;

mod error;

pub use error::{Error, Result};
pub use grid::{BoundaryField, Field, Grid, RobinOperator};
pub use nonsmooth::Pc1Function;
pub use objective::{Bound, BoundaryBound, ProblemSpec};
pub use operator::{BouligandLimitConfig, ControlPair, KinkSide};
pub use optimize::{OptimizeConfig, OptimizeTrace};
pub use pde::{KinkBranch, SolveReport, SolverConfig};
pub use stationarity::StationarityReport;
