//! Model predictive control for maximum-power tracking of a variable-speed
//! wind turbine in the partial-load region.
//!
//! The crate is organised bottom-up:
//!
//! - [`plant`]: nonlinear two-mass turbine model and its RK4 integrator,
//! - [`linmodel`]: operating points, linearization and ZOH discretization,
//! - [`mpc`]: augmented prediction models, condensed QP and the active-set solver,
//! - [`ctrl`]: the offline (switched-model) and online (re-linearized) controllers,
//! - [`harness`]: wind profiles, closed-loop experiments, metrics and file output,
//! - [`verify`]: brute-force reference computations used by checks and tests.

pub mod ctrl;
pub mod error;
pub mod harness;
pub mod linmodel;
pub mod mpc;
pub mod plant;
pub mod verify;

pub use ctrl::{Controller, ControllerConfig, Mode};
pub use error::{Error, Result};
pub use linmodel::{ContinuousLinearModel, DiscreteLinearModel, OperatingPoint};
pub use mpc::{AugmentedModel, ConstraintSet, MpcWeights};
pub use plant::{ControlInput, PlantState, TurbineParams};
