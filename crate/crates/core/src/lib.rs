//! Numerical laboratory for discrete zero-number Lyapunov functionals on
//! one-dimensional scalar semiflows.
//!
//! The crate provides sign-change counting ([`lyapunov`]), three engines
//! ([`parabolic`], [`delay`], [`transport`]) recording `z`, `V⁻` and `V⁺`
//! along trajectories, recovery of generator coefficients from semigroup
//! orbits ([`generator`]) and a randomized test harness ([`harness`]).

pub mod delay;
pub mod error;
pub mod generator;
pub mod grid;
pub mod harness;
pub mod lyapunov;
pub mod parabolic;
pub mod trajectory;
pub mod transport;
pub mod tridiag;

pub use delay::{DelayProblem, DelayRhs, Feedback, History};
pub use error::{Error, Result};
pub use grid::{CoefficientField, GridFunction, Samples};
pub use lyapunov::{
    is_nondegenerate, v_minus, v_plus, zero_number, Functional, Tolerance, ZeroCount,
};
pub use parabolic::{BoundarySpec, ParabolicProblem, StepOperator};
pub use trajectory::{check_monotone, MonotonicityReport, Recording, Snapshot, Trajectory};
pub use transport::{CharacteristicMap, TransportProblem};
