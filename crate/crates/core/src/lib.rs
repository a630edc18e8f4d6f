//! Synthesis and certification of negative-imaginary state feedback for
//! nonlinear plants in normal form.
//!
//! The pipeline: classify `A11` and build a quadratic certificate
//! ([`lyapunov`]), construct the storage function and feedback laws
//! ([`synthesis`]), optionally close the loop with an OSNI uncertainty
//! ([`uncertainty`]), then simulate and check the dissipation inequalities
//! along trajectories ([`sim`]). Expressions are handled by [`expr`].

pub mod expr;
pub mod lyapunov;
pub mod sim;
pub mod synthesis;
pub mod uncertainty;

pub use expr::{parse_expr, Expr, ExprError};
pub use lyapunov::{Classification, PdVerdict, SquareMatrix, StabilityVerdict};
pub use sim::{DissipationReport, Dynamics, SignalSpec, SimError, Trajectory, Verdict, WDecreaseReport};
pub use synthesis::{ClosedLoopSystem, NormalFormPlant, SynthesisError, SynthesisSpec, Target};
pub use uncertainty::{Interconnection, OsniUncertainty, UncertaintyError};
