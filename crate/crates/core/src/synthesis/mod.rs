//! Storage function construction and NI/OSNI state-feedback synthesis for
//! plants in normal form.
//!
//! State vectors are laid out as `(z, xi1, xi2, xi3)`. Variable names follow
//! [`NormalFormPlant::state_names`]: `z` (or `z1..zm`), `xi1` (or
//! `xi1_1..xi1_p1`), and likewise for `xi2` and `xi3` with `p2` entries.

mod closed_loop;
mod general;
mod plant;

use thiserror::Error;

use crate::expr::ExprError;
use crate::lyapunov::{LyapunovError, SamplingError};

pub use closed_loop::{ClosedLoopSystem, LawMutation, SynthesisSpec, Target};
pub use general::{reduce_general_form, GeneralForm, GeneralFormClosedLoop, MAX_GAIN_CONDITION};
pub use plant::{auto_certificate, NormalFormPlant, ORIGIN_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("plant needs at least one output (p1 + p2 >= 1)")]
    NoOutputs,
    #[error("{what}: expected {expected} entries, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("p[{index}](0) = {value:e}, must vanish at the origin")]
    NonzeroAtOrigin { index: usize, value: f64 },
    #[error("A11 is singular; alpha = z + inv(A11) p(y) is undefined")]
    SingularA11,
    #[error("lambda must be finite and >= 0, got {0}")]
    BadLambda(f64),
    #[error("the OSNI target needs lambda > 0")]
    OsniNeedsPositiveLambda,
    #[error("P must be symmetric")]
    PNotSymmetric,
    #[error("P must be positive definite")]
    PNotPositiveDefinite,
    #[error("input gain [l1; l2] is singular at the queried state")]
    SingularGain,
    #[error("input gain [l1; l2] is ill-conditioned at the queried state (condition number {0:.3e})")]
    IllConditionedGain(f64),
}

/// `prefix` for a block of one, `prefix_1..prefix_k` otherwise.
pub(crate) fn block_names(prefix: &str, k: usize) -> Vec<String> {
    if k == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=k).map(|i| format!("{prefix}_{i}")).collect()
    }
}
