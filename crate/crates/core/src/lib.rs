//! Ultrafast two-qubit phase gates driven by trains of counter-propagating
//! pulse pairs on a pair of trapped ions.
//!
//! Times are measured in trap periods `T_P = 2π/ν` unless a name says otherwise.

pub mod conditions;
pub mod error;
pub mod optics;
pub mod optimizer;
pub mod oracle;
pub mod phase_space;
pub mod robustness;
pub mod schemes;
pub mod trap;

pub use conditions::{condition_error, cost, ConditionReport, CostWeights};
pub use error::{GateError, Result};
pub use schemes::SchemeFamily;
pub use trap::{KickGroup, KickScheme, LaserParams, SymmetricScheme, TrapParams};
