//! Generation, validation and evaluation of progressive polynomial
//! approximations: one coefficient vector whose prefixes give correctly
//! rounded elementary-function results for progressively wider formats.

pub mod constraints;
pub mod error;
pub mod exact;
pub mod formats;
pub mod generator;
pub mod lp;
pub mod oracle;
pub mod reduction;
pub mod runtime;
pub mod validator;

pub use constraints::{ConstraintSet, IntervalConstraint, IntervalMode, LadderRung, RoundingInterval};
pub use error::{Error, Result};
pub use exact::ExactReal;
pub use formats::{round_exact, round_f64, FpClass, FpFormat, FpValue, RoundingMode};
pub use generator::{GenerationReport, GeneratorConfig, ProgressivePolynomial};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use oracle::{FunctionId, OracleResult};
pub use reduction::ReducedInput;
pub use runtime::CompiledFunction;
pub use validator::ConformanceReport;
