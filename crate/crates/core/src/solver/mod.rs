//! Strategic-form reduction, iterated strict dominance, logit QRE tracing and
//! equilibrium verification.

mod elimination;
pub mod fixture;
mod nash;
mod normal_form;
mod profile;
mod qre;
mod solve;

pub use elimination::{iterated_elimination, Elimination, EliminationTrace};
pub use nash::{nash_from_qre, nash_from_qre_with, DEFAULT_EPSILON};
pub use normal_form::{to_normal_form, Agent, InfosetView, NormalForm};
pub use profile::{
    verify_equilibrium, ActionProb, AgentCheck, BehavioralProfile, InfosetBehavior, StrategyProfile,
    VerificationReport,
};
pub use qre::{geometric_schedule, logit_qre_trace, logit_residual, logit_response, QreOptions, QrePoint};
pub use solve::{qre_path_csv, solve, solve_normal_form, Solution};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("malformed normal form: {0}")]
    Shape(String),
    #[error("invalid strategy profile: {0}")]
    Profile(String),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("QRE fixed point did not converge at lambda {lambda} (last residual {residual:e})")]
    Convergence { lambda: f64, residual: f64 },
    #[error("no equilibrium candidate verified (smallest deviation gain {max_gain:e})")]
    Polish { max_gain: f64 },
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
}
