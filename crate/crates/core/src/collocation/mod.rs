//! Trapezoidal collocation of the vSLIP planning problem and its solver.

pub mod banded;
pub mod integrate;
pub mod io;
pub mod ipm;
pub mod problem;

pub use integrate::trapezoidal_rollout;
pub use ipm::NlpFunctions;
pub use problem::{
    evaluate_cost, solve, solve_spec, solve_with, transcribe, Bounds, CostWeights, NlpProblem, Obstacle, ProblemSpec,
    Slacks, SolveStatus, SolverOptions, SparseJacobian, Trajectory,
};
