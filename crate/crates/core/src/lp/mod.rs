//! Linear programming: problem representation, occupation-measure builders
//! and the simplex solver.

mod builder;
mod presolve;
mod problem;
mod simplex;

pub use builder::{
    build_occupation_lp, build_problem1_lp, build_problem2_lp, measure_value, objective_value, OccupationLp,
    OccupationMeasure, Variable, VariableMap,
};
pub use problem::{LpProblem, SparseRows};
pub use simplex::{solve, solve_with, Certificate, LpSolution, SolverConfig, Status};
