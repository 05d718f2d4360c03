//! Affine semidefinite programs with convex quadratic objectives.

mod expr;
mod program;
mod solver;

pub use expr::{AffExpr, MatExpr, Term, VarId};
pub use program::{ConicProgram, Diagnostic, Objective, PsdConstraint, VarDecl, WeightedSquare};
pub use solver::{solve, ConicSolver, InteriorPoint, Residuals, Solution, SolverSettings, Status};

#[cfg(test)]
mod tests;
