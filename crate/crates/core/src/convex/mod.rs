//! Small deterministic solvers: dense LP, barrier cone programs, scalar search.

pub mod lp;
pub mod scalar;
pub mod soc;

pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Sense};
pub use scalar::{maximize_unimodal, min_feasible_from_zero, min_feasible_scalar};
pub use soc::{maximize, solve_soc_feasibility, ConeProgram, ConeSolution, Objective, SocConstraint};
