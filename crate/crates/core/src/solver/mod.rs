//! Built-in LP and MILP backend.

pub mod lp;
pub mod milp;

pub use lp::{LinearProgram, LpSolution, LpStatus, Row, Sense};
pub use milp::{solve_milp, BnbOptions, Heuristic, MilpModel, MilpSolution, MilpStatus};
