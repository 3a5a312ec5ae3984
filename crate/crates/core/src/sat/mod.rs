//! SAT-based resolution: the clause encoding, a small DPLL solver, and the
//! 3-SAT instance generator.

mod cnf;
mod dpll;
mod threesat;

pub use cnf::{decode, encode, resolve, CnfInstance, Lit, SatAssignment, Var};
pub use dpll::{solve, Solver};
pub use threesat::{gen_from_3cnf, parse_dimacs, Cnf};
