//! Problem documents and the expression grammar.

pub mod parser;
pub mod problem;

pub use parser::{parse_constant, parse_expr};
pub use problem::{parse_problem, parse_problem_with, AnalysisOptions, ProblemSpec};
