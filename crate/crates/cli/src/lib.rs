//! Library side of the `zslq` command-line tool: problem files, reports and
//! the subcommands.

pub mod commands;
pub mod problem;
pub mod report;

pub use commands::{cmd_check_stability, cmd_report, cmd_solve, cmd_verify, CliError, Overrides, Status};
pub use problem::{ParseError, ProblemFile};
pub use report::Report;
