//! Configuration, orchestration, and reporting front-end for the solver
//! library: parse a JSON problem description, dispatch solve / optimize /
//! verify / limit-diagnostic runs, and emit JSON reports and CSV field dumps.

use thiserror::Error;

pub mod config;
pub mod expr;
pub mod run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] nsoc_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
