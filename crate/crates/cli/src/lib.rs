//! File formats, configuration and subcommand pipelines for the `cfa`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod formats;
pub mod http;

use cfa_core::CfaError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

pub fn exit_code(err: &CfaError) -> i32 {
    match err {
        CfaError::Validation(_) => EXIT_VALIDATION,
        CfaError::Io { .. } => EXIT_IO,
        CfaError::Domain(_) => EXIT_DOMAIN,
    }
}
