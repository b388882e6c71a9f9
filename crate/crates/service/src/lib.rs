//! Command-line tool and HTTP API around `ragdesk-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod engine;
pub mod server;
