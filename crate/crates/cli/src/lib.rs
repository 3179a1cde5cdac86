//! Configuration and the HTTP game service behind the `red10` binary.

pub mod config;
pub mod service;
