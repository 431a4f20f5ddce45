//! Command-line front end and HTTP job service for `brainpaint-core`.

pub mod cli;
pub mod service;
