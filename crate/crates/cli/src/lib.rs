//! Command-line front end and HTTP service over the `graspkit` library.

pub mod cli;
pub mod config;
pub mod service;
