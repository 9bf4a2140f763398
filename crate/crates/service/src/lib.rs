//! HTTP service and command-line front end for the study platform.

pub mod api;
pub mod cli;
pub mod config;
