//! Command-line front end for `sbjo-core`, plus the acceptance suite.

pub mod app;
pub mod suite;
