//! HTTP service and command-line tools around `kidsask-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod remote;
pub mod state;
pub mod views;
