//! Paired two-view environments.

pub mod grid;
pub mod mvc;
