//! Command-line front end and local HTTP service for swipe-driven segmentation.

pub mod cli;
pub mod server;
