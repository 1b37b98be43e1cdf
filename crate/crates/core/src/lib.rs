//! Deterministic workbench for prior-guided dexterous manipulation.
//!
//! The library covers the full pipeline on simplified kinematics: scene
//! construction and point-cloud rendering, functional-part segmentation,
//! two-finger grasp sampling lifted to a 16-DoF hand through a width table,
//! and PPO refinement of the resulting initial pose under a decomposed
//! reward. Everything is seeded and single-threaded; identical inputs
//! produce identical outputs down to the serialized artifacts.

pub mod commands;
pub mod config;
pub mod env;
pub mod error;
pub mod geom;
pub mod grasp;
pub mod io;
pub mod rl;
pub mod rng;
pub mod scene;
pub mod segment;
pub mod vmath;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
