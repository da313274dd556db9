//! Self-imitation learning driven by experience-based roadmap planning, on a
//! planar reaching arm with a single box obstacle.
//!
//! The crate is organized bottom-up:
//!
//! - [`arm`], [`geom`], [`env`]: kinematics, exact collision predicates and
//!   the reaching MDP.
//! - [`prm`], [`demo`]: roadmaps over visited states and their conversion into
//!   demonstration transitions.
//! - [`gp`]: reward-landscape Gaussian process for replacement actions after
//!   a collision.
//! - [`nn`], [`rl`]: dense networks and the off-policy learners.
//! - [`collision_model`]: learned collision classifier.
//! - [`harness`]: experiment configuration, orchestration and reporting.

pub mod arm;
pub mod buffer;
pub mod collision_model;
pub mod demo;
pub mod env;
pub mod error;
pub mod geom;
pub mod gp;
pub mod harness;
pub mod nn;
pub mod prm;
pub mod rl;

pub use error::{Error, Result};
