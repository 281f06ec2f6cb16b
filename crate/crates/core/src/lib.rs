//! Rank-one SDP relaxations for multiuser downlink beamforming.

pub mod error;
pub mod experiments;
pub mod framework;
pub mod linalg;
pub mod rankone;
pub mod scenarios;
pub mod sdp;

pub use error::{Error, Result};
