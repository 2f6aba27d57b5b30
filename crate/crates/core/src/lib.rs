//! Lower bounds on the smooth rigidity of finite point sets.
//!
//! The pipeline goes from a point set `Z` in the unit ball to a
//! [`certifier::RigidityCertificate`]: covering numbers and the density
//! functional ζ_d ([`geometry`]), lines crossing many occupied cubes
//! ([`integral_geometry`]), bump curves through selected points ([`curves`]),
//! chain-rule constants ([`chain_rule`]) and the final assembly
//! ([`certifier`]). [`remez`] handles the polynomial norming route and
//! [`testfields`] supplies closed-form smooth functions for verification.

pub mod certifier;
pub mod chain_rule;
pub mod count;
pub mod curves;
pub mod error;
pub mod geometry;
pub mod integral_geometry;
pub mod multi;
pub mod remez;
pub mod testfields;

pub use error::{Error, Result};
