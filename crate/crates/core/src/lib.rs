//! Scattering-network simulation of transmit-only reconfigurable antenna
//! arrays: multiport algebra, radiating-structure models, gain metrics, the
//! switch-based joint beamforming-and-matching tile, and switch-state search.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod architecture;
pub mod components;
pub mod error;
pub mod linalg;
pub mod netcalc;
pub mod optimize;
pub mod radiating;
pub mod rems;

pub use error::{Error, Result};
