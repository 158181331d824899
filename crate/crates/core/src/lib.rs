//! Scheduling and costing engine for periodic ranging bursts carried on the
//! downlink of a broadband LEO constellation.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! scenario parsing and the command-line front end live in the `fusedpnt`
//! crate.
//!
//! Module map:
//!
//! * [`grid`]: hexagonal service cells covering a latitude band.
//! * [`orbit`]: circular-orbit constellations, visibility and exclusion masks.
//! * [`schedule`]: schedule data model, TX/RX reservation cubes, the 59-bit
//!   assignment codec and the feasibility checker.
//! * [`scheduler`]: greedy and rejection-sampling schedulers.
//! * [`cost`]: closed-form and measured reservations.
//! * [`population`]: density rasters and peak-to-average ratio estimation.

#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cost;
mod error;
pub mod geo;
pub mod grid;
pub mod orbit;
pub mod population;
pub mod schedule;
pub mod scheduler;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = SPEED_OF_LIGHT_M_S / 1000.0;
/// Mean spherical Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Sidereal rotation rate of the Earth, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_0e-5;
/// Radius of the geostationary orbit, km.
pub const GEO_RADIUS_KM: f64 = 42_164.0;
