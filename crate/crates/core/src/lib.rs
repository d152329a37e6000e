//! Spin-polarizing interferometric beam splitter for free electrons.
//!
//! A bichromatic Kapitza–Dirac stage entangles spin and momentum, two monochromatic
//! standing-wave stages close the interferometer, and the output momentum channels end up
//! polarized along the laser magnetic field (ŷ). This crate provides
//!
//! * [`analytic`]: the exact four-mode Bragg model (stage unitaries, density evolution),
//! * [`solver`]: Pauli-equation propagation with full fields, effective ponderomotive
//!   potentials, or a truncated momentum-mode lattice,
//! * [`analysis`]: channel populations, per-channel spin, Rabi fits and entanglement,
//! * [`design`]: feasibility estimates (intensities, interaction geometry, tolerances).
//!
//! Internal units are eV-based with ħ = c = 1; see [`units`].

pub mod analysis;
pub mod analytic;
pub mod bragg;
pub mod design;
pub mod error;
pub mod fields;
pub mod grid;
pub mod solver;
pub mod spinor;
pub mod units;

pub use error::{Error, Result};
