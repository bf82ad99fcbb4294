//! Simulation and analysis of induced-coherence fringes.
//!
//! Two nonlinear crystals share an aligned idler beam. Their signal beams
//! then interfere, and the fringe visibility on the signal camera depends
//! on how strongly signal and idler transverse momenta are correlated. This
//! crate synthesizes phase-stepped camera stacks from the biphoton model,
//! extracts per-pixel visibility, and inverts the visibility FWHM to the
//! conditional-momentum width `σ_c`.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod stackio;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
