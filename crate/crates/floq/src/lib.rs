//! Gapped and gapless higher-order Floquet topology in the coupled
//! Creutz-ladder / SSH lattice: model construction, Floquet spectra,
//! generalized winding numbers, closed-form corner modes and the
//! bulk-corner correspondence experiments.

pub mod error;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod invariants;
pub mod modes;
pub mod lab;
pub mod io;

pub use error::{Error, Result};
