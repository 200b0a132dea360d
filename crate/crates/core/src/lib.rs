//! Numerical engine for Voss nets built on pseudospherical surfaces.
//!
//! The pipeline runs from an exact sine-Gordon solution `φ` and its surface
//! frame, through solutions `Φ` of the Moutard equation `Φ_xy = Φ cos φ`
//! (symmetries obtained with recursion operators and quadratures), to the
//! Voss net with support function `Φ` and its singular and degenerate cases.

pub mod catalog;
pub mod contour;
pub mod error;
pub mod frames;
pub mod grid;
pub mod inverse;
pub mod jets;
pub mod sequences;
pub mod symmetries;
pub mod voss;

pub use error::{Result, VossError};
