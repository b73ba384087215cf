//! Numeric geometry harness, Wigner transform checks, file formats, and the
//! command line front end for the symbol engine.

pub mod geometry;
pub mod report;
pub mod verify;
pub mod wigner;
pub mod wsym;
