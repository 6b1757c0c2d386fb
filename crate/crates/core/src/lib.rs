//! Layerings of complete graphs, their spherical embeddings, and the
//! spherically symmetric cones built from them.

pub mod catalog;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layering;
pub mod linalg;
pub mod measure;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
