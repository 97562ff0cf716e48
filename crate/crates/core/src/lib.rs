//! Counting lattice points in star bodies, reciprocal sums of products of
//! fractional parts, and the supporting lattice machinery.

pub mod bounds;
pub mod cert;
pub mod counting;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod par;
pub mod scalar;
pub mod schmidt;
pub mod tess;
pub mod weights;

pub use cert::PhiSpec;
pub use counting::{CountQuery, CountResult, SumMode};
pub use error::{Error, Result};
pub use lattice::{LatticeBasis, MinimaProfile, Orientation};
pub use scalar::{MatrixL, Scalar};
