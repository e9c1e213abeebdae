//! Convertibility of EPR assemblages under local operations and shared
//! randomness (LOSR).
//!
//! The crate builds the semidefinite programs that decide LOSR conversions
//! between assemblages, tests membership in the classical (free) sets,
//! evaluates resource monotones and EPR functionals, and applies explicit
//! one-way LOCC maps.

// Links the system BLAS/LAPACK used by the conic solver.
extern crate openblas_src;

pub mod assemblages;
pub mod conversion;
pub mod error;
pub mod freeness;
pub mod functionals;
pub mod locc;
pub mod monotones;
pub mod qcore;
pub mod sdp;
pub mod strategies;

pub use assemblages::{Assemblage, Povm, Scenario};
pub use error::{Error, Result};
pub use qcore::CMatrix;
pub use sdp::{Feasibility, SdpSettings};
