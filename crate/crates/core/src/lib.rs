//! Polyhedral scaled boundary finite elements for three-dimensional Darcy
//! seepage.

pub mod basis;
pub mod bench;
pub mod error;
pub mod free_surface;
pub mod io;
pub mod mesh;
pub mod sbfem;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cases.md")]
    mod cases {}
    #[doc = include_str!("../../../book/src/library.md")]
    mod library {}
    #[doc = include_str!("../../../book/src/free_surface.md")]
    mod free_surface {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
