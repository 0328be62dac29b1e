//! Reactive design contracts for a small CSP-style language with state.
//!
//! Programs are parsed and typechecked by [`dsl`], then folded into contracts
//! `⦗pre | peri | post⦘` by [`contracts`]. The relations inside a contract are
//! terms of [`relalg`], kept in a normal form built from initial, quiescent
//! and final atoms. [`verify`] discharges refinement obligations by bounded
//! enumeration and [`oracle`] gives an independent operational reading used
//! to cross-check the calculus.

pub mod contracts;
pub mod corpus;
pub mod dsl;
pub mod error;
pub mod gen;
pub mod kleene;
pub mod laws;
pub mod oracle;
pub mod relalg;
pub mod state;
pub mod verify;

pub use error::{Error, Result};

/// Bounds shared by the enumeration-based procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub trace: usize,
    pub star: usize,
    pub wp: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { trace: 4, star: 3, wp: 16 }
    }
}
