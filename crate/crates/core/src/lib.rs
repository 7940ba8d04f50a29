//! Substitution tilings, their Delone sets, discrepancy diagnostics and
//! explicit maps to the integer lattice.

pub mod error;
pub mod flattener;
pub mod geom;
pub mod hierarchy;
pub mod io;
pub mod par;
pub mod rectifier;
pub mod regions;
pub mod spectral;
pub mod subst;

pub use error::{Error, Result};
pub use par::Exec;
