//! Mean-field solvers for electrons coupled to bosonic modes, with
//! displacement and squeeze dressings, an exact-diagonalization reference
//! and light-matter entanglement entropies.

pub mod boson;
pub mod checks;
pub mod entanglement;
pub mod error;
pub mod model;
pub mod oracle;
pub mod scf;
pub mod transforms;

pub use error::{Error, Result};
