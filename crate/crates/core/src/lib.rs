//! Tabular data curation: ensemble error detection with adaptive Min-K
//! voting, clean-fraction extraction, and synthetic densification of the
//! clean fraction with a variational autoencoder.
//!
//! The crate also ships a seeded error injector and an evaluation harness
//! that measures detection accuracy and downstream model quality.

pub mod detect;
pub mod error;
pub mod eval;
pub mod inject;
pub mod nn;
pub mod par;
pub mod seed;
pub mod synth;
pub mod table;
pub mod vae;
pub mod vote;

pub use error::{Error, Result};
pub use par::Execution;
