//! Iterative-decoding analysis for LDPC ensembles over binary-input
//! memoryless symmetric channels.
//!
//! The scalar bounds on bit error probability live in [`bounds`]. Quantized
//! density evolution sits between them, and [`tree_oracle`] plus
//! [`simulator`] check both against brute force on small trees and real graphs.

pub mod bounds;
pub mod channels;
pub mod density_evolution;
pub mod ensembles;
mod error;
pub mod simulator;
pub mod tree_oracle;

pub use channels::ChannelModel;
pub use density_evolution::QuantizationParams;
pub use ensembles::{DegreePolynomial, Ensemble};
pub use error::{Error, Result};
