//! Moment functionals, characteristic roots and `eps`-expansions for
//! perturbed discrete-time semi-Markov processes.

pub mod error;
pub mod expansions;
pub mod fixtures;
pub mod generate;
pub mod hitting;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod root;
pub mod verify;

pub use error::{Error, Result, ValidationError};
pub use model::{load_model, SemiMarkovModel};
