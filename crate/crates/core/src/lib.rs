//! Cross-domain rating prediction for cold-start users.
//!
//! Each domain gets its own matrix factorization; user factors from every
//! domain are tied together by generalized canonical correlation analysis
//! (MAX-VAR with missing rows, or the inverse-sum-of-selection-matrices
//! variant), and the shared representation is used to rebuild target-domain
//! factors for users who have few or no ratings there.

pub mod corpus;
pub mod dump;
pub mod error;
pub mod factorization;
pub mod gcca;
pub mod linalg;
pub mod pipeline;
pub mod simulator;
pub mod topics;

pub use error::{Error, Result};
