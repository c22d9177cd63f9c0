//! Value profiles from discussion text, value-conflict metrics between users,
//! and Bayes factor tests of whether conflict co-occurs with disagreement.

pub mod agreement;
pub mod corpus;
pub mod error;
pub mod extraction;
pub mod inference;
pub mod profiles;
pub mod similarity;
pub mod value_model;

pub use error::{Error, Result};
pub use value_model::{CircumplexKernel, ValueClass, ValueId, NUM_VALUES};
