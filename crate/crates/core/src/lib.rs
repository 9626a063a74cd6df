pub mod certificates;
pub mod chaos;
pub mod cli;
pub mod corpus;
pub mod empirics;
pub mod error;
pub mod gallery;
pub mod io;
pub mod krr;
pub mod mc;
pub mod operator;
pub mod plot;
pub mod she;
pub mod tensor;

pub use error::{Error, Result};
