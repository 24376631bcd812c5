pub mod capacity;
pub mod cli;
pub mod content;
pub mod error;
pub mod experiment;
pub mod gauge;
pub mod measure;
pub mod mh;
pub mod numeric;
pub mod operator;
pub mod riesz;

pub use error::{Error, Result};
pub use cli::run_cli;
