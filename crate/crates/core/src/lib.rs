pub mod analysis;
pub mod error;
pub mod hifi;
pub mod io;
pub mod linalg;
pub mod meshfe;
pub mod mms;
pub mod pod;
pub mod problem;
pub mod rom;

pub use error::{Error, Result};
