pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod opinf;
pub mod recursive_ls;
pub mod snapshots;
pub mod stream_svd;

pub use error::{Error, Result};
