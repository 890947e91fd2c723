pub mod error;
pub mod linalg;
pub mod odec;
pub mod seed;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{outer_rank1, DenseTensor, MultiIndexSet, Shape};
pub mod bounds;
pub mod experiment;
pub mod io;
pub mod recovery;
pub mod vonneumann;
