pub mod calculus;
pub mod error;
pub mod expr;
pub mod graph;
pub mod group;
pub mod linalg;
pub mod mc;
pub mod measure;
pub mod metric;
pub mod multilinear;
pub mod optim;
pub mod split;
pub mod surfaces;
pub mod tolerance;

pub use error::{Error, Result};
pub use group::{HeisenbergBasis, Point};
