//! Numerical toolkit for a case-C inclination flip in a three-dimensional
//! polynomial vector field with a homoclinic orbit to a saddle.

pub mod cli;
pub mod connections;
pub mod error;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod manifolds;
pub mod model;
pub mod orbits;
pub mod projection;
pub mod winding;

pub use error::{Error, Result};
pub use model::{Params, State};
