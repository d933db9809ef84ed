pub mod scalar;
pub mod state;
pub mod linalg;
pub mod vertex;
pub mod poisson;
pub mod algebras;
pub mod charts;
pub mod w23;
pub mod brst;
pub mod cli;
