pub mod bernstein;
pub mod engine;
pub mod existence;
pub mod model;
pub mod quad;
pub mod sampling;
pub mod specfun;
