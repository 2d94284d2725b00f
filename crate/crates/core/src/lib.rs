pub mod error;
pub mod market;
pub mod optimize;
pub mod polytope;
pub mod divergence;
pub mod pricing;
pub mod cli;
