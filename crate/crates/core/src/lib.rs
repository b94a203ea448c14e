//! Bivariate survival models `F̄ = h(Ḡ)` built from a core `Ḡ` with the weak
//! bivariate lack-of-memory property and a distortion `h`.
//!
//! Residual lifetimes `(X − t, Y − t | X > t, Y > t)` stay in the family:
//! their survival is `h_τ(Ḡ)` with `τ = λt`. This crate evaluates these
//! models, their copulas and Kendall functions, simulates them exactly and
//! prices joint-life annuities on them.

pub mod config;
pub mod dependence;
pub mod distorted;
pub mod error;
pub mod generators;
pub mod lmp;
pub mod numerics;
pub mod pricing;
pub mod sampler;

pub use config::ModelConfig;
pub use distorted::{mo15_bridge, Model, Mo15Params};
pub use error::{Error, Result};
pub use generators::{Family, Generator, MixingLaw};
pub use lmp::CoreParams;
