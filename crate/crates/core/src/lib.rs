//! Generative similarity: the odds that two observations share a latent
//! parameter draw under a hierarchical generative process, Monte-Carlo and
//! closed-form estimators for it, and contrastive training of embedding
//! networks on triplets sampled from such processes.
//!
//! Domains: a two-component Gaussian mixture ([`gaussian`]), quadrilaterals
//! with binary geometric features ([`quad`]) and turtle-graphics drawings
//! from two weighted grammars ([`draw`]).

pub mod draw;
pub mod eval;
pub mod error;
pub mod gaussian;
pub mod net;
pub mod numeric;
pub mod par;
pub mod process;
pub mod quad;
pub mod raster;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
