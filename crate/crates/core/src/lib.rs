//! Stochastic and deterministic models of sympatric speciation driven by
//! cooperation and competition on a one-dimensional phenotype lattice.
//!
//! Start with [`KernelSet`] and [`SimplexDistribution`]; the individual
//! models live in [`moran`], [`dd`] and [`conditioned`], and the analysis of
//! the deterministic fitness landscape in [`landscape`].

pub mod conditioned;
pub mod dd;
pub mod error;
pub mod fitness;
pub mod kernels;
pub mod landscape;
mod linalg;
pub mod moran;
pub mod params;
pub mod record;
pub mod sampling;
pub mod seed;
pub mod simplex;
pub mod space;

pub use error::{Error, Result};
pub use fitness::{fitness, mean_fitness, potential};
pub use kernels::{CapacitySpec, InteractionSpec, KernelSet, KernelSpec, StepForm};
pub use params::ModelParams;
pub use record::{RunRecord, Snapshot};
pub use seed::{derive_seed, stream, StreamRng, StreamTag};
pub use simplex::{sup_distance, SimplexDistribution};
pub use space::PhenotypeSpace;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/kernels.md")]
    struct Kernels;
    #[doc = include_str!("../../../book/src/moran.md")]
    struct Moran;
    #[doc = include_str!("../../../book/src/landscape.md")]
    struct Landscape;
    #[doc = include_str!("../../../book/src/dd.md")]
    struct Dd;
}
