//! Bellman-Harris branching trees and the exact laws of their sampled
//! ancestral lineages.
//!
//! A Bellman-Harris process starts from one individual; each individual
//! lives an i.i.d. lifetime with law `μ` and is replaced at death by an
//! i.i.d. number of offspring with law `(p_k)`. Conditioned on survival to a
//! horizon `T`, this crate samples the ancestral lineage of an individual
//! alive at `T` under three rules — a uniform pick realized through i.i.d.
//! markers, a size-biased (Palm) pick, and the leftmost surviving lineage in
//! a planar embedding — and evaluates the exact joint densities of the
//! reproduction times and sizes along each lineage, so that simulation and
//! formula can be compared bin by bin.
//!
//! Numeric kernels are generic over the [`scalar::Scalar`] float type; the
//! unit-lattice lifetime (`μ = δ_1`) additionally gets an exact path over
//! `BigRational` coefficients. The `f64` instantiations used in practice are
//! aliased at the crate root.
//!
//! ```
//! use lineage_core::genfun::build_markov;
//! use lineage_core::sampling::sample_uniform_marker;
//! use lineage_core::simulator::simulate_tree;
//! use lineage_core::theory::s_density;
//! use lineage_core::{Lifetime64, Offspring64, RngStream};
//!
//! let offspring = Offspring64::new(vec![0.5, 0.0, 0.5])?;
//! let lifetime = Lifetime64::exponential(1.0)?;
//! let mut rng = RngStream::new(42, 0);
//! let tree = simulate_tree(&offspring, &lifetime, 2.0, &mut rng, 100_000)?;
//! let record = sample_uniform_marker(&tree, &mut rng);
//! if let Some(s) = record.marker {
//!     let table = build_markov(&offspring, 1.0, 2.0, 200, 51, false)?;
//!     // theoretical density of the observed marker value
//!     let density = s_density(&table, s)?;
//!     assert!(density >= 0.0);
//! }
//! # Ok::<(), lineage_core::Error>(())
//! ```

pub mod distributions;
pub mod error;
pub mod genfun;
pub mod identities;
pub mod poly;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod simulator;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type Offspring64 = distributions::OffspringDistribution<f64>;
pub type Lifetime64 = distributions::LifetimeLaw<f64>;
pub type GenFun64 = genfun::GenFunTable<f64>;
pub type Tree64 = simulator::Tree<f64>;
pub type Record64 = sampling::LineageRecord<f64>;
pub type Histogram64 = stats::JointHistogram<f64>;
pub type Renewal64 = theory::RenewalLaw<f64>;

/// `f32` instantiations, mostly exercised by tests.
pub type Offspring32 = distributions::OffspringDistribution<f32>;
pub type Lifetime32 = distributions::LifetimeLaw<f32>;
pub type GenFun32 = genfun::GenFunTable<f32>;
pub type Tree32 = simulator::Tree<f32>;
pub type Record32 = sampling::LineageRecord<f32>;
