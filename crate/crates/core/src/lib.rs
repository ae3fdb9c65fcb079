//! Semantic polarity fields over corpus boundaries.
//!
//! The pipeline: embed documents, project the embeddings onto a
//! low-dimensional manifold, cluster the manifold into topics, split each
//! topic by a human-defined two-regime boundary, and read the per-topic
//! centroid displacements as a vector field. Field-level statistics are
//! tested against permuted boundaries, benchmarked against sentiment and
//! lexicon representations, and individual vectors are explained
//! contrastively by a chat model.
//!
//! All numeric stages are generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the concrete aliases below pin the two standard
//! instantiations. On-disk matrices always store `f32`, so the `f32`
//! pipeline round-trips bit-exactly.

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod explain;
pub mod field;
pub mod lexicon;
pub mod manifold;
pub mod matrix_io;
pub mod num;
pub mod stats;

pub use num::Real;

/// Single-precision pipeline types (matching the on-disk matrix format).
pub type Embeddings32 = embed::Embeddings<f32>;
pub type Projection32 = manifold::Projection<f32>;
pub type PolarityField32 = field::PolarityField<f32>;

/// Double-precision instantiations, for callers that need tight algebraic
/// tolerances.
pub type Embeddings64 = embed::Embeddings<f64>;
pub type Projection64 = manifold::Projection<f64>;
pub type PolarityField64 = field::PolarityField<f64>;
