//! Reward computation and evaluation for generative scene graph models.
//!
//! Numeric building blocks (geometry, assignment, embeddings, clustering,
//! policy math) are generic over [`Scalar`]; the scene graph layer works in
//! [`Real`].

pub mod assignment;
pub mod augment;
pub mod cluster;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod gspo;
pub mod reward;
pub mod scalar;
pub mod structured_io;

pub use embedding::{EmbeddingSource, EmbeddingStore, EmbeddingVector};
pub use error::{Error, Result};
pub use graph::{DatasetProfile, ObjectInstance, RelationTriplet, SceneGraph};
pub use reward::{composite_reward, RewardBreakdown, RewardConfig};
pub use scalar::Scalar;

/// Scalar used by the domain layer.
pub type Real = f64;

pub type Embedding = EmbeddingVector<Real>;
pub type Embedding32 = EmbeddingVector<f32>;
pub type BoundingBox = graph::BoundingBox<Real>;
pub type DbscanParams = cluster::DbscanParams<Real>;
pub type PolicyGroup = gspo::PolicyGroup<Real>;
pub type PolicySample = gspo::Sample<Real>;
pub type GspoResult = gspo::GspoResult<Real>;

/// Version tag written into every JSON document the engine emits.
pub const SCHEMA_VERSION: &str = "1";
