//! Layer-wise discourse relation probing over pretrained transformer
//! embeddings.
//!
//! The crate covers the whole pipeline short of running a neural network:
//!
//! - [`pdtb`]: parse PDTB 2.0 pipe annotations, simplify senses, serialize
//!   relations into probe instances and assign splits.
//! - [`embedding`]: the `DPRB0001` layer dump format, token/character
//!   alignment and the pooling that builds each feature variant.
//! - [`extraction`]: the manifest handed to an external extractor and the
//!   check applied to the dump it returns.
//! - [`probe`]: a two-layer MLP classifier with exact backpropagation.
//! - [`runner`]: experiment matrix planning, parallel cell execution,
//!   discourse-aware layer selection and CSV reports.
//! - [`synthetic`]: a seeded stand-in for real dumps with an optional planted
//!   class signal, so the pipeline can be exercised without checkpoints.
//! - [`nmt`]: document-context corpus construction and initialization /
//!   freezing plans for translation models built from pretrained layers.

pub mod embedding;
pub mod extraction;
pub mod nmt;
pub mod pdtb;
pub mod probe;
pub mod runner;
pub mod seed;
pub mod span;
pub mod synthetic;

pub use span::CharSpan;
