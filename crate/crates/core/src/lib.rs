//! Adversarially masked graph autoencoder over subgraph batches.
//!
//! Every task (node, edge, whole-graph) is rewritten as a batch of small
//! subgraphs. A masked GCN autoencoder reconstructs node features while a
//! GCN-readout discriminator tries to tell reconstructed subgraphs from the
//! originals; the frozen encoder plus a pooling readout then feeds linear
//! probes for downstream evaluation.
//!
//! Module map:
//! - [`graph`]: CSR graphs, dataset loaders, induced subgraphs, disjoint-union batches.
//! - [`sampler`]: random walk with restart, node/edge subgraph construction, negatives.
//! - [`compute`]: dense tensors, sparse products, differentiable ops, Adam.
//! - [`model`]: encoder, decoder, mask token and discriminator.
//! - [`objective`]: scaled cosine error and the adversarial losses.
//! - [`trainer`]: the generate-then-discriminate loop and checkpoints.
//! - [`eval`]: metrics and frozen-encoder probes.
//! - [`config`]: strict flat-key run configuration.

pub mod compute;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod objective;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
