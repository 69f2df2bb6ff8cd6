//! Latent structure refinement for document-level relation extraction.
//!
//! The pipeline encodes each sentence with a BiLSTM, builds mention, entity
//! and dependency-path nodes, induces a soft document graph from the
//! Matrix-Tree theorem, propagates over it with densely connected graph
//! convolutions (re-inducing the graph after every block), and scores every
//! ordered entity pair with a bilinear sigmoid classifier.

pub mod numerics;
pub mod docmodel;
pub mod induction;
pub mod encoder;
pub mod reasoner;
pub mod model;
pub mod harness;
