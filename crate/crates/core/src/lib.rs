//! Multiscale superpixel graphs for visual representation.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`superpixel`] soft-clusters per-pixel features into a grid of
//!    superpixels, each pixel associated with its 9 surrounding grid cells.
//! 2. [`hierarchy`] builds the region adjacency graph of the resulting label
//!    map and coarsens it with Boruvka minimum-spanning-tree merging.
//! 3. [`cdgc`] runs center-difference graph convolution over every scale.
//! 4. [`fusion`] pools the fine and coarse scales into a three-level tree and
//!    enhances it bottom-up with a child-sum Tree-LSTM.
//!
//! [`pipeline`] wires the stages together and backs the `supergraph` binary.

pub mod cdgc;
pub mod error;
pub mod fixtures;
pub mod fusion;
pub mod hierarchy;
pub mod imageio;
pub mod numerics;
pub mod pipeline;
pub mod superpixel;

pub use error::{Error, Result};
