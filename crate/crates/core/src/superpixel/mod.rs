//! Soft superpixel clustering over a regular grid.
//!
//! Each pixel is associated with the 9 grid cells around its home cell.
//! Clustering alternates between weighted-mean centers and a softmax
//! reassignment over those candidates, then takes hard labels by argmax.

mod assoc;
mod centers;
mod cluster;
mod connectivity;
mod loss;
mod map;
mod update;

pub use assoc::{home_cell, SoftAssociation, CANDIDATES};
pub use centers::{compute_centers, compute_centers_matrix, Centers};
pub use cluster::{cluster, init_grid, ClusterConfig, ClusterOutput, LossRecord};
pub use connectivity::enforce_connectivity;
pub use loss::{compactness_loss, reconstruction_loss};
pub use map::{label_components, SuperpixelMap};
pub use update::update_association;
