//! Center-difference graph convolution over superpixel graphs.
//!
//! Each node's neighborhood (itself included) is split into three subsets by
//! centroid distance to the graph's mean centroid. A layer mixes the plain
//! neighbor aggregate with an aggregate of neighbor-minus-center differences:
//!
//! `σ( α·Σ c_ij (h_j − h_i) W_η + (1 − α)·Σ c_ij h_j W_η )`
//!
//! which in matrix form is `σ(Σ_k (C_k H − α c̄_k⊙H) W_k)`.

mod layer;
mod operator;
mod partition;
mod project;
mod stack;

pub use layer::{
    cdgc_forward, cdgc_forward_matrix, cdgc_forward_nodewise, difference_term, forward, forward_cached, gcn_forward,
    layer_gradients, matrix_pre, matrix_pre_signed, nodewise_pre, vanilla_term, Activation, CdgcLayer, ForwardCache,
    LayerGrads, SubsetWeights,
};
pub use operator::{Csr, Propagation, SubsetNorm};
pub use partition::{classify, partition, PartitionMap, Subset, RADIUS_TOL};
pub use project::{project_pixels_to_nodes, smooth_pixels};
pub use stack::{embeddings_csv, stack_forward, MdgcnStack, StackConfig};
