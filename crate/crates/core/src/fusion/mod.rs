//! Three-level fusion: fine-scale leaves, coarse-scale branches and a root
//! fed by `Y₁ = W_a ā + W_b b̄`, enhanced bottom-up by a child-sum Tree-LSTM.

mod lstm;
mod tree;

use serde::{Deserialize, Serialize};

pub use lstm::{
    cell_gradcheck, cell_gradcheck_corrupted, cell_gradients, tree_lstm_up, BlockCheck, CellGrads, Gate,
    GradcheckReport, NodeState, TreeLstmCell, TreeStates, GRAD_FLOOR,
};
pub use tree::{build_tree, root_fusion, FusionWeights, LevelTree};

/// Fused representation written for downstream consumers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionJson {
    pub root: Vec<f64>,
    pub branches: Vec<Vec<f64>>,
    pub leaves: Vec<Vec<f64>>,
    pub root_input: Vec<f64>,
    pub leaf_parent: Vec<usize>,
}

impl FusionJson {
    pub fn new(tree: &LevelTree, states: &TreeStates) -> Self {
        Self {
            root: states.root.h.clone(),
            branches: states.branch_hidden(),
            leaves: states.leaf_hidden(),
            root_input: tree.root_feat.clone(),
            leaf_parent: tree.leaf_parent.clone(),
        }
    }
}
