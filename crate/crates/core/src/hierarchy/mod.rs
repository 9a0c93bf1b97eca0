//! Region adjacency graphs and their Boruvka coarsening into scales.

mod assoc;
mod boruvka;
mod graph;
mod io;

pub use assoc::{coarsen_association, NodeAssociation};
pub use boruvka::{boruvka_merge, boruvka_order, edge_order, MergeRecord, MergeStep, ScaleHierarchy};
pub use graph::{build_rag, edge_weights, SpGraph};
pub use io::{HierarchyJson, NodeJson, ScaleJson};
