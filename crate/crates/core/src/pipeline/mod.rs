//! End-to-end orchestration behind the command-line driver: configuration,
//! stage wiring, artifact writers with schema checks, the invariant
//! verifier and the primitive-count benchmark.

mod bench;
mod config;
mod stages;
mod verify;

pub use bench::{bench, bench_csv, BenchRow, BENCH_HEADER};
pub use config::{FeatureKind, GridSize, PipelineConfig};
pub use stages::{
    cluster_config, embed, ensure_dir, features, fuse, hierarchy, load_input, losses_csv, pos_scale_for, segment,
    stack_config, validate_outputs, write_embedding, write_fusion, write_hierarchy, write_segment, Embedding, Fusion,
    HierarchyStage, SegmentJson, Segmentation, COMPACTNESS_M, LOSSES_HEADER,
};
pub use verify::{report, run_suites, suites, Faults, Suite, SuiteResult};
