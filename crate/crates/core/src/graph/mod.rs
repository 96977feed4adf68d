//! Graph data model, dataset ingestion, ego-graph extraction, the synthetic
//! imbalanced benchmark, and stratified splits.

mod ego;
mod io;
mod split;
mod synth;
mod types;

pub use ego::extract_ego_graph;
pub use io::{
    content_checksum, load_graph, load_graph_dir, save_graph, GraphIoError, GraphManifest,
    IngestReport,
};
pub use split::{split_dataset, DatasetSplit, SplitError};
pub use synth::{synthesize_benchmark, BenchmarkConfig, SynthError};
pub use types::{AttributedGraph, EgoGraph, EgoOrigin, Label};
