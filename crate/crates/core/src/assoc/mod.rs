//! Hierarchical tracklet association.
//!
//! Detections are linked into short tracklets inside each segment, then
//! tracklets are merged level by level with a growing temporal window. Each
//! level scores candidate links with a small linear classifier trained with
//! focal loss.

mod graph;
mod pipeline;
mod scorer;
mod tracklet;
mod train;

pub use graph::{build_level_graph, Edge, EdgeFeature, LevelGraph, DEFAULT_MAX_CANDIDATES};
pub use pipeline::{
    base_tracklets, detection_identities, label_edges, match_and_merge, select_edges, track_sequence,
    tracklet_identity, training_graphs, TrackerConfig, DEFAULT_LEVELS, DEFAULT_MERGE_THRESHOLD,
};
pub use scorer::{
    focal_loss, focal_loss_logit, score_edges, sigmoid, EdgeScorer, FocalLossConfig, LevelWeights, NUM_WEIGHTS,
    PROB_CLAMP,
};
pub use tracklet::{build_tracklets, Member, Tracklet, BASE_IOU_THRESHOLD};
pub use train::{objective, train_edge_scorer, JointGcn, LabeledGraph, ObjectiveValue, TrainConfig, TrainReport, UNFREEZE_AFTER};
