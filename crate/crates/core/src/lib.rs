//! Semi-supervised node classification without message passing.
//!
//! A node-level predictor (linear or two-layer MLP) is trained on node
//! features augmented with distance-weighted histograms of nearby training
//! labels, regularized by a neighbor-consistency cross-entropy, and
//! retrained over several rounds of smoothed, confidence-filtered
//! pseudo-labels. Inference is one forward pass per node.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod featurize;
pub mod graph;
pub mod labels;
pub mod model;
pub mod scalar;
pub mod trainer;

pub use data::{Dataset, SbmConfig, SplitMode, SplitSpec};
pub use error::{Error, Result};
pub use featurize::{HistogramConfig, HistogramMode};
pub use graph::{Graph, NodeRemap, NormalizedAdjacency};
pub use labels::{LabelSet, NodeRole};
pub use model::{Backbone, LossBreakdown, LossOptions, Model, Targets};
pub use scalar::Scalar;
pub use trainer::{TrainConfig, TrainOutcome};

/// Dense row-major matrix used for features, predictions and histograms.
pub type Matrix<T> = ndarray::Array2<T>;

pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type NormalizedAdjacency32 = NormalizedAdjacency<f32>;
pub type NormalizedAdjacency64 = NormalizedAdjacency<f64>;
pub type Targets32 = Targets<f32>;
pub type Targets64 = Targets<f64>;
