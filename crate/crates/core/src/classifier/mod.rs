//! Gesture classifier over fixed-length frame windows: pooled per-frame
//! features, temporal concatenation and softmax regression.

mod eval;
mod features;
mod model;

pub use eval::{confusion_from_predictions, evaluate, Confusion, EvalReport};
pub use features::{
    extract_features, pool_frame, pool_planes, ChannelMode, FeatureConfig, PoolSource,
};
pub use model::{
    argmax, logits, loss_and_gradient, softmax, train, ClassifierModel, Standardizer,
    TrainConfig, TrainLog, NUM_CLASSES,
};
