//! Desk-scale local models.
//!
//! Teachers and the student are multinomial logistic regressions or
//! nearest-centroid classifiers; kNN voting runs over a pluggable
//! [`FeatureMap`].

mod classifier;
mod dataset;
mod feature_map;
mod knn;
pub mod vvft;

pub use classifier::{
    predict, softmax_loss_grad, train_classifier, train_student, Classifier, ClassifierKind,
    TrainConfig,
};
pub use dataset::AgentDataset;
pub use feature_map::{FeatureMap, FeatureMapKind};
pub use knn::{default_k, knn_predict, KnnIndex};
