//! Unsupervised sentiment labeling of social-media posts.
//!
//! Posts are normalized and stemmed ([`preprocess`]), weighted with TF-IDF
//! ([`tfidf`]) and clustered with k-means ([`kmeans`]). A cluster →
//! sentiment table then turns the clusters into training labels
//! ([`labels`]), and small dense and 1-D convolutional networks are trained
//! on those labels ([`nn`]). t-SNE ([`tsne`]) and LDA ([`lda`]) give the
//! views used to read the clusters. [`pipeline`] ties the stages together
//! behind a TOML config and writes every artifact under one output
//! directory with a hashed manifest.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! pipeline and file formats use `f64`, and the aliases below name those
//! concrete types.

// Validation deliberately uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod labels;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod tfidf;
pub mod kmeans;
pub mod tsne;
pub mod lda;
pub mod nn;
pub mod metrics;
pub mod plot;
pub mod tables;
pub mod pipeline;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SparseRow = tfidf::SparseRow<f64>;
pub type TfidfMatrix = tfidf::TfidfMatrix<f64>;
pub type ClusterModel = kmeans::ClusterModel<f64>;
pub type Embedding2D = tsne::Embedding2D<f64>;
pub type TopicModel = lda::TopicModel<f64>;
pub type Network = nn::Network<f64>;
pub type TrainedNet = nn::TrainedNet<f64>;
