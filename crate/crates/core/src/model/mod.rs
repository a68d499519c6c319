//! Miniature transformer encoder with span and relation classifiers.
//!
//! The forward pass is recorded on a [`tape::Tape`] and differentiated in
//! reverse mode. All arithmetic is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod gradcheck;
pub mod heads;
pub mod loss;
pub mod params;
pub mod pretrain;
pub mod sampling;
pub mod tape;
pub mod tensor;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::EncoderConfig;
pub use encoder::{encode, encode_eval, Dropout};
pub use heads::{classify_entity, classify_relation};
pub use loss::{joint_loss, mlm_loss, JointLoss, MlmExample, TrainingExample};
pub use params::ModelParams;
pub use pretrain::{pretrain, PretrainConfig};
pub use sampling::sample_negatives;
pub use tensor::Mat;
pub use train::{train, EpochMetrics, MaskingSetup, TrainConfig};
