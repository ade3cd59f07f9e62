//! Contrastive training: positive-pair batches, the NT-Xent objective,
//! optimizers, the silhouette-selected training loop and supervised
//! fine-tuning with a classification head.

pub mod batch;
pub mod finetune;
pub mod loss;
pub mod optim;
pub mod train;

pub use batch::{build_batch_sad, build_batch_tps, plan_tps_batches, ContrastiveBatch};
pub use finetune::{supervised_finetune, ClassifierHead, FinetuneConfig, FinetuneOutcome};
pub use loss::{nt_xent, nt_xent_gradient, nt_xent_loss};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use train::{
    evaluate_encoder, train, train_with_observer, EpochRecord, EvalSummary, Evaluation, Method, TrainConfig,
    TrainObserver, TrainOutcome, DEFAULT_SILHOUETTE_CAP, DESK_LEARNING_RATE,
};
