//! The training workload executed by each function replica.

mod cv;
mod handler;
mod pac;
mod tfidf;
mod tokenize;

pub use cv::{fold_bounds, kfold_cv, CandidateScore, CvConfig, CvResult};
pub use handler::{
    decode_response, handle_training_request, HandlerOutput, TrainingResponse, STATUS_BAD_REQUEST,
    STATUS_OK, STATUS_UNPROCESSABLE,
};
pub use pac::{accuracy, pac_predict, pac_train, visit_order, PacHyperParams, PacModel, MAX_EPOCHS};
pub use tfidf::{SparseVector, TfIdfModel};
pub use tokenize::tokenize;
