//! From-scratch sparse autoencoder: model, objective, gradients, training.

mod adam;
mod loss;
mod model;
mod train;

pub use adam::AdamParams;
pub use loss::{
    loss, loss_and_gradients, loss_and_gradients_with, loss_per_sample, loss_with, LossBreakdown,
    ParamGrads, SparsityPenalty, Workspace,
};
pub use model::{Forward, Nonlinearity, SaeError, SaeModel};
pub use train::{
    evaluate, init_model, train, train_from, EvalLoss, HistoryRow, InitConfig, NonlinearityKind,
    TrainConfig, TrainError, TrainResult,
};
