//! The toy dual-encoder network, its optimizer and training loop.

mod layers;
mod network;
mod optim;
mod predict;
mod train;

pub use network::{
    Layer, Layout, LossBreakdown, ModelConfig, Objective, Prediction, Sample, Slot, ToyModel, RADAR_CHANNELS,
    VISUAL_CHANNELS,
};
pub use optim::{Adam, PlateauSchedule};
pub use predict::{
    point_predictions, predict_dataset, FramePredictions, GroundTruthOracle, PointPrediction, PredictionStore,
    Predictor,
};
pub use train::{build_sample, evaluate_loss, model_inputs, train, train_with, EpochRecord, TrainConfig};
