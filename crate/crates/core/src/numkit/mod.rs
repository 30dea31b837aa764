//! Numerical substrate: seeded random streams, preprocessing transforms,
//! dense networks with exact backpropagation, Adam and binary cross-entropy.

mod adam;
mod loss;
mod net;
mod preprocess;
mod rng;

pub use adam::AdamState;
pub use loss::{bce_grad, bce_loss, PROB_CLAMP};
pub use net::{
    sigmoid, Activation, BatchNorm, DenseNet, ForwardCache, Gradients, Layer, LayerGradients,
    LayerSpec, Mode, LEAKY_RELU_SLOPE,
};
pub use preprocess::{fit_transform_scaler, impute_mean, MeanImputer, StandardScaler};
pub use rng::Rng;
