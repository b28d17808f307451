//! Minimal dense neural-network substrate: conv / FC / ReLU layers with
//! hand-written backward passes, plain SGD and the two training losses.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod params;
pub mod tensor;

pub use layers::{ConvGeometry, LayerSpec, SeqCache, Sequential};
pub use loss::{dqn_loss, dqn_target, rmse_loss};
pub use network::{
    Architecture, ConvSpec, JointCache, JointNet, JointOutput, SingleCache, SingleNet,
};
pub use params::{ParamId, ParameterSet};
pub use tensor::Tensor;
