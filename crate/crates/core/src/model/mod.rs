//! Network-facing math: tensors and their file format, jet input encoding,
//! the composite grasp loss with analytic gradients, and oracle predictors
//! that stand in for a trained model.

mod encode;
mod loss;
mod oracle;
mod tensor;

pub use encode::{encode_input, jet, DEFAULT_FAR, DEFAULT_NEAR};
pub use loss::{
    loss_contact, loss_tcp, loss_with_gradient, quaternion_distance, LossBreakdown, LossWeights, NegativeSampling,
    BCE_CLAMP, CONTACT_CHANNELS, TCP_CHANNELS,
};
pub use oracle::{oracle_predict, oracle_predict_tcp, perturbed_oracle, PerturbParams, ORACLE_HIGH, ORACLE_LOW};
pub use tensor::{Tensor, TENSOR_MAGIC};
