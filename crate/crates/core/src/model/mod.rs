//! The conditional Wave-U-Net: configuration, parameters, forward and
//! backward passes, checkpoints and gradient verification.

mod checkpoint;
mod config;
mod gradcheck;
mod network;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub(crate) use checkpoint::{f32_blob, f32_from_blob, read_container, write_container};
pub use config::ModelConfig;
pub use gradcheck::{
    gradient_check, gradient_check_case, CheckCase, CheckSize, GradCheckReport, ParamCheck,
    MAX_CHECK_PARAMETERS,
};
pub use network::{build, forward, ConditioningInput, ConvSlot, Layout, Network, Parameters, Trace};
pub use tensor::{
    conv1d, conv1d_backward, conv_geometry, upsample2, upsample2_backward, ConvWeights, Real, Tensor,
};
