//! Small fully connected networks with hand-written backpropagation, a replay
//! buffer, and TD3-style critics used for policy-gradient variation.

mod adam;
mod buffer;
mod mlp;
mod td3;

pub use adam::Adam;
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use mlp::{ForwardCache, Mlp, MlpSpec, OutputActivation};
pub use td3::{
    actor_objective_grad, critic_loss_grad, pg_mutate, soft_update, train_networks, ObjectiveTrainState,
    RewardSelector, Td3Config,
};
