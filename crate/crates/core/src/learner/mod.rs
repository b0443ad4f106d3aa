//! Deep Q-learning from scratch: network, optimizer, replay, schedule, training loop.

pub mod adam;
pub mod checkpoint;
pub mod dqn;
pub mod network;
pub mod replay;
pub mod schedule;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dqn::{select_action, sync_target, td_loss_and_grad, td_update};
pub use network::{argmax, Dense, Gradients, QNetwork};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;
pub use train::{train, EpisodeLog, TrainOutcome, Trainer, TrainingLog};
