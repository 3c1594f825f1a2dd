//! Minimal feed-forward network: rectifier hidden layers, independent sigmoid
//! outputs, exact backprop of the masked objective, SGD with momentum.

mod checkpoint;
mod model;
mod optimizer;
mod schedule;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
};
pub use model::{BatchOutput, Dense, Gradients, Mlp};
pub use optimizer::Sgd;
pub use schedule::LrSchedule;
