//! Dense tanh networks with hand-written backpropagation, an Adam/SGD
//! optimizer and a binary checkpoint format.

mod checkpoint;
mod mlp;
mod optim;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, Head};
pub use mlp::{Dense, Gradients, Mlp, Trace};
pub use optim::{Optimizer, OptimizerKind};

/// Hidden layer widths used by every function approximator unless overridden.
pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];
