//! Training-phase learners: behavioral cloning and adversarial imitation.

pub mod bc;
pub mod discriminator;
pub mod gae;
pub mod irl;
pub mod policy;
pub mod ppo;
pub mod value;

pub use bc::{bc_loss, bc_train, BcConfig, BC_LOG_STD};
pub use discriminator::{
    concat, discriminator_loss, discriminator_update, reward, reward_from_prob, Discriminator,
    Normalizer, D_MAX, D_MIN,
};
pub use gae::{gae_advantages, normalize_advantages};
pub use irl::{irl_train, log_to_csv, write_log, IrlConfig, IrlLogRow, IrlOutcome, LOG_HEADER};
pub use policy::{GaussianPolicy, PolicyMode};
pub use ppo::{policy_update, PpoBatch, PpoOptimizers, UpdateStats};
pub use value::ValueFn;
