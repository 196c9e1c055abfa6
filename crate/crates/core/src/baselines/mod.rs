//! SEIR-family comparison models.

pub mod compare;
pub mod network;
pub mod seir;

pub use compare::{compare_models, Comparison};
pub use network::{simulate_network_seir, Compartment, ContactNetwork, NetworkRun, NodeTimeline};
pub use seir::{
    default_checkpoint_dates, seir_derivative, simulate_daily_seir, simulate_extended_seir, simulate_seir, Checkpoint,
    ParamOverrides, SeirParams, SeirState, Trajectory,
};
