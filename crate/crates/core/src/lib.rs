//! Basic recurrent neural network (bRNN).
//!
//! The model is a discrete-time state-space system
//!
//! ```text
//! x[k+1] = A x[k] + U h[k] + W s[k] + b      k = 0..N-1
//! h[k]   = σ(x[k])                            k = 0..N
//! y[k]   = V h[k] + Dft s[k] + c              k = 0..N
//! ```
//!
//! where `A` is a fixed stable matrix and everything else is trainable.
//! Gradients are obtained from the co-state (Lagrange multiplier) recursion
//! run backward in time, which is exactly backpropagation through time
//! written as a linear dynamic system. The crate also carries an
//! independent finite-difference oracle, a Liapunov/BIBO stability
//! analysis of the forward dynamics, synthetic regression tasks and a
//! small command-line front end.
//!
//! Module map:
//!
//! * [`model`] parameters, nonlinearities and the forward pass
//! * [`loss`] cost breakdown and state-loss gradients
//! * [`adjoint`] co-states and per-step gradient contributions
//! * [`trainer`] aggregation rules, updates and the training loop
//! * [`stability`] stable `A` construction, BIBO bound, Liapunov region
//! * [`verify`] finite-difference oracle and gradient comparison
//! * [`tasks`] dataset generators and the dataset CSV format
//! * [`checkpoint`] plain-text parameter files
//! * [`cli`] the `brnn` command

pub mod adjoint;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod loss;
pub mod model;
pub mod rng;
pub mod stability;
pub mod tasks;
pub mod trainer;
pub mod verify;

pub use adjoint::{backward_costates, final_costate, per_step_gradients, CostateSeq, GradSeq};
pub use error::{BrnnError, Result};
pub use loss::{state_loss_grad, total_cost, CostBreakdown, LossWeights, StateLossKind};
pub use model::{
    apply_nonlinearity, forward, nonlinearity_derivative, BrnnParams, Dims, Nonlinearity, Sequence,
    Trajectory,
};
pub use stability::{
    bibo_bound, lyapunov_region, make_stable_a, LyapunovRegion, StabilityReport, StableScheme,
};
pub use trainer::{
    aggregate, apply_update, train, Aggregation, EpochMetrics, GradSet, TrainConfig,
};
pub use verify::{compare_gradients, numeric_gradient, GradCheckReport};

pub use nalgebra::{DMatrix, DVector};
