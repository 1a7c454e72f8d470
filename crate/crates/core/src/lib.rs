//! Delay-based reservoir computing with single-variable dynamics.
//!
//! Two routes to the linear memory capacity of a time-multiplexed delay
//! reservoir:
//!
//! * **Direct**: integrate the nonlinear delay rule under a masked random
//!   input stream, harvest the centered state matrix, train a ridge readout
//!   and sum the capacities of all linear recall tasks.
//! * **Analytic**: linearize the rule at its operating point, build the
//!   modified state matrix from the (a, b, c) coefficients, the mask and the
//!   timing alone, and read the same capacities from a small quadratic form —
//!   no integration, no input sequence.
//!
//! The two agree for small inputs; the analytic route is orders of magnitude
//! faster and depends only on the linearization, so any two reservoirs with
//! matching (a, b) share one prediction. For systems without known equations
//! the coefficients can be recovered from two harmonic probe responses
//! (`sysid`).

pub mod chi2;
pub mod config;
pub mod error;
pub mod input;
pub mod integrate;
pub mod mmf;
pub mod model;
pub mod readout;
pub mod state;
pub mod sysid;
pub mod timing;

pub use config::{load_config, parse_config, ResolvedConfig, SimSection};
pub use error::{Error, Result};
pub use input::{input_signal, InputSequence, Mask};
pub use integrate::{integrate_dde, DdeStepper, HistoryBuffer};
pub use mmf::{
    binomial_term, mmf_capacity_spectrum, mmf_lambda, mmf_memory_capacity,
    modified_state_matrix, modified_state_matrix_auto, Linearization, MapCoefficients,
    ModifiedStateMatrix,
};
pub use model::{
    LinearDdeParams, MackeyGlassParams, ReservoirModel, StuartLandauParams,
};
pub use readout::{
    capacity, chi2_threshold, memory_capacity, memory_capacity_auto, nrmse, recall_target,
    train_ridge, CapacitySpectrum, RidgeConfig,
};
pub use state::StateMatrix;
pub use sysid::{identify, measure_gain, recover_ab, IdentifiedLinearization, ProbeConfig};
pub use timing::TimingConfig;
