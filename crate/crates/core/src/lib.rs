//! Channel estimation and passive reflection design for an IRS-aided
//! multicast downlink, driven only by user power measurements.
//!
//! The pipeline is split into:
//!
//! * [`channel`]: scenario geometry, Rician/Rayleigh channel generation and
//!   exact SNR evaluation.
//! * [`measurement`]: random discrete training reflections and Q-sample RSRP.
//! * [`estimator`]: the two-neuron real-valued network whose weights encode
//!   the stacked direct + cascaded channel, trained with SGD.
//! * [`optimizer`]: max-min SNR reflection design (geometry method for one
//!   user, semidefinite relaxation with randomization, successive refinement).
//! * [`baselines`]: RMS and CSM reflection selection straight from the
//!   measurement table.
//! * [`harness`]: end-to-end Monte-Carlo experiments and CSV reporting.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod measurement;
pub mod optimizer;
pub mod oracle;
pub mod phase;

pub use channel::{ChannelRealization, ScenarioConfig};
pub use error::{Error, Result};
pub use estimator::{ChannelEstimate, GammaWeights, TrainConfig};
pub use linalg::{CMat, CVec};
pub use measurement::MeasurementTable;
pub use optimizer::{ReflectionSolution, Strategy};
pub use phase::{PhaseAlphabet, ReflectionSet};

pub use num_complex::Complex64;
