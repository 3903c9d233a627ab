//! Robust adaptive equalization with logarithmic cost functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`]: BPSK bit streams, training schedules and the hard-decision quantizer.
//! * [`channel`]: time-varying FIR ISI channel with Bernoulli-Gaussian impulsive noise.
//! * [`equalizer`]: linear and decision-feedback equalizers with the SA, LMS, LMF,
//!   LCLMS, LCLMA and normalized LCLMA update rules.
//! * [`analysis`]: closed-form tracking EMSE predictors and the Monte-Carlo oracles
//!   that check them.
//! * [`metrics`]: NASE learning curves, BER and trial averaging.
//! * [`harness`]: experiment configuration, trial orchestration and CSV output.

pub mod analysis;
pub mod channel;
pub mod equalizer;
mod error;
pub mod harness;
pub mod metrics;
pub mod seeding;
pub mod signal;

pub use error::{Error, Result};
