//! Simulation and post-processing for time-bin measurement-device-independent
//! quantum key distribution with four-intensity decoy states.
//!
//! The stack runs from a seeded per-round simulator through sifting and
//! tallying, decoy-state linear programs and the key-rate formula, to a
//! one-time pad that consumes the resulting key.
//!
//! ```no_run
//! use mdiqkd::{ExperimentConfig, pipeline};
//!
//! let mut cfg = ExperimentConfig::paper_50km();
//! cfg.pulse_pairs = 10_000_000;
//! let table = pipeline::simulate_tally(&cfg, &Default::default()).unwrap();
//! let rates = table.rates();
//! let est = mdiqkd::decoy::estimate_from_rates(&rates, &cfg).unwrap();
//! let report = mdiqkd::keyrate::key_rate(&rates, &est, &(&cfg).into());
//! println!("{report}");
//! ```

pub mod bsm;
pub mod config;
pub mod decoy;
pub mod expected;
pub mod keyrate;
pub mod lp;
pub mod model;
pub mod otp;
pub mod pipeline;
pub mod seed;
pub mod source;
pub mod tally;

pub use bsm::Simulator;
pub use config::{ConfigError, ExperimentConfig};
pub use decoy::{DecoyEstimate, DecoyError};
pub use keyrate::{KeyRateReport, KeyRateSettings};
pub use model::{Basis, Clicks, PulsePairOutcome};
pub use otp::{KeyMaterial, OtpError};
pub use tally::{RatesTable, TallyTable};
