//! AMP detection for coded large random linear systems.
//!
//! Scalar MMSE transfers, state evolution, constrained capacity and achievable rates,
//! a Monte Carlo AMP receiver with LDPC APP decoding, and curve-matched code design.

pub mod amp;
pub mod constellation;
pub mod curve;
pub mod error;
pub mod harness;
pub mod ldpc;
pub mod matching;
pub mod mmse;
pub mod par;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod se;

pub use amp::{
    run_amp, run_amp_coded, run_amp_uncoded, AmpOptions, AmpTrace, ChannelInstance, CodedAmpOptions, CodedRun,
};
pub use constellation::{Constellation, Label};
pub use curve::{MseTransfer, TransferCurve};
pub use error::{Error, Result};
pub use ldpc::{DegreeDistribution, LdpcCode};
pub use mmse::{omega_s, MmseTable};
pub use rates::RateKind;
pub use se::{phi, phi_inv, se_fixed_point, SystemConfig};
