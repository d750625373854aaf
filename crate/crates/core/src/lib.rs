//! Non-adaptive group testing with Bernoulli designs: rate bounds,
//! design sampling, the COMP/DD/SCOMP/SSS decoders, brute-force oracles
//! and Monte Carlo experiments.

pub mod bits;
pub mod decoders;
pub mod design;
pub mod error;
pub mod experiments;
pub mod optimize;
pub mod oracle;
pub mod rates;
pub mod rng;

pub use bits::BitVec;
pub use decoders::{Algorithm, DecodeResult, Uniqueness};
pub use design::{DefectiveSet, OutcomeVector, TestDesign};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, SuccessCurve, SuccessPoint, ThresholdEstimate};
pub use rates::{BoundKind, CapacityRegime, NuParam, ProblemScale, RateBound};
