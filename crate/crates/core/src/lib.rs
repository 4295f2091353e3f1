//! Monte-Carlo link simulator for tangent artificial noise (AN) on
//! phase-keyed Fourier-curve constellations.
//!
//! The pipeline is the usual BICM chain: LDPC encode, natural-binary
//! mapping onto the curve codebook, tangent-AN injection and AWGN, a soft
//! demapper (Euclidean, rank-one matched, or Woodbury fading-aware), max-log
//! LLRs and a scaled min-sum decoder. Around it sit the statistics
//! (Clopper-Pearson bounds, BICM achievable rate), a bounded-search
//! eavesdropper and the sweep harness used by the `anlink` CLI.

pub mod adversary;
pub mod analysis;
pub mod channel;
pub mod constellation;
pub mod demapper;
mod error;
pub mod harness;
pub mod ldpc;
pub mod link;

pub use adversary::{AttackBudget, AttackKind, AttackOutcome};
pub use analysis::{AirSample, CpInterval};
pub use channel::{FadingProfile, LinkParams, Observation, ToneGains};
pub use constellation::{Codebook, CodebookKind, PhaseKey, QuantizationSpec};
pub use demapper::{Accounting, LlrFrame, MetricVector};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Scenario, SweepResult};
pub use ldpc::{DecodeResult, ParityCheck};

/// Identifier of the build that produced a result row.
pub const BUILD_ID: &str = env!("ANLINK_BUILD_ID");
