//! Asymptotic and finite-size secret-key rates for decoy-free
//! weak-coherent-pulse BB84, NPAB BB84 and SARG04.
//!
//! The rate is obtained by minimizing the relative entropy
//! `D(G(ρ) ‖ Z(G(ρ)))` over states consistent with the observed statistics,
//! using Frank-Wolfe iterations whose linear subproblems are solved by a
//! primal-dual interior-point method. The certified lower bound from the
//! linearization (never the primal value) enters the reported rate.

pub mod channel;
pub mod error;
pub mod finitesize;
pub mod measure;
pub mod numerics;
pub mod protocol;
pub mod solver;
pub mod source;
pub mod sweep;

pub use channel::{expected_frequencies, ChannelScenario, ExpectedFrequencies};
pub use error::{Error, Result};
pub use finitesize::{finite_key_length, FiniteKeyResult, FiniteScenario, SecurityParams};
pub use protocol::{build_gmap, GMap, ProtocolKind, ProtocolSpec};
pub use solver::{asymptotic_rate, ConstraintSet, KeyRateResult, SolverConfig, Status, Structure};
pub use source::{Basis, Signal, SourceConfig};
pub use sweep::{
    evaluate_point, optimize_mu, optimize_theta_npab, run_sweep, Axis, FiniteSettings, FixedParams,
    PointResult, PointSettings, SweepPlan, SweepRow,
};
