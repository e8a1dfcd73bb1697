//! Monte-Carlo ratio experiments and the off-diagonal probe.
//!
//! Every estimator is deterministic given its seed: trial `i` draws its
//! noise from `derive_seed(seed, i)`, trials may run in parallel, and the
//! per-trial results are reduced in trial order with pairwise sums.

pub mod classical;
pub mod conical;
pub mod deterministic;
pub mod families;
pub mod offdiag;
pub mod random;
pub mod setup;
pub mod weighted;

pub use classical::{classical_vs_conical, ClassicalRow, ClassicalVsConical};
pub use conical::{conical_ratio, conical_ratios, estimate_constant, shipped_families, moment_ratio, MomentRatio, RegularityReport};
pub use deterministic::{deterministic_ratio, DeterministicReport};
pub use families::Family;
pub use offdiag::{offdiag_probe, uniform_bound, BoxGeometry, LatticeBox, OffDiagReport, OffDiagSample};
pub use random::{random_field, random_mean_zero};
pub use setup::{GridDescriptor, GridSpec, Setup};
pub use weighted::{exact_weighted_l2, weighted_l2_check, WeightedL2Report};

/// Max/min of a list of positive ratios (the refinement-drift statistic).
pub fn drift(ratios: &[f64]) -> f64 {
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}
