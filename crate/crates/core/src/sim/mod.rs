//! Seedable data generators and a parallel Monte Carlo runner for size and
//! power studies.

pub mod dgp;
pub mod rng;
pub mod scenario;

pub use dgp::{
    break_index, gen_ar1, gen_chi2_standardized, gen_iid_gaussian, gen_regression, RegressorLaw,
};
pub use rng::{replication_rng, seeded_rng, SimRng};
pub use scenario::{
    compare_asymptotic, power_curve, replication_sample, run_scenario, AsymptoticComparison, Dgp,
    GapRow, PowerPoint, ScenarioResult, ScenarioSpec, Sweep, SweepParameter,
};
