//! Average-cost analysis of finite MDPs: exact and Monte Carlo evaluation of
//! average costs, occupation measures and their stationary decomposition,
//! the stationary minimum pair via the occupation-measure LP, vanishing
//! discount sweeps, recurrence diagnostics for birth-reset chains, and checks
//! of the (G), (SU) and (M) conditions.
//!
//! ```
//! use minpair::{solve_min_pair, ActionSpec, FiniteMdp};
//!
//! let model = FiniteMdp::new(1, vec![vec![
//!     ActionSpec::dense(0, &[1.0], 5.0),
//!     ActionSpec::dense(1, &[1.0], 2.0),
//! ]]);
//! let sol = solve_min_pair(&model).unwrap();
//! assert!((sol.rho_star - 2.0).abs() < 1e-12);
//! ```

pub mod certify;
pub mod chain;
pub mod error;
pub mod evaluator;
pub mod io;
pub mod lp;
pub mod mdp;
pub mod minpair;
pub mod models;
pub mod occupancy;
pub mod rng;

pub use chain::{
    classify_series, escape_probability, f_regularity_probe, hitting_analysis_exact, hitting_analysis_mc, BetaFamily,
    BirthResetChain, Classification, CostFamily, ExpectedTime, RecurrenceReport, SeriesVerdict, Ternary,
};
pub use error::{Error, Result};
pub use evaluator::{
    discount_sweep, discounted_value_iteration, expected_average_cost, pathwise_average_cost, AverageCostEstimate,
    DiscountedSolution, PathwiseEstimate,
};
pub use mdp::{
    simulate, ActionSpec, FiniteMdp, HorizonMode, MarkovPolicySequence, Policy, StationaryPolicy, Trajectory, Violation,
};
pub use minpair::{solve_min_pair, verify_minimum_pair, MinPairSolution, VerificationReport, VerifyOptions};
pub use occupancy::{decompose, empirical_occupancy, exact_cesaro_occupancy, OccupationMeasure, StationaryPairReport};
