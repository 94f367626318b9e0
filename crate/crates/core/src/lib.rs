//! Equilibria of a two-stage Cournot supply chain: capacity-constrained
//! retailers order from a single supplier who posts a wholesale price.
//!
//! * [`second_stage`]: retailer equilibrium for a known demand intercept and price.
//! * [`first_stage`]: supplier's subgame-perfect margin under complete information.
//! * [`bayes`]: supplier's margin when only a belief about demand is available.
//! * [`inefficiency`]: probability of lost trades caused by that uncertainty.
//! * [`oracle`]: brute-force verification engines.
//! * [`cli`]: the `cournot-chain` command-line front end.

pub mod bayes;
pub mod cli;
pub mod distributions;
pub mod first_stage;
pub mod inefficiency;
pub mod oracle;
pub mod second_stage;

pub use bayes::{solve_equilibrium, BayesError, BayesProblem, FixedPointResult};
pub use distributions::{BeliefError, DemandBelief, DmrlVerdict};
pub use first_stage::{optimal_margin_general, SupplierSolution};
pub use inefficiency::{inefficiency, InefficiencyReport};
pub use oracle::OracleConfig;
pub use second_stage::{MarketParams, RetailerOutcome, Strategy};
