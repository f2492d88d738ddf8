//! Distributionally robust switching-strategy synthesis for discrete-time
//! switched stochastic systems with additive noise from a Wasserstein
//! ambiguity set.
//!
//! The pipeline: partition the safe set into a grid ([`partition`]), abstract
//! the system into a finite robust MDP whose rows combine interval bounds with
//! a transport budget ([`abstraction`]), run robust dynamic programming with
//! either a concave dual solver or a reference linear program ([`synthesis`],
//! [`solvers`]), refine the strategy back to the continuous system, and check
//! the probability bounds by Monte Carlo simulation ([`validation`]).

pub mod abstraction;
pub mod benchmarks;
pub mod config;
pub mod error;
pub mod geom;
pub mod noise;
pub mod partition;
pub mod run;
pub mod solvers;
pub mod synthesis;
pub mod system;
pub mod types;
pub mod validation;

pub use abstraction::{
    build_abstraction, image_box, nominal_bounds, reach_index_sets, AbstractRow,
    RobustAbstraction, TransportCost,
};
pub use error::{Error, Result};
pub use geom::Rect;
pub use noise::{AmbiguitySet, NoiseModel, Support};
pub use partition::{GridSpec, Partition};
pub use solvers::dual::{inner_max_dual, inner_min_dual};
pub use solvers::imdp::{imdp_inner_max, imdp_inner_min};
pub use solvers::lp::{inner_max_lp, inner_min_lp, membership_test};
pub use solvers::simplex::reference_lp;
pub use solvers::InnerProblem;
pub use system::{Mode, SwitchedSystem};
pub use types::{Horizon, SolverKind, Strategy, ValueFunction};
