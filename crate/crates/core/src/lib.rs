//! Decision-focused training of linear coefficient predictors.
//!
//! A linear model predicts the objective coefficients of a combinatorial
//! problem; training minimizes regret, the true-objective loss of acting on
//! the predicted optimum, rather than prediction error. Along any single
//! model parameter the predicted optimal value is convex and piecewise
//! linear, and its kinks are the only places where the decision (and so the
//! regret) can change. [`transition`] locates those kinks by collinearity
//! probing and [`trainer`] turns them into coordinate-descent updates.

pub mod baselines;
pub mod data;
pub mod error;
pub mod model;
pub mod oracle;
pub mod regret;
pub mod trainer;
pub mod transition;

pub use error::{Error, Result};
pub use model::{
    Constraint, Dataset, JobSpec, KnapsackConstraint, LinearModel, MachineSpec, ProblemSet,
    SchedulingConstraint, Solution,
};
pub use oracle::{ExactOracle, Oracle, OracleResult};
pub use regret::{Evaluator, RegretValue};
pub use trainer::{TrainConfig, TrainTrace, Variant};
pub use transition::{SearchSpec, TransitionProfile};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/regret.md")]
    mod regret {}
    #[doc = include_str!("../../../book/src/transitions.md")]
    mod transitions {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
}
