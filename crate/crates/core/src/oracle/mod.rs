//! Exact optimization oracles `s(v) = argmax_{x in C} Obj(x, v)`.
//!
//! Every oracle maximizes in the crate-wide sign convention: knapsack
//! maximizes `x^T v` directly, scheduling minimizes energy cost, which is the
//! same as maximizing `x^T (-v)`. [`OracleResult::objective`] is reported in
//! the natural direction, [`OracleResult::score`] in the maximization one.

mod brute;
mod knapsack;
mod scheduling;

use std::sync::atomic::{AtomicU64, Ordering};

pub use brute::solve_bruteforce;
pub use knapsack::{solve_knapsack_bb, solve_knapsack_dp};
pub use scheduling::solve_scheduling;

use crate::error::{dim_check, Error, Result};
use crate::model::{Constraint, Solution};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub solution: Solution,
    /// Optimal `x^T v` under the queried coefficients.
    pub objective: f64,
}

impl OracleResult {
    pub(crate) fn new(solution: Solution, values: &[f64]) -> Result<Self> {
        let objective = solution.objective(values)?;
        Ok(OracleResult {
            solution,
            objective,
        })
    }

    /// Objective in the maximization convention.
    pub fn score(&self) -> f64 {
        self.solution.direction().sign() * self.objective
    }
}

/// An exact solver for one or more constraint families.
pub trait Oracle: Send + Sync {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        (**self).solve(values, constraint)
    }
}

pub(crate) fn check_values(values: &[f64], constraint: &Constraint) -> Result<()> {
    dim_check("oracle coefficients", constraint.num_coefficients(), values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite objective coefficient".into()));
    }
    Ok(())
}

/// Dynamic-programming knapsack solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct KnapsackDp;

impl Oracle for KnapsackDp {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        match constraint {
            Constraint::Knapsack(k) => solve_knapsack_dp(values, k),
            Constraint::Scheduling(_) => Err(Error::UnsupportedConstraint("scheduling")),
        }
    }
}

/// Branch-and-bound knapsack solver (real-valued weights allowed).
#[derive(Debug, Clone, Copy, Default)]
pub struct KnapsackBranchBound;

impl Oracle for KnapsackBranchBound {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        match constraint {
            Constraint::Knapsack(k) => solve_knapsack_bb(values, k),
            Constraint::Scheduling(_) => Err(Error::UnsupportedConstraint("scheduling")),
        }
    }
}

/// Depth-first branch-and-bound scheduler.
#[derive(Debug, Clone, Copy, Default)]
pub struct SchedulingBranchBound;

impl Oracle for SchedulingBranchBound {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        match constraint {
            Constraint::Scheduling(s) => solve_scheduling(values, s),
            Constraint::Knapsack(_) => Err(Error::UnsupportedConstraint("knapsack")),
        }
    }
}

/// Exhaustive enumeration; only for small instances and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForce;

impl Oracle for BruteForce {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        solve_bruteforce(values, constraint)
    }
}

/// Default oracle: knapsack DP (falling back to branch-and-bound when the
/// weights cannot be integerized or the table would be too large) and
/// branch-and-bound scheduling.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOracle;

impl Oracle for ExactOracle {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        match constraint {
            Constraint::Knapsack(k) => match solve_knapsack_dp(values, k) {
                Err(Error::NonIntegralWeights) | Err(Error::TooLarge(_)) => {
                    solve_knapsack_bb(values, k)
                }
                r => r,
            },
            Constraint::Scheduling(s) => solve_scheduling(values, s),
        }
    }
}

/// Wraps an oracle and counts invocations.
#[derive(Debug, Default)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.solve(values, constraint)
    }
}
