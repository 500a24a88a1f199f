//! Shared domain types: problem instances, linear prediction models and
//! solutions.
//!
//! Every optimization problem in this crate has a linear objective
//! `x^T v`, where `x` is an activity vector derived from a solution and `v`
//! are the (true or predicted) coefficients. Knapsack is maximized and
//! scheduling is minimized; code that needs a single sign convention works
//! with [`Solution::score`], which is always "larger is better".

use crate::error::{dim_check, Error, Result};

/// Absolute tolerance used for objective comparisons across the crate.
pub const OBJECTIVE_TOL: f64 = 1e-9;

/// Optimization direction of a problem family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    /// Factor that maps a natural objective onto the maximization convention.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Max => 1.0,
            Direction::Min => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackConstraint {
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl KnapsackConstraint {
    pub fn new(weights: Vec<f64>, capacity: f64) -> Result<Self> {
        let c = KnapsackConstraint { weights, capacity };
        c.validate()?;
        Ok(c)
    }

    /// Unit weights for `n` items.
    pub fn unit(n: usize, capacity: f64) -> Result<Self> {
        Self::new(vec![1.0; n], capacity)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if !(self.capacity.is_finite() && self.capacity >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "knapsack capacity must be finite and nonnegative, got {}",
                self.capacity
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "knapsack weights must be finite and nonnegative, got {w}"
            )));
        }
        Ok(())
    }
}

/// A machine with a per-period resource capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineSpec {
    pub capacity: f64,
}

/// A non-preemptive job. It runs in periods `start..start + duration`, where
/// `earliest_start <= start` and `start + duration <= latest_finish`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobSpec {
    pub resource: f64,
    pub power: f64,
    pub duration: usize,
    pub earliest_start: usize,
    pub latest_finish: usize,
}

impl JobSpec {
    /// Admissible start periods.
    pub fn starts(&self) -> std::ops::RangeInclusive<usize> {
        self.earliest_start..=self.latest_finish - self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingConstraint {
    pub machines: Vec<MachineSpec>,
    pub jobs: Vec<JobSpec>,
    pub periods: usize,
}

impl SchedulingConstraint {
    pub fn new(machines: Vec<MachineSpec>, jobs: Vec<JobSpec>, periods: usize) -> Result<Self> {
        let c = SchedulingConstraint {
            machines,
            jobs,
            periods,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.periods == 0 {
            return Err(Error::InvalidInput("scheduling horizon must be positive".into()));
        }
        if self.machines.is_empty() {
            return Err(Error::InvalidInput("scheduling needs at least one machine".into()));
        }
        let max_cap = self
            .machines
            .iter()
            .map(|m| m.capacity)
            .fold(f64::NEG_INFINITY, f64::max);
        if self
            .machines
            .iter()
            .any(|m| !(m.capacity.is_finite() && m.capacity >= 0.0))
        {
            return Err(Error::InvalidInput(
                "machine capacities must be finite and nonnegative".into(),
            ));
        }
        for (j, job) in self.jobs.iter().enumerate() {
            if !(job.resource.is_finite() && job.resource >= 0.0) {
                return Err(Error::InvalidInput(format!("job {j}: bad resource requirement")));
            }
            if !(job.power.is_finite() && job.power >= 0.0) {
                return Err(Error::InvalidInput(format!("job {j}: bad power consumption")));
            }
            if job.duration == 0 || job.duration > self.periods {
                return Err(Error::InvalidInput(format!(
                    "job {j}: duration {} outside 1..={}",
                    job.duration, self.periods
                )));
            }
            if job.latest_finish > self.periods
                || job.earliest_start + job.duration > job.latest_finish
            {
                return Err(Error::InvalidInput(format!(
                    "job {j}: window [{}, {}) cannot hold duration {} within {} periods",
                    job.earliest_start, job.latest_finish, job.duration, self.periods
                )));
            }
            if job.resource > max_cap {
                return Err(Error::Infeasible(format!(
                    "job {j} needs {} resource but the largest machine offers {max_cap}",
                    job.resource
                )));
            }
        }
        Ok(())
    }

    /// Per-period energy drawn by a set of placements.
    pub fn consumption(&self, placements: &[Placement]) -> Vec<f64> {
        let mut x = vec![0.0; self.periods];
        for (job, p) in self.jobs.iter().zip(placements) {
            for slot in &mut x[p.start..p.start + job.duration] {
                *slot += job.power;
            }
        }
        x
    }
}

/// Problem-family specific constraint data.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Knapsack(KnapsackConstraint),
    Scheduling(SchedulingConstraint),
}

impl Constraint {
    pub fn direction(&self) -> Direction {
        match self {
            Constraint::Knapsack(_) => Direction::Max,
            Constraint::Scheduling(_) => Direction::Min,
        }
    }

    /// Number of objective coefficients the constraint expects.
    pub fn num_coefficients(&self) -> usize {
        match self {
            Constraint::Knapsack(k) => k.len(),
            Constraint::Scheduling(s) => s.periods,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Constraint::Knapsack(_) => "knapsack",
            Constraint::Scheduling(_) => "scheduling",
        }
    }
}

/// One optimization instance: true coefficients, one feature row per
/// coefficient, and the constraint data shared by all candidate solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSet {
    id: String,
    true_values: Vec<f64>,
    features: Vec<Vec<f64>>,
    constraint: Constraint,
}

impl ProblemSet {
    pub fn new(
        id: impl Into<String>,
        true_values: Vec<f64>,
        features: Vec<Vec<f64>>,
        constraint: Constraint,
    ) -> Result<Self> {
        dim_check("feature rows", true_values.len(), features.len())?;
        dim_check(
            "constraint coefficients",
            constraint.num_coefficients(),
            true_values.len(),
        )?;
        if true_values.is_empty() {
            return Err(Error::InvalidInput("problem set has no coefficients".into()));
        }
        let p = features[0].len();
        for row in &features {
            dim_check("feature row length", p, row.len())?;
        }
        if true_values.iter().chain(features.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in problem set".into()));
        }
        Ok(ProblemSet {
            id: id.into(),
            true_values,
            features,
            constraint,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn true_values(&self) -> &[f64] {
        &self.true_values
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn len(&self) -> usize {
        self.true_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_values.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }
}

/// Linear predictor `v = beta^T theta + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    coefficients: Vec<f64>,
    intercept: f64,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>, intercept: f64) -> Result<Self> {
        if !intercept.is_finite() || coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(LinearModel {
            coefficients,
            intercept,
        })
    }

    pub fn zeros(p: usize) -> Self {
        LinearModel {
            coefficients: vec![0.0; p],
            intercept: 0.0,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Copy of the model with coefficient `index` replaced by `value`.
    pub fn with_coefficient(&self, index: usize, value: f64) -> Result<Self> {
        if index >= self.coefficients.len() {
            return Err(Error::InvalidInput(format!(
                "parameter index {index} out of range for {} coefficients",
                self.coefficients.len()
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite parameter value {value}")));
        }
        let mut m = self.clone();
        m.coefficients[index] = value;
        Ok(m)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(row)
            .map(|(b, t)| b * t)
            .sum::<f64>()
            + self.intercept
    }

    /// One predicted coefficient per feature row.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|row| {
                dim_check("model vs feature row", self.coefficients.len(), row.len())?;
                Ok(self.predict_row(row))
            })
            .collect()
    }

    pub fn predict(&self, problem: &ProblemSet) -> Result<Vec<f64>> {
        self.predict_rows(problem.features())
    }
}

/// A collection of problem sets sharing the feature dimension and the
/// constraint family.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    problem_sets: Vec<ProblemSet>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(problem_sets: Vec<ProblemSet>) -> Result<Self> {
        let first = problem_sets
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset has no problem sets".into()))?;
        let p = first.feature_dim();
        let family = first.constraint().family();
        for ps in &problem_sets {
            dim_check("dataset feature dimension", p, ps.feature_dim())?;
            if ps.constraint().family() != family {
                return Err(Error::InvalidInput(format!(
                    "problem set {} is {} but dataset is {family}",
                    ps.id(),
                    ps.constraint().family()
                )));
            }
        }
        Ok(Dataset {
            problem_sets,
            feature_dim: p,
        })
    }

    pub fn problem_sets(&self) -> &[ProblemSet] {
        &self.problem_sets
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.problem_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problem_sets.is_empty()
    }

    /// Problem sets at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Vec<ProblemSet> {
        indices.iter().map(|&i| self.problem_sets[i].clone()).collect()
    }
}

/// Placement of one job: machine index and start period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub machine: usize,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assignment {
    /// 0-1 item selection.
    Knapsack(Vec<bool>),
    /// One placement per job, in job order.
    Scheduling(Vec<Placement>),
}

/// A decision together with its activity vector `x`, so that
/// `Obj(x, v) = x^T v` can be evaluated for any coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    assignment: Assignment,
    activity: Vec<f64>,
    direction: Direction,
}

impl Solution {
    pub fn knapsack(selected: Vec<bool>) -> Self {
        let activity = selected.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
        Solution {
            assignment: Assignment::Knapsack(selected),
            activity,
            direction: Direction::Max,
        }
    }

    pub fn scheduling(placements: Vec<Placement>, constraint: &SchedulingConstraint) -> Self {
        let activity = constraint.consumption(&placements);
        Solution {
            assignment: Assignment::Scheduling(placements),
            activity,
            direction: Direction::Min,
        }
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// `x^T v` in the problem's natural direction.
    pub fn objective(&self, values: &[f64]) -> Result<f64> {
        solution_objective(self, values)
    }

    /// Objective mapped to the maximization convention.
    pub fn score(&self, values: &[f64]) -> Result<f64> {
        Ok(self.direction.sign() * self.objective(values)?)
    }
}

/// `Obj(x, v) = x^T v`.
pub fn solution_objective(solution: &Solution, values: &[f64]) -> Result<f64> {
    dim_check("solution vs values", solution.activity.len(), values.len())?;
    Ok(solution.activity.iter().zip(values).map(|(x, v)| x * v).sum())
}

/// Checks that a solution is feasible under `constraint`.
pub fn validate_solution(solution: &Solution, constraint: &Constraint) -> Result<()> {
    match (&solution.assignment, constraint) {
        (Assignment::Knapsack(sel), Constraint::Knapsack(k)) => {
            dim_check("knapsack selection", k.len(), sel.len())?;
            let used: f64 = sel
                .iter()
                .zip(&k.weights)
                .filter(|(s, _)| **s)
                .map(|(_, w)| w)
                .sum();
            if used > k.capacity + OBJECTIVE_TOL {
                return Err(Error::Infeasible(format!(
                    "selected weight {used} exceeds capacity {}",
                    k.capacity
                )));
            }
            Ok(())
        }
        (Assignment::Scheduling(placements), Constraint::Scheduling(s)) => {
            dim_check("job placements", s.jobs.len(), placements.len())?;
            let mut usage = vec![vec![0.0; s.periods]; s.machines.len()];
            for (j, (job, p)) in s.jobs.iter().zip(placements).enumerate() {
                if p.machine >= s.machines.len() {
                    return Err(Error::Infeasible(format!("job {j}: unknown machine {}", p.machine)));
                }
                if p.start < job.earliest_start || p.start + job.duration > job.latest_finish {
                    return Err(Error::Infeasible(format!(
                        "job {j}: start {} violates window [{}, {})",
                        p.start, job.earliest_start, job.latest_finish
                    )));
                }
                for t in p.start..p.start + job.duration {
                    usage[p.machine][t] += job.resource;
                }
            }
            for (m, row) in usage.iter().enumerate() {
                let cap = s.machines[m].capacity;
                if let Some(t) = row.iter().position(|u| *u > cap + OBJECTIVE_TOL) {
                    return Err(Error::Infeasible(format!(
                        "machine {m} over capacity in period {t}"
                    )));
                }
            }
            let expected = s.consumption(placements);
            if expected
                .iter()
                .zip(&solution.activity)
                .any(|(a, b)| (a - b).abs() > OBJECTIVE_TOL)
            {
                return Err(Error::InvalidInput("activity vector out of sync".into()));
            }
            Ok(())
        }
        (_, c) => Err(Error::InvalidInput(format!(
            "solution does not belong to the {} family",
            c.family()
        ))),
    }
}
