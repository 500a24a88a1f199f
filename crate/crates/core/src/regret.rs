//! Regret, predicted optimal value (POV) and true optimal value (TOV).
//!
//! All three quantities are reported in the maximization convention, so for
//! scheduling (a cost minimization) `true_optimal` and `achieved` are negated
//! costs while `regret` is the plain cost difference.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Constraint, LinearModel, ProblemSet, Solution, OBJECTIVE_TOL};
use crate::oracle::{Oracle, OracleResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretValue {
    pub regret: f64,
    /// `Obj(x*, v)` with `x* = s(v)`.
    pub true_optimal: f64,
    /// `Obj(x_p, v)` with `x_p = s(v_p)`.
    pub achieved: f64,
}

impl RegretValue {
    fn new(true_optimal: f64, achieved: f64) -> Result<Self> {
        let raw = true_optimal - achieved;
        if raw < -OBJECTIVE_TOL {
            return Err(Error::InvalidInput(format!(
                "predicted solution beats the true optimum by {}; oracle is not exact",
                -raw
            )));
        }
        let regret = if raw <= OBJECTIVE_TOL { 0.0 } else { raw };
        Ok(RegretValue {
            regret,
            true_optimal,
            achieved,
        })
    }
}

/// Outcome of solving with a single probed parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub solution: Solution,
    /// Predicted optimal value.
    pub pov: f64,
    /// True objective of the predicted solution.
    pub tov: f64,
}

type OptimumSlot = Arc<Mutex<Option<f64>>>;

/// Instrumented gateway to an oracle with a memo of true optima.
///
/// Every oracle invocation in training and extraction goes through an
/// evaluator so call counts are exact.
pub struct Evaluator<'o> {
    oracle: &'o dyn Oracle,
    optima: RwLock<HashMap<(String, u64), OptimumSlot>>,
    predicted_solves: AtomicU64,
    optimum_solves: AtomicU64,
}

fn fingerprint(problem: &ProblemSet) -> u64 {
    let mut h = DefaultHasher::new();
    for v in problem.true_values() {
        v.to_bits().hash(&mut h);
    }
    match problem.constraint() {
        Constraint::Knapsack(k) => {
            k.capacity.to_bits().hash(&mut h);
            k.weights.iter().for_each(|w| w.to_bits().hash(&mut h));
        }
        Constraint::Scheduling(s) => {
            s.periods.hash(&mut h);
            s.machines.iter().for_each(|m| m.capacity.to_bits().hash(&mut h));
            for j in &s.jobs {
                j.resource.to_bits().hash(&mut h);
                j.power.to_bits().hash(&mut h);
                (j.duration, j.earliest_start, j.latest_finish).hash(&mut h);
            }
        }
    }
    h.finish()
}

impl<'o> Evaluator<'o> {
    pub fn new(oracle: &'o dyn Oracle) -> Self {
        Evaluator {
            oracle,
            optima: RwLock::new(HashMap::new()),
            predicted_solves: AtomicU64::new(0),
            optimum_solves: AtomicU64::new(0),
        }
    }

    pub fn oracle(&self) -> &'o dyn Oracle {
        self.oracle
    }

    /// Oracle calls made with predicted coefficients.
    pub fn predicted_solves(&self) -> u64 {
        self.predicted_solves.load(Ordering::Relaxed)
    }

    /// Oracle calls made to compute (memoized) true optima.
    pub fn optimum_solves(&self) -> u64 {
        self.optimum_solves.load(Ordering::Relaxed)
    }

    pub fn oracle_calls(&self) -> u64 {
        self.predicted_solves() + self.optimum_solves()
    }

    /// Solves with arbitrary coefficients; counted as a predicted solve.
    pub fn solve(&self, values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
        self.predicted_solves.fetch_add(1, Ordering::Relaxed);
        self.oracle.solve(values, constraint)
    }

    /// `Obj(s(v), v)` in the maximization convention, memoized.
    pub fn true_optimum(&self, problem: &ProblemSet) -> Result<f64> {
        let key = (problem.id().to_owned(), fingerprint(problem));
        let slot = {
            let read = self.optima.read().expect("optimum memo poisoned");
            read.get(&key).cloned()
        };
        let slot = match slot {
            Some(s) => s,
            None => {
                let mut write = self.optima.write().expect("optimum memo poisoned");
                write.entry(key).or_default().clone()
            }
        };
        let mut guard = slot.lock().expect("optimum slot poisoned");
        if let Some(v) = *guard {
            return Ok(v);
        }
        self.optimum_solves.fetch_add(1, Ordering::Relaxed);
        let r = self.oracle.solve(problem.true_values(), problem.constraint())?;
        let v = r.score();
        *guard = Some(v);
        Ok(v)
    }

    pub fn regret_for_values(&self, problem: &ProblemSet, predicted: &[f64]) -> Result<RegretValue> {
        let opt = self.true_optimum(problem)?;
        let r = self.solve(predicted, problem.constraint())?;
        RegretValue::new(opt, r.solution.score(problem.true_values())?)
    }

    pub fn regret(&self, model: &LinearModel, problem: &ProblemSet) -> Result<RegretValue> {
        self.regret_for_values(problem, &model.predict(problem)?)
    }

    /// Regret with parameter `index` replaced by `value`.
    pub fn regret_at(
        &self,
        model: &LinearModel,
        problem: &ProblemSet,
        index: usize,
        value: f64,
    ) -> Result<f64> {
        Ok(self.regret(&model.with_coefficient(index, value)?, problem)?.regret)
    }

    /// Solves once at the probed parameter value and reports both POV and TOV.
    pub fn probe(
        &self,
        model: &LinearModel,
        problem: &ProblemSet,
        index: usize,
        value: f64,
    ) -> Result<Probe> {
        let predicted = model.with_coefficient(index, value)?.predict(problem)?;
        let r = self.solve(&predicted, problem.constraint())?;
        let tov = r.solution.score(problem.true_values())?;
        Ok(Probe {
            pov: r.score(),
            tov,
            solution: r.solution,
        })
    }

    pub fn pov(&self, model: &LinearModel, problem: &ProblemSet, index: usize, value: f64) -> Result<f64> {
        Ok(self.probe(model, problem, index, value)?.pov)
    }

    pub fn tov(&self, model: &LinearModel, problem: &ProblemSet, index: usize, value: f64) -> Result<f64> {
        Ok(self.probe(model, problem, index, value)?.tov)
    }

    /// Per-problem regrets, evaluated in parallel, returned in input order.
    pub fn regrets(&self, model: &LinearModel, problems: &[ProblemSet]) -> Result<Vec<f64>> {
        problems
            .par_iter()
            .map(|p| self.regret(model, p).map(|r| r.regret))
            .collect()
    }

    pub fn mean_regret(&self, model: &LinearModel, problems: &[ProblemSet]) -> Result<f64> {
        let r = self.regrets(model, problems)?;
        Ok(mean(&r))
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One-off regret without memoization.
pub fn regret_of(model: &LinearModel, problem: &ProblemSet, oracle: &dyn Oracle) -> Result<RegretValue> {
    Evaluator::new(oracle).regret(model, problem)
}

/// `POV(beta) = Obj(s(theta, beta), v_p(theta, beta))`.
pub fn pov(
    model: &LinearModel,
    problem: &ProblemSet,
    index: usize,
    value: f64,
    oracle: &dyn Oracle,
) -> Result<f64> {
    Evaluator::new(oracle).pov(model, problem, index, value)
}

/// `TOV(beta) = Obj(s(theta, beta), v)`.
pub fn tov(
    model: &LinearModel,
    problem: &ProblemSet,
    index: usize,
    value: f64,
    oracle: &dyn Oracle,
) -> Result<f64> {
    Evaluator::new(oracle).tov(model, problem, index, value)
}
