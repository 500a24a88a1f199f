use super::{check_values, OracleResult};
use crate::error::{Error, Result};
use crate::model::{Constraint, Placement, SchedulingConstraint, Solution, OBJECTIVE_TOL};

/// Per-job data precomputed for one price vector.
struct JobCosts {
    /// (start, cost) sorted by increasing cost, ties by start.
    starts: Vec<(usize, f64)>,
    min_cost: f64,
}

struct Search<'a> {
    s: &'a SchedulingConstraint,
    costs: Vec<JobCosts>,
    order: Vec<usize>,
    /// suffix_bound[k] = sum of cheapest window costs of order[k..].
    suffix_bound: Vec<f64>,
    usage: Vec<Vec<f64>>,
    current: Vec<Placement>,
    best: Option<(f64, Vec<Placement>)>,
}

impl Search<'_> {
    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    fn slack(&self) -> f64 {
        let inc = self.incumbent();
        if inc.is_finite() {
            1e-12 * inc.abs().max(1.0)
        } else {
            0.0
        }
    }

    fn fits(&self, m: usize, job: usize, start: usize) -> bool {
        let spec = &self.s.jobs[job];
        let cap = self.s.machines[m].capacity + OBJECTIVE_TOL;
        self.usage[m][start..start + spec.duration]
            .iter()
            .all(|u| u + spec.resource <= cap)
    }

    /// Machines with equal capacity and identical load are interchangeable;
    /// only the first of each class is branched on.
    fn is_duplicate_machine(&self, m: usize) -> bool {
        (0..m).any(|other| {
            self.s.machines[other].capacity == self.s.machines[m].capacity
                && self.usage[other] == self.usage[m]
        })
    }

    fn place(&mut self, m: usize, job: usize, start: usize, sign: f64) {
        let spec = self.s.jobs[job];
        for u in &mut self.usage[m][start..start + spec.duration] {
            *u += sign * spec.resource;
        }
    }

    fn dfs(&mut self, depth: usize, cost: f64) {
        if depth == self.order.len() {
            if cost < self.incumbent() - self.slack() || self.best.is_none() {
                self.best = Some((cost, self.current.clone()));
            }
            return;
        }
        let job = self.order[depth];
        let rest = self.suffix_bound[depth + 1];
        for idx in 0..self.costs[job].starts.len() {
            let (start, window_cost) = self.costs[job].starts[idx];
            let total = cost + window_cost;
            // starts are sorted by cost, so every later start is no better
            if self.best.is_some() && total + rest >= self.incumbent() - self.slack() {
                break;
            }
            for m in 0..self.s.machines.len() {
                if self.is_duplicate_machine(m) || !self.fits(m, job, start) {
                    continue;
                }
                self.place(m, job, start, 1.0);
                self.current[job] = Placement { machine: m, start };
                self.dfs(depth + 1, total);
                self.place(m, job, start, -1.0);
            }
        }
    }
}

/// Minimum-energy-cost schedule by depth-first branch-and-bound.
///
/// Jobs are branched in order of window tightness (fewest admissible starts
/// first, larger resource first on ties). The bound adds, for every job not
/// yet placed, its cheapest window cost ignoring resource conflicts.
pub fn solve_scheduling(prices: &[f64], s: &SchedulingConstraint) -> Result<OracleResult> {
    check_values(prices, &Constraint::Scheduling(s.clone()))?;

    let mut prefix = vec![0.0; prices.len() + 1];
    for (t, p) in prices.iter().enumerate() {
        prefix[t + 1] = prefix[t] + p;
    }
    let costs: Vec<JobCosts> = s
        .jobs
        .iter()
        .map(|job| {
            let mut starts: Vec<(usize, f64)> = job
                .starts()
                .map(|t| (t, job.power * (prefix[t + job.duration] - prefix[t])))
                .collect();
            starts.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let min_cost = starts[0].1;
            JobCosts { starts, min_cost }
        })
        .collect();

    let mut order: Vec<usize> = (0..s.jobs.len()).collect();
    order.sort_by(|&a, &b| {
        costs[a]
            .starts
            .len()
            .cmp(&costs[b].starts.len())
            .then(s.jobs[b].resource.total_cmp(&s.jobs[a].resource))
            .then(a.cmp(&b))
    });
    let mut suffix_bound = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix_bound[k] = suffix_bound[k + 1] + costs[order[k]].min_cost;
    }

    let mut search = Search {
        s,
        costs,
        order,
        suffix_bound,
        usage: vec![vec![0.0; s.periods]; s.machines.len()],
        current: vec![Placement { machine: 0, start: 0 }; s.jobs.len()],
        best: None,
    };
    search.dfs(0, 0.0);

    match search.best {
        Some((_, placements)) => OracleResult::new(Solution::scheduling(placements, s), prices),
        None => Err(Error::Infeasible(
            "no schedule satisfies the machine capacities and job windows".into(),
        )),
    }
}
