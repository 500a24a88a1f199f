use super::{check_values, OracleResult};
use crate::error::{Error, Result};
use crate::model::{
    Constraint, KnapsackConstraint, Placement, SchedulingConstraint, Solution, OBJECTIVE_TOL,
};

const MAX_KNAPSACK_ITEMS: usize = 22;
const MAX_SCHEDULE_TUPLES: f64 = 1e7;

/// Exact optimum by exhaustive enumeration. Ground truth for tests.
pub fn solve_bruteforce(values: &[f64], constraint: &Constraint) -> Result<OracleResult> {
    check_values(values, constraint)?;
    match constraint {
        Constraint::Knapsack(k) => knapsack(values, k),
        Constraint::Scheduling(s) => scheduling(values, s),
    }
}

fn knapsack(values: &[f64], k: &KnapsackConstraint) -> Result<OracleResult> {
    let n = values.len();
    if n > MAX_KNAPSACK_ITEMS {
        return Err(Error::TooLarge(format!("{n} knapsack items (limit {MAX_KNAPSACK_ITEMS})")));
    }
    let mut best = (0.0, 0u32);
    for mask in 1u32..(1 << n) {
        let mut weight = 0.0;
        let mut value = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                weight += k.weights[i];
                value += values[i];
            }
        }
        if weight <= k.capacity + OBJECTIVE_TOL && value > best.0 {
            best = (value, mask);
        }
    }
    let selected = (0..n).map(|i| best.1 >> i & 1 == 1).collect();
    OracleResult::new(Solution::knapsack(selected), values)
}

fn scheduling(prices: &[f64], s: &SchedulingConstraint) -> Result<OracleResult> {
    let tuples: f64 = s
        .jobs
        .iter()
        .map(|j| (s.machines.len() * j.starts().count()) as f64)
        .product();
    if tuples > MAX_SCHEDULE_TUPLES {
        return Err(Error::TooLarge(format!("{tuples:.0} (machine, start) tuples")));
    }

    struct Enumerate<'a> {
        s: &'a SchedulingConstraint,
        prices: &'a [f64],
        usage: Vec<Vec<f64>>,
        current: Vec<Placement>,
        best: Option<(f64, Vec<Placement>)>,
    }

    impl Enumerate<'_> {
        fn go(&mut self, j: usize, cost: f64) {
            if j == self.s.jobs.len() {
                if self.best.as_ref().is_none_or(|b| cost < b.0) {
                    self.best = Some((cost, self.current.clone()));
                }
                return;
            }
            let job = self.s.jobs[j];
            for m in 0..self.s.machines.len() {
                let cap = self.s.machines[m].capacity + OBJECTIVE_TOL;
                for start in job.starts() {
                    let window = start..start + job.duration;
                    if self.usage[m][window.clone()].iter().any(|u| u + job.resource > cap) {
                        continue;
                    }
                    let c: f64 = self.prices[window.clone()].iter().sum::<f64>() * job.power;
                    self.usage[m][window.clone()].iter_mut().for_each(|u| *u += job.resource);
                    self.current[j] = Placement { machine: m, start };
                    self.go(j + 1, cost + c);
                    self.usage[m][window].iter_mut().for_each(|u| *u -= job.resource);
                }
            }
        }
    }

    let mut e = Enumerate {
        s,
        prices,
        usage: vec![vec![0.0; s.periods]; s.machines.len()],
        current: vec![Placement { machine: 0, start: 0 }; s.jobs.len()],
        best: None,
    };
    e.go(0, 0.0);
    let (_, placements) = e
        .best
        .ok_or_else(|| Error::Infeasible("no feasible schedule exists".into()))?;
    OracleResult::new(Solution::scheduling(placements, s), prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let c = Constraint::Knapsack(KnapsackConstraint::unit(3, 2.0).unwrap());
        assert_eq!(solve_bruteforce(&[2.0, 1.0, 3.0], &c).unwrap().objective, 5.0);
    }

    #[test]
    fn single_item() {
        let c = Constraint::Knapsack(KnapsackConstraint::unit(1, 1.0).unwrap());
        let r = solve_bruteforce(&[1.0], &c).unwrap();
        assert_eq!(r.solution.activity(), &[1.0]);
    }

    #[test]
    fn too_large_is_rejected() {
        let c = Constraint::Knapsack(KnapsackConstraint::unit(23, 5.0).unwrap());
        assert!(matches!(solve_bruteforce(&[1.0; 23], &c), Err(Error::TooLarge(_))));
    }
}
