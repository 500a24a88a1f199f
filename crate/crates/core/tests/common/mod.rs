#![allow(dead_code)]

use std::collections::BTreeMap;

use dnl::model::{Constraint, JobSpec, KnapsackConstraint, MachineSpec, ProblemSet, SchedulingConstraint};
use dnl::LinearModel;
use rand::Rng;

/// Knapsack with small integer features, weights, values and capacity.
pub fn random_knapsack(rng: &mut impl Rng, n_max: usize, p: usize) -> ProblemSet {
    let n = rng.random_range(2..=n_max);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1..=6) as f64).collect();
    let total: f64 = weights.iter().sum();
    let capacity = rng.random_range(1..=total as i64) as f64;
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-3..=3) as f64).collect())
        .collect();
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2..=12) as f64).collect();
    ProblemSet::new(
        "rk",
        values,
        features,
        Constraint::Knapsack(KnapsackConstraint::new(weights, capacity).unwrap()),
    )
    .unwrap()
}

/// Model with nonzero integer coefficients in [-3, 3] and intercept in [0, 3].
pub fn random_model(rng: &mut impl Rng, p: usize) -> LinearModel {
    let coef = (0..p)
        .map(|_| {
            let m = rng.random_range(1..=3) as f64;
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    LinearModel::new(coef, rng.random_range(0..=3) as f64).unwrap()
}

/// Predicted objective of every feasible subset as a line in the chosen
/// coefficient: `slope * beta + intercept`, keeping the best intercept per slope.
pub fn pov_lines(problem: &ProblemSet, model: &LinearModel, index: usize) -> Vec<(f64, f64)> {
    let Constraint::Knapsack(k) = problem.constraint() else { panic!("knapsack only") };
    let n = problem.len();
    let base = model.with_coefficient(index, 0.0).unwrap();
    let rest: Vec<f64> = problem.features().iter().map(|r| base.predict_row(r)).collect();
    let theta: Vec<f64> = problem.features().iter().map(|r| r[index]).collect();
    let mut best: BTreeMap<i64, f64> = BTreeMap::new();
    for mask in 0u32..(1 << n) {
        let (mut w, mut a, mut b) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                w += k.weights[i];
                a += theta[i];
                b += rest[i];
            }
        }
        if w <= k.capacity + 1e-9 {
            let e = best.entry(a.round() as i64).or_insert(f64::NEG_INFINITY);
            *e = e.max(b);
        }
    }
    best.into_iter().map(|(a, b)| (a as f64, b)).collect()
}

pub fn envelope(lines: &[(f64, f64)], beta: f64) -> f64 {
    lines.iter().map(|(a, b)| a * beta + b).fold(f64::NEG_INFINITY, f64::max)
}

/// Slope of the envelope's maximizing line at `beta`, ties to the smaller slope.
pub fn envelope_slope(lines: &[(f64, f64)], beta: f64) -> f64 {
    let top = envelope(lines, beta);
    lines
        .iter()
        .filter(|(a, b)| a * beta + b >= top - 1e-9)
        .map(|l| l.0)
        .fold(f64::INFINITY, f64::min)
}

/// Consecutive sweep points `[x_k, x_{k+1}]` holding a change of the
/// maximizing line. Kinks exactly on the region boundary do not count.
pub fn sweep_changes(lines: &[(f64, f64)], lower: f64, upper: f64, step: f64) -> Vec<(f64, f64)> {
    let count = ((upper - lower) / step).ceil() as usize;
    let xs: Vec<f64> = (0..=count).map(|k| (lower + k as f64 * step).min(upper)).collect();
    (0..count)
        .filter(|&k| {
            let left = if k == 0 {
                envelope_slope_max(lines, xs[0])
            } else {
                envelope_slope(lines, xs[k])
            };
            let right = if k + 1 == count {
                envelope_slope(lines, xs[count])
            } else {
                envelope_slope_max(lines, xs[k + 1])
            };
            left < right
        })
        .map(|k| (xs[k], xs[k + 1]))
        .collect()
}

/// Tiny scheduling instance; may be infeasible.
pub fn random_scheduling(rng: &mut impl Rng) -> (SchedulingConstraint, Vec<f64>) {
    let periods = rng.random_range(3..=7);
    let machines: Vec<MachineSpec> = (0..rng.random_range(1..=2))
        .map(|_| MachineSpec {
            capacity: rng.random_range(2..=4) as f64,
        })
        .collect();
    let max_cap = machines.iter().map(|m| m.capacity).fold(0.0, f64::max);
    let jobs: Vec<JobSpec> = (0..rng.random_range(1..=3))
        .map(|_| {
            let duration = rng.random_range(1..=2.min(periods));
            let earliest_start = rng.random_range(0..=periods - duration);
            let latest_finish = rng.random_range(earliest_start + duration..=periods);
            JobSpec {
                resource: rng.random_range(1..=max_cap as i64) as f64,
                power: rng.random_range(1..=3) as f64,
                duration,
                earliest_start,
                latest_finish,
            }
        })
        .collect();
    let prices = (0..periods).map(|_| rng.random_range(-2..=9) as f64).collect();
    (SchedulingConstraint::new(machines, jobs, periods).unwrap(), prices)
}

/// Knapsack whose features are integers in column `index` and continuous
/// elsewhere, so POV kinks are sharp and predicted ties are rare.
pub fn random_knapsack_mixed(rng: &mut impl Rng, n_max: usize, p: usize, index: usize) -> ProblemSet {
    let n = rng.random_range(2..=n_max);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1..=6) as f64).collect();
    let total: f64 = weights.iter().sum();
    let capacity = rng.random_range(1..=total as i64) as f64;
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..p)
                .map(|j| {
                    if j == index {
                        rng.random_range(-3..=3) as f64
                    } else {
                        rng.random_range(-2.0..2.0)
                    }
                })
                .collect()
        })
        .collect();
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..12.0)).collect();
    ProblemSet::new(
        "mk",
        values,
        features,
        Constraint::Knapsack(KnapsackConstraint::new(weights, capacity).unwrap()),
    )
    .unwrap()
}

/// Like [`envelope_slope`] with ties to the larger slope.
pub fn envelope_slope_max(lines: &[(f64, f64)], beta: f64) -> f64 {
    let top = envelope(lines, beta);
    lines
        .iter()
        .filter(|(a, b)| a * beta + b >= top - 1e-9)
        .map(|l| l.0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks every reported interval against the exact envelope and every
/// dense-sweep change against the reported intervals. Returns a description
/// of the first violation.
pub fn audit_profile(
    lines: &[(f64, f64)],
    intervals: &[(f64, f64)],
    lower: f64,
    upper: f64,
    min_step: f64,
) -> Result<(), String> {
    for &(lo, hi) in intervals {
        if !(lower <= lo && lo < hi && hi <= upper) {
            return Err(format!("interval ({lo}, {hi}) outside region"));
        }
        if envelope_slope(lines, lo) >= envelope_slope_max(lines, hi) {
            return Err(format!("interval ({lo}, {hi}) holds no transition"));
        }
    }
    for w in intervals.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(format!("intervals {:?} and {:?} overlap", w[0], w[1]));
        }
    }
    for (a, b) in sweep_changes(lines, lower, upper, min_step / 10.0) {
        let covered = intervals.iter().any(|&(lo, hi)| lo <= b + 1e-12 && a <= hi + 1e-12);
        if !covered {
            return Err(format!("transition in ({a}, {b}) missed; intervals {intervals:?}"));
        }
    }
    Ok(())
}
