use std::cmp::Ordering;

use super::{check_values, OracleResult};
use crate::error::{Error, Result};
use crate::model::{Constraint, KnapsackConstraint, Solution};

/// Largest DP table (items x capacity cells) we are willing to allocate.
const MAX_DP_CELLS: usize = 200_000_000;

/// Scales weights by the smallest power of ten (at most 10^6) that makes
/// them integral. Returns the integer weights and the integer capacity.
fn integerize(k: &KnapsackConstraint) -> Result<(Vec<usize>, usize)> {
    'scale: for digits in 0..=6 {
        let scale = 10f64.powi(digits);
        let mut ints = Vec::with_capacity(k.len());
        for &w in &k.weights {
            let scaled = w * scale;
            let rounded = scaled.round();
            if (scaled - rounded).abs() > 1e-9 * scaled.abs().max(1.0) {
                continue 'scale;
            }
            ints.push(rounded as usize);
        }
        let cap = (k.capacity * scale + 1e-9 * (k.capacity * scale).max(1.0)).floor();
        return Ok((ints, cap as usize));
    }
    Err(Error::NonIntegralWeights)
}

/// 0-1 knapsack by dynamic programming over integer capacities.
///
/// Items with nonpositive value are never selected.
pub fn solve_knapsack_dp(values: &[f64], k: &KnapsackConstraint) -> Result<OracleResult> {
    check_values(values, &Constraint::Knapsack(k.clone()))?;
    let (weights, capacity) = integerize(k)?;

    let items: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    let reachable: usize = items.iter().map(|&i| weights[i]).sum();
    let cap = capacity.min(reachable);
    let width = cap + 1;
    if items.len().saturating_mul(width) > MAX_DP_CELLS {
        return Err(Error::TooLarge(format!(
            "knapsack DP table of {} x {width}",
            items.len()
        )));
    }

    let mut best = vec![0.0f64; width];
    let mut take = vec![false; items.len() * width];
    for (row, &i) in items.iter().enumerate() {
        let w = weights[i];
        if w > cap {
            continue;
        }
        for c in (w..=cap).rev() {
            let cand = best[c - w] + values[i];
            if cand > best[c] {
                best[c] = cand;
                take[row * width + c] = true;
            }
        }
    }

    let mut selected = vec![false; values.len()];
    let mut c = cap;
    for (row, &i) in items.iter().enumerate().rev() {
        if take[row * width + c] {
            selected[i] = true;
            c -= weights[i];
        }
    }
    OracleResult::new(Solution::knapsack(selected), values)
}

struct BranchBound<'a> {
    values: Vec<f64>,
    weights: Vec<f64>,
    order: &'a [usize],
    best_value: f64,
    best: Vec<bool>,
    current: Vec<bool>,
}

impl BranchBound<'_> {
    /// Dantzig bound: greedy fill by density with one fractional item.
    fn bound(&self, depth: usize, mut room: f64, value: f64) -> f64 {
        let mut ub = value;
        for &i in &self.order[depth..] {
            let w = self.weights[i];
            if w <= room {
                room -= w;
                ub += self.values[i];
            } else {
                ub += self.values[i] * room / w;
                break;
            }
        }
        ub
    }

    fn search(&mut self, depth: usize, room: f64, value: f64) {
        if value > self.best_value {
            self.best_value = value;
            self.best.copy_from_slice(&self.current);
        }
        if depth == self.order.len() {
            return;
        }
        let slack = 1e-12 * self.best_value.abs().max(1.0);
        if self.bound(depth, room, value) <= self.best_value + slack {
            return;
        }
        let i = self.order[depth];
        let w = self.weights[i];
        if w <= room {
            self.current[i] = true;
            self.search(depth + 1, room - w, value + self.values[i]);
            self.current[i] = false;
        }
        self.search(depth + 1, room, value);
    }
}

/// 0-1 knapsack by depth-first branch-and-bound with the LP-relaxation
/// bound. Works with real-valued weights.
pub fn solve_knapsack_bb(values: &[f64], k: &KnapsackConstraint) -> Result<OracleResult> {
    check_values(values, &Constraint::Knapsack(k.clone()))?;
    let n = values.len();
    let mut selected = vec![false; n];
    let mut order = Vec::new();
    for i in 0..n {
        if values[i] <= 0.0 {
            continue;
        }
        if k.weights[i] == 0.0 {
            selected[i] = true;
        } else {
            order.push(i);
        }
    }
    order.sort_by(|&a, &b| {
        let da = values[a] / k.weights[a];
        let db = values[b] / k.weights[b];
        db.partial_cmp(&da).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });

    let mut bb = BranchBound {
        values: values.to_vec(),
        weights: k.weights.clone(),
        order: &order,
        best_value: 0.0,
        best: vec![false; n],
        current: vec![false; n],
    };
    bb.search(0, k.capacity, 0.0);
    for (s, b) in selected.iter_mut().zip(&bb.best) {
        *s |= *b;
    }
    OracleResult::new(Solution::knapsack(selected), values)
}
