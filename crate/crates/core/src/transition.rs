//! Transition-point extraction along a single model parameter.
//!
//! With every other parameter fixed, the predicted optimal value
//! `POV(beta) = max_{x in C} x^T v_p(beta)` is the maximum of finitely many
//! lines in `beta`, hence convex and piecewise linear. Its kinks are exactly
//! the parameter values where the optimizer's argmax changes. Three samples
//! are collinear iff no kink lies strictly between the outer two, so a
//! coarse grid can discard kink-free stretches and only the non-collinear
//! spans are re-sampled with a finer step.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::model::{LinearModel, ProblemSet, OBJECTIVE_TOL};
use crate::regret::{Evaluator, Probe};

/// Relative tolerance on the collinearity cross term.
pub const COLLINEAR_TOL: f64 = 1e-7;

/// Region and resolution of a transition-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub lower: f64,
    pub upper: f64,
    /// Samples on the first, coarsest grid.
    pub initial_points: usize,
    /// Step reduction between refinement levels.
    pub shrink_factor: f64,
    /// Refinement stops once the grid step is at most this.
    pub min_step: f64,
}

impl SearchSpec {
    pub fn new(lower: f64, upper: f64, min_step: f64) -> Result<Self> {
        let s = SearchSpec {
            lower,
            upper,
            initial_points: 10,
            shrink_factor: 10.0,
            min_step,
        };
        s.validate()?;
        Ok(s)
    }

    /// Search region relative to the current parameter value: a half-width
    /// of `1.5 |beta|` around `beta` with a minimum step of `|beta| / 10`.
    /// A zero parameter gets the absolute region `[-1, 1]` and step `0.01`.
    pub fn around(beta: f64) -> Self {
        let (lower, upper, min_step) = if beta == 0.0 {
            (-1.0, 1.0, 0.01)
        } else {
            let half = 1.5 * beta.abs();
            (beta - half, beta + half, beta.abs() / 10.0)
        };
        SearchSpec {
            lower,
            upper,
            initial_points: 10,
            shrink_factor: 10.0,
            min_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lower.is_finite()
            && self.upper.is_finite()
            && self.lower < self.upper
            && self.initial_points >= 3
            && self.shrink_factor > 1.0
            && self.min_step > 0.0
            && self.min_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid search spec {self:?}")))
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// A parameter value just past a transition whose true objective beats the
/// starting parameter's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub beta: f64,
    pub tov: f64,
}

/// Transition intervals of one problem set along one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProfile {
    pub lower: f64,
    pub upper: f64,
    /// Sorted, non-overlapping, each certified to contain a transition point.
    pub intervals: Vec<(f64, f64)>,
    /// Oracle calls spent.
    pub probe_count: usize,
    /// Set by greedy extraction when it stopped at an improving transition.
    pub improvement: Option<Improvement>,
}

impl TransitionProfile {
    /// Interval midpoints, used as transition point estimates.
    pub fn transition_points(&self) -> Vec<f64> {
        self.intervals.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Whether three points with increasing abscissae lie on one line, up to a
/// tolerance relative to `max(1, |y1|, |y3|)`.
pub fn collinear(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), tol: f64) -> bool {
    let cross = (p2.1 - p1.1) * (p3.0 - p2.0) - (p3.1 - p2.1) * (p2.0 - p1.0);
    let scale = 1f64.max(p1.1.abs()).max(p3.1.abs());
    cross.abs() <= tol * scale
}

/// Memoized POV probes along one parameter. Abscissae are keyed on a fine
/// lattice so that grids built from different origins share samples.
struct Sampler<'a, 'o> {
    eval: &'a Evaluator<'o>,
    model: &'a LinearModel,
    problem: &'a ProblemSet,
    index: usize,
    origin: f64,
    quantum: f64,
    samples: BTreeMap<i64, (f64, Probe)>,
    probes: usize,
}

impl<'a, 'o> Sampler<'a, 'o> {
    fn new(
        eval: &'a Evaluator<'o>,
        model: &'a LinearModel,
        problem: &'a ProblemSet,
        index: usize,
        spec: &SearchSpec,
    ) -> Result<Self> {
        if index >= model.dim() {
            return Err(Error::InvalidInput(format!(
                "parameter index {index} out of range for {} coefficients",
                model.dim()
            )));
        }
        Ok(Sampler {
            eval,
            model,
            problem,
            index,
            origin: spec.lower,
            quantum: (spec.upper - spec.lower) * 1e-10,
            samples: BTreeMap::new(),
            probes: 0,
        })
    }

    fn key(&self, x: f64) -> i64 {
        ((x - self.origin) / self.quantum).round() as i64
    }

    fn probe(&mut self, x: f64) -> Result<&Probe> {
        let k = self.key(x);
        if !self.samples.contains_key(&k) {
            let p = self.eval.probe(self.model, self.problem, self.index, x)?;
            self.probes += 1;
            self.samples.insert(k, (x, p));
        }
        Ok(&self.samples[&k].1)
    }

    /// Samples `[lo, hi]` on `cells` uniform cells and returns the outer
    /// abscissae of every non-collinear consecutive triple, plus the step.
    fn scan(&mut self, lo: f64, hi: f64, cells: usize) -> Result<(Vec<(f64, f64)>, f64)> {
        let cells = cells.max(2);
        let h = (hi - lo) / cells as f64;
        let xs: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { hi } else { lo + h * i as f64 })
            .collect();
        let mut ys = Vec::with_capacity(xs.len());
        for &x in &xs {
            ys.push(self.probe(x)?.pov);
        }
        let triples = (0..xs.len() - 2)
            // grid units as abscissae: the cross term then shrinks like h, not h^2
            .filter(|&i| !collinear((0.0, ys[i]), (1.0, ys[i + 1]), (2.0, ys[i + 2]), COLLINEAR_TOL))
            .map(|i| (xs[i], xs[i + 2]))
            .collect();
        Ok((triples, h))
    }

    fn cells_for(lo: f64, hi: f64, step: f64) -> usize {
        ((hi - lo) / step - 1e-9).ceil().max(2.0) as usize
    }

    /// The known stretch just beyond `edge` on which the solution found at
    /// `edge` stays optimal; returns its midpoint and that solution's TOV.
    fn beyond(&self, edge: f64, leftward: bool) -> Improvement {
        let k = self.key(edge);
        let at_edge = &self.samples[&k].1;
        let mut far = edge;
        let walk: Box<dyn Iterator<Item = &(f64, Probe)>> = if leftward {
            Box::new(self.samples.range(..k).rev().map(|(_, v)| v))
        } else {
            Box::new(self.samples.range(k + 1..).map(|(_, v)| v))
        };
        for (x, p) in walk {
            if p.solution != at_edge.solution {
                break;
            }
            far = *x;
        }
        Improvement {
            beta: 0.5 * (edge + far),
            tov: at_edge.tov,
        }
    }
}

/// Joins spans that overlap by more than `tol`; spans that merely touch stay
/// apart.
fn merge(mut spans: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(spans.len());
    for (lo, hi) in spans {
        match out.last_mut() {
            Some(last) if last.1 > lo + tol => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Full divide-and-conquer extraction over the whole search region.
pub fn extract_full(
    model: &LinearModel,
    problem: &ProblemSet,
    index: usize,
    spec: &SearchSpec,
    eval: &Evaluator<'_>,
) -> Result<TransitionProfile> {
    spec.validate()?;
    let mut sampler = Sampler::new(eval, model, problem, index, spec)?;
    let mut pending = vec![(spec.lower, spec.upper, spec.initial_points - 1)];
    let mut found = Vec::new();
    while let Some((lo, hi, cells)) = pending.pop() {
        let (triples, h) = sampler.scan(lo, hi, cells)?;
        let spans = merge(triples, sampler.quantum);
        if h <= spec.min_step {
            found.extend(spans);
        } else {
            let next = h / spec.shrink_factor;
            pending.extend(
                spans
                    .into_iter()
                    .map(|(a, b)| (a, b, Sampler::cells_for(a, b, next))),
            );
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TransitionProfile {
        lower: spec.lower,
        upper: spec.upper,
        intervals: found,
        probe_count: sampler.probes,
        improvement: None,
    })
}

#[derive(Debug, PartialEq)]
struct Pending {
    distance: f64,
    seq: usize,
    lo: f64,
    hi: f64,
    /// Step of the grid that produced this span.
    step: f64,
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap pops the nearest span first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .distance
            .total_cmp(&self.distance)
            .then(other.seq.cmp(&self.seq))
    }
}

fn distance(lo: f64, hi: f64, x: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Greedy extraction: refines each non-collinear triple on its own, nearest
/// to `beta_old` first, and stops at
/// the first localized transition beyond which the true objective strictly
/// improves on `TOV(beta_old)`.
///
/// When nothing improves, every span ends up refined and the result equals
/// the full profile.
pub fn extract_greedy(
    model: &LinearModel,
    problem: &ProblemSet,
    index: usize,
    spec: &SearchSpec,
    eval: &Evaluator<'_>,
    beta_old: f64,
) -> Result<TransitionProfile> {
    spec.validate()?;
    if !spec.contains(beta_old) {
        return Err(Error::InvalidInput(format!(
            "beta_old {beta_old} outside search region [{}, {}]",
            spec.lower, spec.upper
        )));
    }
    let mut sampler = Sampler::new(eval, model, problem, index, spec)?;
    let baseline = sampler.probe(beta_old)?.tov;

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut push = |heap: &mut BinaryHeap<Pending>, spans: Vec<(f64, f64)>, step: f64| {
        for (lo, hi) in spans {
            heap.push(Pending {
                distance: distance(lo, hi, beta_old),
                seq,
                lo,
                hi,
                step,
            });
            seq += 1;
        }
    };

    let (spans, h) = sampler.scan(spec.lower, spec.upper, spec.initial_points - 1)?;
    push(&mut heap, spans, h);

    let mut found = Vec::new();
    while let Some(next) = heap.pop() {
        if next.step > spec.min_step {
            let cells = Sampler::cells_for(next.lo, next.hi, next.step / spec.shrink_factor);
            let (spans, h) = sampler.scan(next.lo, next.hi, cells)?;
            push(&mut heap, spans, h);
            continue;
        }
        let (lo, hi) = (next.lo, next.hi);
        let mut sides = Vec::with_capacity(2);
        if lo < beta_old {
            sides.push(sampler.beyond(lo, true));
        }
        if hi > beta_old {
            sides.push(sampler.beyond(hi, false));
        }
        let best = sides
            .into_iter()
            .filter(|s| s.tov > baseline + OBJECTIVE_TOL)
            .max_by(|a, b| a.tov.total_cmp(&b.tov));
        if let Some(improvement) = best {
            return Ok(TransitionProfile {
                lower: spec.lower,
                upper: spec.upper,
                intervals: vec![(lo, hi)],
                probe_count: sampler.probes,
                improvement: Some(improvement),
            });
        }
        found.push((lo, hi));
    }
    Ok(TransitionProfile {
        lower: spec.lower,
        upper: spec.upper,
        intervals: merge(found, sampler.quantum),
        probe_count: sampler.probes,
        improvement: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, KnapsackConstraint};
    use crate::oracle::ExactOracle;

    fn example() -> (ProblemSet, LinearModel) {
        let ps = ProblemSet::new(
            "ex1",
            vec![2.0, 1.0, 3.0],
            vec![vec![-1.0, 3.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            Constraint::Knapsack(KnapsackConstraint::unit(3, 2.0).unwrap()),
        )
        .unwrap();
        (ps, LinearModel::new(vec![1.0, 1.0], 0.0).unwrap())
    }

    #[test]
    fn collinear_examples() {
        assert!(collinear((0.0, 0.0), (1.0, 1.0), (2.0, 2.0), 1e-9));
        assert!(collinear((0.0, 0.0), (1.0, 1.0), (2.0, 2.0 + 5e-13), 1e-9));
        // POV of the worked example at -1, 1, 3 is 5, 4, 5
        assert!(!collinear((-1.0, 5.0), (1.0, 4.0), (3.0, 5.0), COLLINEAR_TOL));
    }

    #[test]
    fn search_spec_relative_region() {
        let s = SearchSpec::around(2.0);
        assert_eq!((s.lower, s.upper, s.min_step), (-1.0, 5.0, 0.2));
        let s = SearchSpec::around(-2.0);
        assert_eq!((s.lower, s.upper, s.min_step), (-5.0, 1.0, 0.2));
        let s = SearchSpec::around(0.0);
        assert_eq!((s.lower, s.upper, s.min_step), (-1.0, 1.0, 0.01));
        assert!(SearchSpec::new(1.0, 1.0, 0.1).is_err());
        assert!(SearchSpec::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn worked_example_has_two_transitions() {
        let (ps, m) = example();
        let e = Evaluator::new(&ExactOracle);
        let spec = SearchSpec::new(-5.0, 5.0, 0.05).unwrap();
        let prof = extract_full(&m, &ps, 0, &spec, &e).unwrap();
        assert_eq!(prof.intervals.len(), 2, "{:?}", prof.intervals);
        let (a, b) = prof.intervals[0];
        assert!(a < 0.0 && 0.0 < b && b - a <= 0.05);
        let (a, b) = prof.intervals[1];
        assert!(a < 2.0 && 2.0 < b && b - a <= 0.05);
        assert_eq!(prof.probe_count as u64, e.predicted_solves());
    }

    #[test]
    fn linear_pov_has_no_transitions() {
        // one item that always dominates: capacity 1, item 0 worth far more
        let ps = ProblemSet::new(
            "lin",
            vec![10.0, 1.0],
            vec![vec![1.0, 100.0], vec![1.0, 0.0]],
            Constraint::Knapsack(KnapsackConstraint::unit(2, 1.0).unwrap()),
        )
        .unwrap();
        let m = LinearModel::new(vec![1.0, 1.0], 0.0).unwrap();
        let e = Evaluator::new(&ExactOracle);
        let prof = extract_full(&m, &ps, 0, &SearchSpec::new(-5.0, 5.0, 0.05).unwrap(), &e).unwrap();
        assert!(prof.intervals.is_empty());
        assert_eq!(prof.probe_count, 10);
    }

    #[test]
    fn greedy_stops_at_improving_transition() {
        let (ps, m) = example();
        let e = Evaluator::new(&ExactOracle);
        let spec = SearchSpec::new(-5.0, 5.0, 0.05).unwrap();
        let prof = extract_greedy(&m, &ps, 0, &spec, &e, 3.0).unwrap();
        assert_eq!(prof.intervals.len(), 1);
        let (a, b) = prof.intervals[0];
        assert!(a < 2.0 && 2.0 < b);
        let imp = prof.improvement.unwrap();
        assert_eq!(imp.tov, 5.0);
        assert!(imp.beta > 0.0 && imp.beta < 2.0);
        let full = extract_full(&m, &ps, 0, &spec, &Evaluator::new(&ExactOracle)).unwrap();
        assert!(prof.probe_count < full.probe_count + 1);
    }

    #[test]
    fn greedy_without_improvement_matches_full() {
        let (ps, m) = example();
        let spec = SearchSpec::new(-5.0, 5.0, 0.05).unwrap();
        // beta_1 = 1 already attains the true optimum
        let g = extract_greedy(&m, &ps, 0, &spec, &Evaluator::new(&ExactOracle), 1.0).unwrap();
        let f = extract_full(&m, &ps, 0, &spec, &Evaluator::new(&ExactOracle)).unwrap();
        assert!(g.improvement.is_none());
        assert_eq!(g.intervals.len(), f.intervals.len());
        for (a, b) in g.intervals.iter().zip(&f.intervals) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn greedy_rejects_start_outside_region() {
        let (ps, m) = example();
        let spec = SearchSpec::new(-5.0, 5.0, 0.05).unwrap();
        assert!(extract_greedy(&m, &ps, 0, &spec, &Evaluator::new(&ExactOracle), 7.0).is_err());
    }
}
