//! Coordinate-descent training on regret.
//!
//! Each mini-batch visits the model coefficients in ascending order. For one
//! coefficient, the transition profiles of all batch problem sets are
//! extracted around its current value, a target value is selected by the
//! variant's comparison rule and the coefficient moves part of the way there:
//! `beta_new = beta_old + lr * (beta_opt - beta_old)`.
//! The intercept keeps its warmstart value.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{dim_check, Error, Result};
use crate::model::{LinearModel, ProblemSet, OBJECTIVE_TOL};
use crate::regret::{mean, Evaluator};
use crate::transition::{extract_full, extract_greedy, SearchSpec, TransitionProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Every interval midpoint of every problem set is compared on the batch.
    Dnl,
    /// Only each problem set's own best midpoint is compared on the batch.
    DnlMax,
    /// Extraction stops at the first improving transition per problem set.
    DnlGreedy,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Dnl => "dnl",
            Variant::DnlMax => "dnl-max",
            Variant::DnlGreedy => "dnl-greedy",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnl" | "dnl-full" => Ok(Variant::Dnl),
            "dnl-max" => Ok(Variant::DnlMax),
            "dnl-greedy" => Ok(Variant::DnlGreedy),
            other => Err(Error::InvalidInput(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Wall-clock budget, checked between mini-batches.
    pub max_seconds: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Dnl,
            batch_size: 32,
            learning_rate: 0.1,
            max_epochs: 20,
            max_seconds: 120.0,
            early_stop_patience: 5,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.max_seconds > 0.0) {
            return Err(Error::InvalidInput("time budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_regret: f64,
    pub val_regret: f64,
    /// Wall time since training started.
    pub seconds: f64,
    /// Cumulative oracle calls spent on extraction and selection; the
    /// regret evaluations recorded here are not included.
    pub oracle_calls: u64,
}

/// Oracle accounting for one parameter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRecord {
    pub batch_len: usize,
    /// Sum over problem sets of their own candidate counts.
    pub own_candidates: usize,
    pub extraction_calls: u64,
    /// Calls made while comparing candidates.
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub variant: Variant,
    /// Epoch 0 is the warmstart model.
    pub epochs: Vec<EpochRecord>,
    pub best_model: LinearModel,
    pub best_epoch: usize,
    /// The time budget ran out before `max_epochs` or early stopping.
    pub truncated: bool,
    pub selections: Vec<SelectionRecord>,
}

impl TrainTrace {
    pub fn total_oracle_calls(&self) -> u64 {
        self.epochs.last().map_or(0, |e| e.oracle_calls)
    }

    /// Writes `epoch,train_regret,val_regret,seconds,oracle_calls`. Without
    /// `with_seconds` the wall-time column is omitted, which makes the output
    /// a deterministic function of data, config and seed.
    pub fn write_csv<W: Write>(&self, out: W, with_seconds: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if with_seconds {
            w.write_record(["epoch", "train_regret", "val_regret", "seconds", "oracle_calls"])?;
        } else {
            w.write_record(["epoch", "train_regret", "val_regret", "oracle_calls"])?;
        }
        for e in &self.epochs {
            let mut row = vec![
                e.epoch.to_string(),
                format!("{:?}", e.train_regret),
                format!("{:?}", e.val_regret),
            ];
            if with_seconds {
                row.push(format!("{:.6}", e.seconds));
            }
            row.push(e.oracle_calls.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of comparing candidate parameter values on a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub beta: f64,
    pub mean_regret: f64,
    /// Calls made while comparing candidates.
    pub oracle_calls: u64,
    pub own_candidates: usize,
    /// Calls made by transition extraction; zero unless produced by
    /// [`step_coordinate`].
    pub extraction_calls: u64,
}

fn dedup_sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    xs
}

/// Midpoints of the pieces between consecutive transition points (region
/// endpoints included) across all profiles, plus the current value.
pub fn candidate_betas(profiles: &[TransitionProfile], current: f64) -> Vec<f64> {
    let near = |x: f64| (x - current).abs() <= 1e-12 * x.abs().max(1.0);
    let mut out = vec![current];
    for prof in profiles {
        let mut bounds = vec![prof.lower];
        bounds.extend(prof.transition_points());
        bounds.push(prof.upper);
        // the current value itself stands in for any midpoint within rounding of it
        out.extend(bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).filter(|&m| !near(m)));
    }
    dedup_sorted(out)
}

/// Index of the smallest score; near-ties go to the value closest to
/// `current`, then to the smaller value.
fn argmin_near(cands: &[f64], scores: &[f64], current: f64) -> usize {
    let mut best = 0;
    for i in 1..cands.len() {
        let (s, b) = (scores[i], scores[best]);
        let better = if s < b - OBJECTIVE_TOL {
            true
        } else if s <= b + OBJECTIVE_TOL {
            let (d, db) = ((cands[i] - current).abs(), (cands[best] - current).abs());
            d < db || (d == db && cands[i] < cands[best])
        } else {
            false
        };
        if better {
            best = i;
        }
    }
    best
}

/// Regret of every (candidate, problem) pair, in row-major order.
fn regret_table(
    cands: &[f64],
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|c| (0..batch.len()).map(move |p| (c, p)))
        .collect();
    let flat: Vec<f64> = pairs
        .par_iter()
        .map(|&(c, p)| eval.regret_at(model, batch[p], index, cands[c]))
        .collect::<Result<_>>()?;
    Ok(flat.chunks(batch.len()).map(<[f64]>::to_vec).collect())
}

fn check_batch(candidates_empty: bool, batch: &[&ProblemSet]) -> Result<()> {
    if candidates_empty {
        return Err(Error::InvalidInput("no candidate parameter values".into()));
    }
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    Ok(())
}

/// Full comparison: every candidate is evaluated on every batch member.
pub fn select_beta_full(
    candidates: &[f64],
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<Selection> {
    check_batch(candidates.is_empty(), batch)?;
    let current = model.coefficients()[index];
    let before = eval.predicted_solves();
    let table = regret_table(candidates, batch, model, index, eval)?;
    let means: Vec<f64> = table.iter().map(|row| mean(row)).collect();
    let best = argmin_near(candidates, &means, current);
    Ok(Selection {
        beta: candidates[best],
        mean_regret: means[best],
        oracle_calls: eval.predicted_solves() - before,
        own_candidates: candidates.len(),
        extraction_calls: 0,
    })
}

/// Compares per-problem winners on the whole batch.
///
/// `winners[i]` is problem `i`'s preferred value, if any; `known` holds
/// regrets already computed for (problem, value) pairs.
fn compare_winners(
    winners: Vec<f64>,
    mut known: HashMap<(usize, u64), f64>,
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<(f64, f64)> {
    let current = model.coefficients()[index];
    let mut pool = winners;
    pool.push(current);
    let pool = dedup_sorted(pool);

    let missing: Vec<(usize, usize)> = (0..pool.len())
        .flat_map(|c| (0..batch.len()).map(move |p| (c, p)))
        .filter(|&(c, p)| !known.contains_key(&(p, pool[c].to_bits())))
        .collect();
    let fresh: Vec<f64> = missing
        .par_iter()
        .map(|&(c, p)| eval.regret_at(model, batch[p], index, pool[c]))
        .collect::<Result<_>>()?;
    for (&(c, p), r) in missing.iter().zip(fresh) {
        known.insert((p, pool[c].to_bits()), r);
    }
    let means: Vec<f64> = pool
        .iter()
        .map(|b| {
            let row: Vec<f64> = (0..batch.len()).map(|p| known[&(p, b.to_bits())]).collect();
            mean(&row)
        })
        .collect();
    let best = argmin_near(&pool, &means, current);
    Ok((pool[best], means[best]))
}

/// DnL-MAX: each problem set first picks its own best midpoint; only those
/// winners (and the current value) are compared on the whole batch.
pub fn select_beta_max(
    profiles: &[TransitionProfile],
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<Selection> {
    check_batch(false, batch)?;
    dim_check("profiles vs batch", batch.len(), profiles.len())?;
    let current = model.coefficients()[index];
    let before = eval.predicted_solves();

    let own: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| candidate_betas(std::slice::from_ref(p), current))
        .collect();
    let own_candidates = own.iter().map(Vec::len).sum();
    let own_regrets: Vec<Vec<f64>> = own
        .par_iter()
        .enumerate()
        .map(|(i, cands)| {
            cands
                .iter()
                .map(|&c| eval.regret_at(model, batch[i], index, c))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut known = HashMap::new();
    let mut winners = Vec::with_capacity(batch.len());
    for (i, (cands, regrets)) in own.iter().zip(&own_regrets).enumerate() {
        for (c, r) in cands.iter().zip(regrets) {
            known.insert((i, c.to_bits()), *r);
        }
        winners.push(cands[argmin_near(cands, regrets, current)]);
    }
    let (beta, mean_regret) = compare_winners(winners, known, batch, model, index, eval)?;
    Ok(Selection {
        beta,
        mean_regret,
        oracle_calls: eval.predicted_solves() - before,
        own_candidates,
        extraction_calls: 0,
    })
}

/// DnL-Greedy: each problem set contributes at most its improving point
/// from greedy extraction; those and the current value are compared.
pub fn select_beta_greedy(
    profiles: &[TransitionProfile],
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<Selection> {
    check_batch(false, batch)?;
    dim_check("profiles vs batch", batch.len(), profiles.len())?;
    let before = eval.predicted_solves();
    let winners: Vec<f64> = profiles
        .iter()
        .filter_map(|p| p.improvement.map(|imp| imp.beta))
        .collect();
    let own_candidates = winners.len();
    let (beta, mean_regret) = compare_winners(winners, HashMap::new(), batch, model, index, eval)?;
    Ok(Selection {
        beta,
        mean_regret,
        oracle_calls: eval.predicted_solves() - before,
        own_candidates,
        extraction_calls: 0,
    })
}

/// Extracts profiles for one coordinate and returns the variant's selection.
pub fn step_coordinate(
    variant: Variant,
    batch: &[&ProblemSet],
    model: &LinearModel,
    index: usize,
    eval: &Evaluator<'_>,
) -> Result<Selection> {
    let current = model.coefficients()[index];
    let spec = SearchSpec::around(current);
    let before = eval.predicted_solves();
    let profiles: Vec<TransitionProfile> = batch
        .par_iter()
        .map(|ps| match variant {
            Variant::DnlGreedy => extract_greedy(model, ps, index, &spec, eval, current),
            Variant::Dnl | Variant::DnlMax => extract_full(model, ps, index, &spec, eval),
        })
        .collect::<Result<_>>()?;
    let extraction_calls = eval.predicted_solves() - before;
    let mut sel = match variant {
        Variant::Dnl => {
            let cands = candidate_betas(&profiles, current);
            select_beta_full(&cands, batch, model, index, eval)
        }
        Variant::DnlMax => select_beta_max(&profiles, batch, model, index, eval),
        Variant::DnlGreedy => select_beta_greedy(&profiles, batch, model, index, eval),
    }?;
    sel.extraction_calls = extraction_calls;
    Ok(sel)
}

/// Trains from `warmstart` with early stopping on validation regret.
pub fn train(
    train_sets: &[ProblemSet],
    validation: &[ProblemSet],
    config: &TrainConfig,
    eval: &Evaluator<'_>,
    warmstart: &LinearModel,
) -> Result<TrainTrace> {
    config.validate()?;
    if train_sets.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    dim_check("warmstart vs features", train_sets[0].feature_dim(), warmstart.dim())?;

    let clock = Instant::now();
    let work = std::cell::Cell::new(0u64);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut model = warmstart.clone();

    let record = |epoch: usize, model: &LinearModel| -> Result<EpochRecord> {
        let train_regret = eval.mean_regret(model, train_sets)?;
        let val_regret = if validation.is_empty() {
            train_regret
        } else {
            eval.mean_regret(model, validation)?
        };
        Ok(EpochRecord {
            epoch,
            train_regret,
            val_regret,
            seconds: clock.elapsed().as_secs_f64(),
            oracle_calls: work.get(),
        })
    };

    let first = record(0, &model)?;
    let mut best = (first.val_regret, 0usize, model.clone());
    let mut epochs = vec![first];
    let mut selections = Vec::new();
    let mut stale = 0;
    let mut truncated = false;
    let mut order: Vec<usize> = (0..train_sets.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if clock.elapsed().as_secs_f64() > config.max_seconds {
                truncated = true;
                break;
            }
            let batch: Vec<&ProblemSet> = chunk.iter().map(|&i| &train_sets[i]).collect();
            for k in 0..model.dim() {
                let sel = step_coordinate(config.variant, &batch, &model, k, eval).map_err(|e| {
                    log::error!("epoch {epoch}, parameter {k}: {e}");
                    e
                })?;
                selections.push(SelectionRecord {
                    batch_len: batch.len(),
                    own_candidates: sel.own_candidates,
                    extraction_calls: sel.extraction_calls,
                    oracle_calls: sel.oracle_calls,
                });
                work.set(work.get() + sel.extraction_calls + sel.oracle_calls);
                let old = model.coefficients()[k];
                let new = (1.0 - config.learning_rate) * old + config.learning_rate * sel.beta;
                model = model.with_coefficient(k, new)?;
            }
        }
        let rec = record(epoch, &model)?;
        log::debug!(
            "{} epoch {epoch}: train {:.6} val {:.6}",
            config.variant,
            rec.train_regret,
            rec.val_regret
        );
        if rec.val_regret < best.0 {
            best = (rec.val_regret, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        epochs.push(rec);
        if truncated || (config.early_stop_patience > 0 && stale >= config.early_stop_patience) {
            break;
        }
    }

    Ok(TrainTrace {
        variant: config.variant,
        epochs,
        best_model: best.2,
        best_epoch: best.1,
        truncated,
        selections,
    })
}
