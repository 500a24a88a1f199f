//! Data ingestion, synthetic generation, dataset construction and folds.
//!
//! A [`RawSeries`] is a time-ordered table of feature rows with a target
//! price; every `group_size` consecutive rows (48 half-hours, one day) form
//! one problem set.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{
    Constraint, Dataset, JobSpec, KnapsackConstraint, LinearModel, MachineSpec, ProblemSet,
    SchedulingConstraint,
};
use crate::oracle::solve_scheduling;

pub const DEFAULT_GROUP_SIZE: usize = 48;

/// Knapsack item weights in weighted mode.
pub const WEIGHT_CHOICES: [f64; 3] = [3.0, 5.0, 7.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub timestamp: String,
    pub features: Vec<f64>,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub feature_names: Vec<String>,
    pub rows: Vec<SeriesRow>,
    pub group_size: usize,
    /// Generating linear map, known only for synthetic series.
    pub hidden_map: Option<LinearModel>,
}

impl RawSeries {
    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Complete groups; a trailing partial group is dropped with a warning.
    pub fn groups(&self) -> std::slice::ChunksExact<'_, SeriesRow> {
        let rest = self.rows.len() % self.group_size;
        if rest != 0 {
            log::warn!(
                "dropping {rest} trailing rows that do not fill a group of {}",
                self.group_size
            );
        }
        self.rows.chunks_exact(self.group_size)
    }

    pub fn num_groups(&self) -> usize {
        self.rows.len() / self.group_size
    }

    /// Writes `timestamp,<features...>,price`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("price".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.timestamp.clone()];
            rec.extend(row.features.iter().map(f64::to_string));
            rec.push(row.price.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub timestamp_column: Option<String>,
    /// Empty means every column other than timestamp and price.
    pub feature_columns: Vec<String>,
    pub price_column: String,
    pub group_size: usize,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_column: Some("timestamp".into()),
            feature_columns: Vec::new(),
            price_column: "price".into(),
            group_size: DEFAULT_GROUP_SIZE,
        }
    }
}

/// Reads a comma-delimited file with a header row.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<RawSeries> {
    if schema.group_size == 0 {
        return Err(Error::InvalidInput("group size must be positive".into()));
    }
    let fmt_err = |message: String| Error::Format {
        path: path.to_owned(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(fmt_err("empty file or missing header".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| fmt_err(format!("missing column {name:?}")))
    };
    let price_col = find(&schema.price_column)?;
    let ts_col = match &schema.timestamp_column {
        Some(name) => Some(find(name)?),
        None => None,
    };
    let (feature_cols, feature_names): (Vec<usize>, Vec<String>) = if schema.feature_columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != price_col && Some(*i) != ts_col)
            .map(|(i, h)| (i, h.trim().to_string()))
            .unzip()
    } else {
        let mut cols = Vec::new();
        for name in &schema.feature_columns {
            cols.push(find(name)?);
        }
        (cols, schema.feature_columns.clone())
    };

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |col: usize, what: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("{what} {raw:?} is not a finite number"),
                })
        };
        let features = feature_cols
            .iter()
            .zip(&feature_names)
            .map(|(&c, n)| num(c, n))
            .collect::<Result<Vec<_>>>()?;
        let price = num(price_col, &schema.price_column)?;
        let timestamp = ts_col
            .and_then(|c| rec.get(c))
            .map_or_else(|| format!("row{}", rows.len()), str::to_string);
        rows.push(SeriesRow {
            timestamp,
            features,
            price,
        });
    }
    if rows.is_empty() {
        return Err(fmt_err("no data rows".into()));
    }
    Ok(RawSeries {
        feature_names,
        rows,
        group_size: schema.group_size,
        hidden_map: None,
    })
}

/// Synthetic price series: standard-normal features and
/// `price = beta^T theta + c + N(0, noise_sigma^2)` for a hidden seeded map.
pub fn synthesize(num_days: usize, p: usize, noise_sigma: f64, seed: u64) -> Result<RawSeries> {
    if num_days == 0 || p == 0 {
        return Err(Error::InvalidInput("need at least one day and one feature".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("bad noise level {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p)
        .map(|_| {
            let magnitude = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let hidden = LinearModel::new(beta, 1.0)?;
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rows = Vec::with_capacity(num_days * DEFAULT_GROUP_SIZE);
    for day in 0..num_days {
        for period in 0..DEFAULT_GROUP_SIZE {
            let features: Vec<f64> = (0..p).map(|_| std_normal.sample(&mut rng)).collect();
            let noise = noise_sigma * std_normal.sample(&mut rng);
            let price = hidden.predict_row(&features) + noise;
            rows.push(SeriesRow {
                timestamp: format!("d{day:04}-p{period:02}"),
                features,
                price,
            });
        }
    }
    Ok(RawSeries {
        feature_names: (0..p).map(|j| format!("f{j}")).collect(),
        rows,
        group_size: DEFAULT_GROUP_SIZE,
        hidden_map: Some(hidden),
    })
}

/// One knapsack problem set per group.
///
/// Unit mode: all weights 1 and item value = price. Weighted mode: each item
/// draws a weight from {3, 5, 7}, its value is weight x price and the weight
/// is appended to the feature row.
pub fn make_knapsack(series: &RawSeries, weighted: bool, capacity: f64, seed: u64) -> Result<Dataset> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::InvalidInput(format!("capacity must be positive, got {capacity}")));
    }
    build_knapsack(series, weighted, seed, |_| capacity)
}

/// Like [`make_knapsack`] with each capacity set to `fraction` of the
/// problem set's total weight.
pub fn make_knapsack_fraction(series: &RawSeries, weighted: bool, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("capacity fraction must lie in (0, 1], got {fraction}")));
    }
    build_knapsack(series, weighted, seed, |total| fraction * total)
}

fn build_knapsack(
    series: &RawSeries,
    weighted: bool,
    seed: u64,
    capacity: impl Fn(f64) -> f64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(series.num_groups());
    for (g, group) in series.groups().enumerate() {
        let n = group.len();
        let weights: Vec<f64> = if weighted {
            (0..n).map(|_| WEIGHT_CHOICES[rng.random_range(0..WEIGHT_CHOICES.len())]).collect()
        } else {
            vec![1.0; n]
        };
        let mut features = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for (row, &w) in group.iter().zip(&weights) {
            let mut f = row.features.clone();
            if weighted {
                f.push(w);
            }
            features.push(f);
            values.push(if weighted { w * row.price } else { row.price });
        }
        let cap = capacity(weights.iter().sum());
        let constraint = Constraint::Knapsack(KnapsackConstraint::new(weights, cap)?);
        sets.push(ProblemSet::new(format!("g{g:04}"), values, features, constraint)?);
    }
    Dataset::new(sets)
}

/// Size and seed of a generated scheduling instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulingLoad {
    pub machines: usize,
    pub jobs: usize,
    pub seed: u64,
}

/// Random feasible scheduling instance over `periods` periods. Instances
/// are redrawn until a feasible schedule exists.
pub fn scheduling_instance(load: &SchedulingLoad, periods: usize) -> Result<SchedulingConstraint> {
    if load.machines == 0 || periods < 2 {
        return Err(Error::InvalidInput("need machines and at least two periods".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(load.seed);
    let max_duration = (periods / 8).max(1);
    for _ in 0..100 {
        let machines: Vec<MachineSpec> = (0..load.machines)
            .map(|_| MachineSpec {
                capacity: rng.random_range(3..=5) as f64,
            })
            .collect();
        let jobs: Vec<JobSpec> = (0..load.jobs)
            .map(|_| {
                let duration = rng.random_range(1..=max_duration);
                let earliest_start = rng.random_range(0..=periods - duration);
                let slack = rng.random_range(0..=periods / 4);
                let latest_finish = (earliest_start + duration + slack).min(periods);
                JobSpec {
                    resource: rng.random_range(1..=3) as f64,
                    power: rng.random_range(1..=4) as f64,
                    duration,
                    earliest_start,
                    latest_finish,
                }
            })
            .collect();
        let c = SchedulingConstraint::new(machines, jobs, periods)?;
        match solve_scheduling(&vec![0.0; periods], &c) {
            Ok(_) => return Ok(c),
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible("could not draw a feasible scheduling instance".into()))
}

/// One scheduling problem set per group, sharing `constraint`; the
/// coefficients are the per-period prices.
pub fn make_scheduling(series: &RawSeries, constraint: &SchedulingConstraint) -> Result<Dataset> {
    if constraint.periods != series.group_size {
        return Err(Error::DimensionMismatch {
            context: "scheduling periods vs group size",
            expected: series.group_size,
            found: constraint.periods,
        });
    }
    let sets = series
        .groups()
        .enumerate()
        .map(|(g, group)| {
            ProblemSet::new(
                format!("g{g:04}"),
                group.iter().map(|r| r.price).collect(),
                group.iter().map(|r| r.features.clone()).collect(),
                Constraint::Scheduling(constraint.clone()),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(sets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub folds: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            folds: 5,
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.2,
        }
    }
}

/// Problem-set indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Contiguous, time-ordered folds.
///
/// With several folds the test blocks tile the series (fold `f` tests on the
/// `f`-th block of `n / folds` problem sets); with one fold the test block is
/// the last `round(test_frac n)` sets. Validation is the block of
/// `round(val_frac n)` sets preceding the test block (wrapping around) and
/// everything else is training data.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Vec<Fold>> {
    let total = spec.train_frac + spec.val_frac + spec.test_frac;
    if (total - 1.0).abs() > 1e-9 || [spec.train_frac, spec.val_frac, spec.test_frac].iter().any(|f| *f < 0.0) {
        return Err(Error::InvalidInput("split fractions must be nonnegative and sum to 1".into()));
    }
    if spec.folds == 0 {
        return Err(Error::InvalidInput("need at least one fold".into()));
    }
    let n_val = (spec.val_frac * n as f64).round() as usize;
    let mut folds = Vec::with_capacity(spec.folds);
    for f in 0..spec.folds {
        let (start, len) = if spec.folds == 1 {
            let len = (spec.test_frac * n as f64).round() as usize;
            (n - len, len)
        } else {
            let start = f * n / spec.folds;
            (start, (f + 1) * n / spec.folds - start)
        };
        if len + n_val >= n {
            return Err(Error::InvalidInput(format!(
                "{n} problem sets are too few for {} folds",
                spec.folds
            )));
        }
        let test: Vec<usize> = (start..start + len).collect();
        let validation: Vec<usize> = (1..=n_val).rev().map(|k| (start + n - k) % n).collect();
        let train: Vec<usize> = (0..n)
            .filter(|i| !test.contains(i) && !validation.contains(i))
            .collect();
        folds.push(Fold {
            train,
            validation,
            test,
        });
    }
    Ok(folds)
}

/// Serializes a dataset to the line-oriented cache format:
///
/// ```text
/// dnl-dataset 1
/// problem <id> knapsack <n> <capacity>
/// weights <w_1> ... <w_n>
/// problem <id> scheduling <periods>
/// machine <capacity>
/// job <resource> <power> <duration> <earliest_start> <latest_finish>
/// item <true value> <feature_1> ... <feature_p>
/// end
/// ```
///
/// One `problem ... end` block per problem set; ids must not contain
/// whitespace. Numbers use the shortest round-trip representation.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::from("dnl-dataset 1\n");
    for ps in dataset.problem_sets() {
        if ps.id().contains(char::is_whitespace) || ps.id().is_empty() {
            return Err(Error::InvalidInput(format!("problem id {:?} cannot be cached", ps.id())));
        }
        match ps.constraint() {
            Constraint::Knapsack(k) => {
                let _ = writeln!(out, "problem {} knapsack {} {}", ps.id(), k.len(), k.capacity);
                out.push_str("weights");
                for w in &k.weights {
                    let _ = write!(out, " {w}");
                }
                out.push('\n');
            }
            Constraint::Scheduling(s) => {
                let _ = writeln!(out, "problem {} scheduling {}", ps.id(), s.periods);
                for m in &s.machines {
                    let _ = writeln!(out, "machine {}", m.capacity);
                }
                for j in &s.jobs {
                    let _ = writeln!(
                        out,
                        "job {} {} {} {} {}",
                        j.resource, j.power, j.duration, j.earliest_start, j.latest_finish
                    );
                }
            }
        }
        for (v, row) in ps.true_values().iter().zip(ps.features()) {
            let _ = write!(out, "item {v}");
            for x in row {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

enum Pending {
    Knapsack { n: usize, capacity: f64, weights: Option<Vec<f64>> },
    Scheduling { periods: usize, machines: Vec<MachineSpec>, jobs: Vec<JobSpec> },
}

/// Reads the format produced by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line: line as u64,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "dnl-dataset 1")) => {}
        _ => return Err(perr(1, "missing 'dnl-dataset 1' header".into())),
    }

    fn nums<T: std::str::FromStr>(tokens: &[&str]) -> Option<Vec<T>> {
        tokens.iter().map(|t| t.parse().ok()).collect()
    }

    let mut sets = Vec::new();
    let mut current: Option<(String, Pending, Vec<f64>, Vec<Vec<f64>>)> = None;
    for (ln, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((&head, rest)) = tokens.split_first() else {
            continue;
        };
        let bad = |what: &str| perr(ln, format!("malformed {what} line"));
        match (head, current.as_mut()) {
            ("problem", None) => {
                let pending = match rest {
                    [_, "knapsack", n, cap] => Pending::Knapsack {
                        n: n.parse().map_err(|_| bad("problem"))?,
                        capacity: cap.parse().map_err(|_| bad("problem"))?,
                        weights: None,
                    },
                    [_, "scheduling", periods] => Pending::Scheduling {
                        periods: periods.parse().map_err(|_| bad("problem"))?,
                        machines: Vec::new(),
                        jobs: Vec::new(),
                    },
                    _ => return Err(bad("problem")),
                };
                current = Some((rest[0].to_string(), pending, Vec::new(), Vec::new()));
            }
            ("weights", Some((_, Pending::Knapsack { weights, .. }, _, _))) => {
                *weights = Some(nums(rest).ok_or_else(|| bad("weights"))?);
            }
            ("machine", Some((_, Pending::Scheduling { machines, .. }, _, _))) => {
                let v: Vec<f64> = nums(rest).filter(|v: &Vec<f64>| v.len() == 1).ok_or_else(|| bad("machine"))?;
                machines.push(MachineSpec { capacity: v[0] });
            }
            ("job", Some((_, Pending::Scheduling { jobs, .. }, _, _))) => {
                let (res, ints) = match rest {
                    [r, p, d, es, lf] => (
                        nums::<f64>(&[r, p]).ok_or_else(|| bad("job"))?,
                        nums::<usize>(&[d, es, lf]).ok_or_else(|| bad("job"))?,
                    ),
                    _ => return Err(bad("job")),
                };
                jobs.push(JobSpec {
                    resource: res[0],
                    power: res[1],
                    duration: ints[0],
                    earliest_start: ints[1],
                    latest_finish: ints[2],
                });
            }
            ("item", Some((_, _, values, features))) => {
                let v: Vec<f64> = nums(rest).filter(|v: &Vec<f64>| !v.is_empty()).ok_or_else(|| bad("item"))?;
                values.push(v[0]);
                features.push(v[1..].to_vec());
            }
            ("end", Some(_)) => {
                let (id, pending, values, features) = current.take().expect("checked");
                let constraint = match pending {
                    Pending::Knapsack { n, capacity, weights } => {
                        let weights = weights.ok_or_else(|| perr(ln, "knapsack block without weights".into()))?;
                        if weights.len() != n {
                            return Err(perr(ln, format!("expected {n} weights, found {}", weights.len())));
                        }
                        Constraint::Knapsack(KnapsackConstraint::new(weights, capacity)?)
                    }
                    Pending::Scheduling { periods, machines, jobs } => {
                        Constraint::Scheduling(SchedulingConstraint::new(machines, jobs, periods)?)
                    }
                };
                sets.push(ProblemSet::new(id, values, features, constraint)?);
            }
            (other, _) => return Err(perr(ln, format!("unexpected {other:?}"))),
        }
    }
    if current.is_some() {
        return Err(perr(text.lines().count(), "unterminated problem block".into()));
    }
    Dataset::new(sets)
}
