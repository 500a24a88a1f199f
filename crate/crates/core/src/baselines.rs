//! Ridge regression, used both as the prediction-focused baseline and as
//! the warmstart for regret training.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};
use crate::model::{LinearModel, ProblemSet};
use crate::regret::{mean, Evaluator};

/// Penalty grid searched by [`fit_ridge_grid`].
pub const L2_GRID: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub l2_penalty: f64,
    pub fit_intercept: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            l2_penalty: 0.0,
            fit_intercept: true,
        }
    }
}

/// Minimizes `sum (v - beta^T theta - c)^2 + lambda |beta|^2` over every
/// (feature row, true value) pair of the training problem sets. The
/// intercept is not penalized.
///
/// Solved through the SVD of the centered design matrix, which yields the
/// least-norm solution when the unpenalized system is singular.
pub fn fit_ridge(train: &[ProblemSet], config: &RidgeConfig) -> Result<LinearModel> {
    if !(config.l2_penalty >= 0.0 && config.l2_penalty.is_finite()) {
        return Err(Error::InvalidInput(format!("bad l2 penalty {}", config.l2_penalty)));
    }
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidInput("ridge needs training data".into()))?;
    let p = first.feature_dim();
    let rows: usize = train.iter().map(ProblemSet::len).sum();
    if rows < p + 1 {
        return Err(Error::InvalidInput(format!(
            "ridge needs at least {} rows, got {rows}",
            p + 1
        )));
    }

    let mut x = DMatrix::<f64>::zeros(rows, p);
    let mut y = DVector::<f64>::zeros(rows);
    let mut r = 0;
    for ps in train {
        dim_check("ridge feature dimension", p, ps.feature_dim())?;
        for (row, v) in ps.features().iter().zip(ps.true_values()) {
            x.row_mut(r).copy_from_slice(row);
            y[r] = *v;
            r += 1;
        }
    }

    let (x_mean, y_mean) = if config.fit_intercept {
        let xm: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
        (xm, y.mean())
    } else {
        (vec![0.0; p], 0.0)
    };
    for j in 0..p {
        x.column_mut(j).add_scalar_mut(-x_mean[j]);
    }
    y.add_scalar_mut(-y_mean);

    let svd = x.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s_max = svd.singular_values.max();
    let cutoff = s_max * 1e-12 * (rows.max(p) as f64);
    let uty = u.transpose() * &y;
    let mut shrunk = DVector::<f64>::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            shrunk[i] = s / (s * s + config.l2_penalty) * uty[i];
        }
    }
    let beta = vt.transpose() * shrunk;
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    LinearModel::new(coef, intercept)
}

/// Mean and sample standard deviation of per-problem regret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretSummary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl RegretSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let m = mean(values);
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        RegretSummary { mean: m, std, count: n }
    }
}

pub fn evaluate_model_regret(
    model: &LinearModel,
    problems: &[ProblemSet],
    eval: &Evaluator<'_>,
) -> Result<RegretSummary> {
    Ok(RegretSummary::from_values(&eval.regrets(model, problems)?))
}

/// Fits ridge for every penalty in [`L2_GRID`] and keeps the one with the
/// lowest validation regret (ties to the smaller penalty).
pub fn fit_ridge_grid(
    train: &[ProblemSet],
    validation: &[ProblemSet],
    eval: &Evaluator<'_>,
) -> Result<(LinearModel, f64)> {
    let holdout = if validation.is_empty() { train } else { validation };
    let mut best: Option<(f64, LinearModel, f64)> = None;
    for &l2 in &L2_GRID {
        let model = fit_ridge(
            train,
            &RidgeConfig {
                l2_penalty: l2,
                fit_intercept: true,
            },
        )?;
        let r = eval.mean_regret(&model, holdout)?;
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, model, l2));
        }
    }
    let (_, model, l2) = best.expect("grid is nonempty");
    Ok((model, l2))
}
