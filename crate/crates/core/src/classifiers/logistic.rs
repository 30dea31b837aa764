use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_both_classes, check_width, check_xy, ClassWeight};
use crate::error::{Error, Result};
use crate::numkit::AdamState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// L2 strength on the coefficients (the intercept is not penalized).
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient's infinity norm drops below this.
    pub tol: f64,
    pub learning_rate: f64,
    pub class_weight: ClassWeight,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iter: 20_000,
            tol: 1e-6,
            learning_rate: 0.05,
            class_weight: ClassWeight::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Log-odds per unit of each feature.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the gradient at the returned parameters.
    pub gradient_norm: f64,
}

/// Weighted mean log-loss plus `lambda / 2 * |w|^2`, and its gradient
/// `(dw, db)`.
fn loss_and_grad(
    x: ArrayView2<f64>,
    y: &[u8],
    sample_w: &[f64],
    w: &[f64],
    b: f64,
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let total_w: f64 = sample_w.iter().sum();
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let yi = f64::from(y[i]);
        // log(1 + e^z) - y z, evaluated stably
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        loss += sample_w[i] * (softplus - yi * z);
        let r = sample_w[i] * (crate::numkit::sigmoid(z) - yi);
        for (g, v) in gw.iter_mut().zip(row.iter()) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= total_w;
    gb /= total_w;
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / total_w + lambda * wj;
    }
    loss += 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    (loss, gw, gb)
}

/// The objective minimized by [`fit_lr`] (uniform class weights).
pub fn penalized_loss(x: ArrayView2<f64>, y: &[u8], w: &[f64], b: f64, lambda: f64) -> f64 {
    let ones = vec![1.0; y.len()];
    loss_and_grad(x, y, &ones, w, b, lambda).0
}

/// Fits L2-penalized logistic regression with Adam.
///
/// A step that fails to lower the objective is undone, the step size halved
/// and the moments reset, so the iterates settle instead of orbiting the
/// optimum.
///
/// Starts from the intercept-only optimum: zero coefficients and the
/// (class-weighted) log-odds of label 1.
pub fn fit_lr(x: ArrayView2<f64>, y: &[u8], config: &LogisticConfig) -> Result<LogisticModel> {
    check_xy(x, y)?;
    check_both_classes(y)?;
    let cw = config.class_weight.weights(y);
    let (mut w0, mut w1) = (0.0, 0.0);
    for &l in y {
        if l == 1 {
            w1 += cw[1];
        } else {
            w0 += cw[0];
        }
    }
    fit_lr_from(x, y, config, &vec![0.0; x.ncols()], (w1 / w0).ln())
}

/// [`fit_lr`] started from `(w0, b0)` instead of the origin. The objective is
/// strictly convex, so the start only changes how long the fit takes.
pub fn fit_lr_from(
    x: ArrayView2<f64>,
    y: &[u8],
    config: &LogisticConfig,
    w0: &[f64],
    b0: f64,
) -> Result<LogisticModel> {
    check_xy(x, y)?;
    check_width(x, w0.len())?;
    if x.nrows() < 2 {
        return Err(Error::EmptyInput(
            "logistic regression needs at least 2 rows",
        ));
    }
    check_both_classes(y)?;
    if !(config.lambda >= 0.0) || !(config.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0 and tol > 0 (got {}, {})",
            config.lambda, config.tol
        )));
    }
    let cw = config.class_weight.weights(y);
    let sample_w: Vec<f64> = y.iter().map(|&l| cw[usize::from(l)]).collect();

    let mut w = w0.to_vec();
    let mut b = [b0];
    let mut adam = AdamState::new(config.learning_rate, &[&w, &b])?;
    let (mut loss, mut gw, mut gb) = loss_and_grad(x, y, &sample_w, &w, b[0], config.lambda);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if norm < config.tol {
            converged = true;
            break;
        }
        let (prev_w, prev_b) = (w.clone(), b);
        adam.step(&mut [&mut w, &mut b], &[&gw, &[gb]])?;
        iterations += 1;
        let (new_loss, new_gw, new_gb) = loss_and_grad(x, y, &sample_w, &w, b[0], config.lambda);
        if new_loss > loss {
            w = prev_w;
            b = prev_b;
            adam.lr *= 0.5;
            if adam.lr < 1e-14 {
                break;
            }
            // stale momentum would keep pushing the same way
            adam.reset();
            continue;
        }
        loss = new_loss;
        gw = new_gw;
        gb = new_gb;
    }
    let gradient_norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
    converged |= gradient_norm < config.tol;
    Ok(LogisticModel {
        coefficients: w,
        intercept: b[0],
        lambda: config.lambda,
        iterations,
        converged,
        gradient_norm,
    })
}

pub fn predict_proba_lr(model: &LogisticModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_width(x, model.coefficients.len())?;
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let z = row
                .iter()
                .zip(&model.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + model.intercept;
            crate::numkit::sigmoid(z)
        })
        .collect())
}

/// Label 1 where the probability reaches `threshold`.
pub fn predict_lr(model: &LogisticModel, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
    Ok(predict_proba_lr(model, x)?
        .into_iter()
        .map(|p| u8::from(p >= threshold))
        .collect())
}
