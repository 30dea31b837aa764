//! Soft-margin SVM trained by sequential minimal optimization on the dual,
//! with second-order working-set selection.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_both_classes, check_width, check_xy, ClassWeight};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: Kernel,
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
    pub class_weight: ClassWeight,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Rbf { gamma: 1.0 },
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
            class_weight: ClassWeight::Uniform,
        }
    }
}

/// Decision function `f(x) = sum_i coef_i K(sv_i, x) + bias`; `f >= 0`
/// predicts label 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// Training-row index of each support vector.
    pub support_indices: Vec<usize>,
    /// Dual variables `alpha_i` in `[0, C_i]` of the support vectors.
    pub alphas: Vec<f64>,
    /// `alpha_i * y_i` with `y_i` in `{-1, +1}`.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    width: usize,
}

impl SvmModel {
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(x, self.width)?;
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                self.support_vectors
                    .iter()
                    .zip(&self.dual_coef)
                    .map(|(sv, c)| c * self.kernel.eval(sv, &row))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<u8>> {
        Ok(self
            .decision_function(x)?
            .into_iter()
            .map(|f| u8::from(f >= 0.0))
            .collect())
    }

    /// Primal weight vector, available for the linear kernel only.
    pub fn primal_weights(&self) -> Option<Vec<f64>> {
        match self.kernel {
            Kernel::Linear => {
                let mut w = vec![0.0; self.width];
                for (sv, c) in self.support_vectors.iter().zip(&self.dual_coef) {
                    for (wj, v) in w.iter_mut().zip(sv) {
                        *wj += c * v;
                    }
                }
                Some(w)
            }
            Kernel::Rbf { .. } => None,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

pub fn fit_svm(x: ArrayView2<f64>, labels: &[u8], config: &SvmConfig) -> Result<SvmModel> {
    check_xy(x, labels)?;
    check_both_classes(labels)?;
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {}",
            config.c
        )));
    }
    if let Kernel::Rbf { gamma } = config.kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
    }
    if !(config.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }

    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let cw = config.class_weight.weights(labels);
    let bound: Vec<f64> = labels
        .iter()
        .map(|&l| config.c * cw[usize::from(l)])
        .collect();

    // Q_ij = y_i y_j K(x_i, x_j), row-major.
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * config.kernel.eval(&rows[i], &rows[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let qd: Vec<f64> = (0..n).map(|i| q[i * n + i]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64, c: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        // i maximizes -y_t G_t over the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            if y[t] > 0.0 {
                if !is_upper(alpha[t], bound[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    gmax_idx = Some(t);
                }
            } else if !is_lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else {
            converged = true;
            break;
        };
        let qi = &q[i * n..(i + 1) * n];

        // j minimizes the second-order decrease estimate over the "low" set.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if y[t] > 0.0 {
                if !is_lower(alpha[t]) {
                    let diff = gmax + grad[t];
                    gmax2 = gmax2.max(grad[t]);
                    if diff > 0.0 {
                        let quad = qd[i] + qd[t] - 2.0 * y[i] * qi[t];
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            best_j = Some(t);
                        }
                    }
                }
            } else if !is_upper(alpha[t], bound[t]) {
                let diff = gmax - grad[t];
                gmax2 = gmax2.max(-grad[t]);
                if diff > 0.0 {
                    let quad = qd[i] + qd[t] + 2.0 * y[i] * qi[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        best_j = Some(t);
                    }
                }
            }
        }
        let j = match best_j {
            Some(j) if gmax + gmax2 >= config.tol => j,
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (ci, cj) = (bound[i], bound[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = qd[i] + qd[j] + 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let qj = &q[j * n..(j + 1) * n];
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    // Offset: average of y_i G_i over free variables, else midpoint of the
    // feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t], bound[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        kernel: config.kernel,
        c: config.c,
        support_vectors: support_indices.iter().map(|&t| rows[t].clone()).collect(),
        alphas: support_indices.iter().map(|&t| alpha[t]).collect(),
        dual_coef: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        bias: -rho,
        iterations,
        converged,
        width: x.ncols(),
    })
}
