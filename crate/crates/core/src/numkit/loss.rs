use crate::error::{Error, Result};

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean binary cross-entropy `-[y ln p + (1-y) ln(1-p)]`.
pub fn bce_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check(predicted, target)?;
    let total: f64 = predicted
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = clamp(p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / predicted.len() as f64)
}

/// Derivative of [`bce_loss`] with respect to each prediction.
pub fn bce_grad(predicted: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check(predicted, target)?;
    let n = predicted.len() as f64;
    Ok(predicted
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = clamp(p);
            (p - y) / (p * (1.0 - p)) / n
        })
        .collect())
}

fn check(predicted: &[f64], target: &[f64]) -> Result<()> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    if predicted.len() != target.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs targets",
            left: predicted.len(),
            right: target.len(),
        });
    }
    Ok(())
}
