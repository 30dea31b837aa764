use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replaces missing entries with the mean of the observed ones.
pub fn impute_mean(column: &[Option<f64>]) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(Error::EmptyInput("column"));
    }
    let mean = observed_mean(column).ok_or(Error::NoObservedValues)?;
    Ok(column.iter().map(|v| v.unwrap_or(mean)).collect())
}

fn observed_mean(column: &[Option<f64>]) -> Option<f64> {
    let (sum, count) = column
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Per-column mean imputation fitted on one set of rows and applied to others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanImputer {
    pub means: Vec<f64>,
}

impl MeanImputer {
    pub fn fit(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("rows"))?;
        let means = (0..first.len())
            .map(|j| {
                let column: Vec<Option<f64>> = rows.iter().map(|r| r[j]).collect();
                observed_mean(&column).ok_or(Error::NoObservedValues)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { means })
    }

    pub fn transform(&self, rows: &[Vec<Option<f64>>]) -> Result<Array2<f64>> {
        let width = self.means.len();
        let mut out = Array2::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::LengthMismatch {
                    what: "row width vs imputer width",
                    left: row.len(),
                    right: width,
                });
            }
            for (j, v) in row.iter().enumerate() {
                out[[i, j]] = v.unwrap_or(self.means[j]);
            }
        }
        Ok(out)
    }
}

/// Standardizes columns to zero mean and unit population standard deviation.
///
/// Constant columns get `scale = 1` and therefore map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl StandardScaler {
    pub fn fit(data: ArrayView2<f64>) -> Result<Self> {
        let n = data.nrows();
        if n == 0 || data.ncols() == 0 {
            return Err(Error::EmptyInput("matrix"));
        }
        let mut mean = Vec::with_capacity(data.ncols());
        let mut scale = Vec::with_capacity(data.ncols());
        for col in data.axis_iter(Axis(1)) {
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            mean.push(m);
            // Guard against round-off leaving a tiny spread on a constant column.
            scale.push(if sd > 1e-12 * m.abs().max(1.0) {
                sd
            } else {
                1.0
            });
        }
        Ok(Self { mean, scale })
    }

    /// Identity scaler for `width` columns.
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, data: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(data.ncols())?;
        let mut out = data.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.scale[j]);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, data: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(data.ncols())?;
        let mut out = data.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.scale[j] + self.mean[j]);
        }
        Ok(out)
    }

    fn check(&self, width: usize) -> Result<()> {
        if width != self.width() {
            return Err(Error::LengthMismatch {
                what: "matrix width vs scaler width",
                left: width,
                right: self.width(),
            });
        }
        Ok(())
    }
}

pub fn fit_transform_scaler(data: ArrayView2<f64>) -> Result<(StandardScaler, Array2<f64>)> {
    let scaler = StandardScaler::fit(data)?;
    let out = scaler.transform(data)?;
    Ok((scaler, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn impute_examples() {
        assert_eq!(
            impute_mean(&[Some(1.0), None, Some(3.0)]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            impute_mean(&[Some(5.0), Some(5.0)]).unwrap(),
            vec![5.0, 5.0]
        );
        // mean of {0, 4} is 2
        assert_eq!(
            impute_mean(&[Some(0.0), None, None, Some(4.0)]).unwrap(),
            vec![0.0, 2.0, 2.0, 4.0]
        );
    }

    #[test]
    fn impute_all_missing_fails() {
        let err = impute_mean(&[None, None]).unwrap_err();
        assert_eq!(err.to_string(), "column has no observed values");
        assert!(impute_mean(&[]).is_err());
    }

    #[test]
    fn imputer_uses_fitted_means_only() {
        let train = vec![vec![Some(1.0), None], vec![Some(3.0), Some(10.0)]];
        let imp = MeanImputer::fit(&train).unwrap();
        assert_eq!(imp.means, vec![2.0, 10.0]);
        let test = vec![vec![None, None]];
        assert_eq!(imp.transform(&test).unwrap(), array![[2.0, 10.0]]);
    }

    #[test]
    fn scaler_examples() {
        let (_, out) = fit_transform_scaler(array![[0.0], [2.0]].view()).unwrap();
        assert_eq!(out, array![[-1.0], [1.0]]);

        let (s, out) = fit_transform_scaler(array![[3.5], [3.5], [3.5]].view()).unwrap();
        assert_eq!(s.scale, vec![1.0]);
        assert_eq!(out, array![[0.0], [0.0], [0.0]]);

        // population sd of {1,2,3} is sqrt(2/3); 1/sqrt(2/3) = 1.224744871...
        let (_, out) = fit_transform_scaler(array![[1.0], [2.0], [3.0]].view()).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((out[[0, 0]] + expected).abs() < 1e-12);
        assert!(out[[1, 0]].abs() < 1e-12);
        assert!((out[[2, 0]] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn scaler_rejects_empty_and_wrong_width() {
        assert!(StandardScaler::fit(Array2::<f64>::zeros((0, 2)).view()).is_err());
        let s = StandardScaler::identity(2);
        assert!(s.transform(array![[1.0]].view()).is_err());
    }

    proptest! {
        #[test]
        fn scaler_round_trip_and_moments(
            data in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..40)
        ) {
            let n = data.len();
            let m = Array2::from_shape_vec((n, 3), data.concat()).unwrap();
            let (s, z) = fit_transform_scaler(m.view()).unwrap();
            for col in z.axis_iter(Axis(1)) {
                let mean = col.sum() / n as f64;
                prop_assert!(mean.abs() < 1e-10);
            }
            for j in 0..3 {
                prop_assert!(s.scale[j] > 0.0);
            }
            let back = s.inverse_transform(z.view()).unwrap();
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
