//! Fit-then-apply feature transforms. Fitted state is immutable; `apply`
//! never touches it, so statistics can only come from the fit partition.
//!
//! Stages must run in the order zscore → reduce → scale. Any stage may be
//! skipped, but a stage cannot consume a table produced by the same or a
//! later stage.

use serde::{Deserialize, Serialize};

use super::table::{FeatureTable, Stage};
use crate::error::{Error, Result};
use crate::linalg::{svd_right, Matrix};
use crate::scalar::Real;

fn stage_rank(s: Stage) -> u8 {
    match s {
        Stage::Raw => 0,
        Stage::Normalized => 1,
        Stage::Reduced => 2,
        Stage::Scaled => 3,
    }
}

fn check_order<T: Real>(table: &FeatureTable<T>, output: Stage) -> Result<()> {
    if stage_rank(table.stage()) >= stage_rank(output) {
        return Err(Error::Stage {
            expected: format!("a stage before {output:?}"),
            found: format!("{:?}", table.stage()),
        });
    }
    Ok(())
}

fn check_width<T: Real>(table: &FeatureTable<T>, width: usize) -> Result<()> {
    if table.n_features() != width {
        return Err(Error::DimensionMismatch(format!(
            "fitted on {width} features, got {}",
            table.n_features()
        )));
    }
    Ok(())
}

/// Per-column standardization with the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Columns whose variance was zero; their std is stored as 1.
    pub zero_variance: Vec<bool>,
}

impl<T: Real> ZScore<T> {
    pub fn fit(table: &FeatureTable<T>) -> Result<Self> {
        check_order(table, Stage::Normalized)?;
        if table.is_empty() {
            return Err(Error::Empty("fit table"));
        }
        let m = T::from_usize_lossy(table.n_rows());
        let d = table.n_features();
        let mut mean = vec![T::zero(); d];
        for row in table.rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += *v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![T::zero(); d];
        for row in table.rows() {
            for j in 0..d {
                let c = row[j] - mean[j];
                var[j] += c * c;
            }
        }
        let mut std = Vec::with_capacity(d);
        let mut zero_variance = Vec::with_capacity(d);
        for v in var {
            let s = (v / m).sqrt();
            let flat = s <= T::epsilon() * T::lit(16.0);
            zero_variance.push(flat);
            std.push(if flat { T::one() } else { s });
        }
        Ok(Self {
            mean,
            std,
            zero_variance,
        })
    }

    pub fn apply(&self, table: &FeatureTable<T>) -> Result<FeatureTable<T>> {
        check_order(table, Stage::Normalized)?;
        check_width(table, self.mean.len())?;
        let d = self.mean.len();
        let values = table
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (*v - self.mean[i % d]) / self.std[i % d])
            .collect();
        table.with_values(d, values, Stage::Normalized)
    }

    /// Maps standardized rows back to the original units.
    pub fn invert(&self, table: &FeatureTable<T>) -> Result<FeatureTable<T>> {
        table.require_stage(Stage::Normalized)?;
        check_width(table, self.mean.len())?;
        let d = self.mean.len();
        let values = table
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| *v * self.std[i % d] + self.mean[i % d])
            .collect();
        table.with_values(d, values, Stage::Raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceKind {
    /// Center on the fit-set mean, then project.
    Pca,
    /// Project the raw rows without centering.
    TruncatedSvd,
}

/// Linear projection onto the leading right singular vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reducer<T> {
    pub kind: ReduceKind,
    /// Zero for truncated SVD.
    pub center: Vec<T>,
    /// `d × p`, one component per column.
    pub components: Matrix<T>,
    /// All `d` singular values of the (centered) fit matrix, descending.
    pub singular_values: Vec<T>,
}

impl<T: Real> Reducer<T> {
    pub fn fit(table: &FeatureTable<T>, kind: ReduceKind, p: usize) -> Result<Self> {
        check_order(table, Stage::Reduced)?;
        let d = table.n_features();
        if p == 0 || p > d {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {p} of {d} dimensions"
            )));
        }
        if table.n_rows() < 2 {
            return Err(Error::Data("reduction needs at least 2 rows".into()));
        }
        let center = match kind {
            ReduceKind::Pca => {
                let m = T::from_usize_lossy(table.n_rows());
                (0..d)
                    .map(|j| table.rows().map(|r| r[j]).sum::<T>() / m)
                    .collect()
            }
            ReduceKind::TruncatedSvd => vec![T::zero(); d],
        };
        let x = Matrix::from_fn(table.n_rows(), d, |i, j| table.row(i)[j] - center[j]);
        let (singular_values, v) = svd_right(&x)?;
        let mut components = Matrix::from_fn(d, p, |i, j| v[(i, j)]);
        for j in 0..p {
            let mut lead = 0;
            for i in 1..d {
                if components[(i, j)].abs() > components[(lead, j)].abs() {
                    lead = i;
                }
            }
            if components[(lead, j)] < T::zero() {
                for i in 0..d {
                    components[(i, j)] = -components[(i, j)];
                }
            }
        }
        Ok(Self {
            kind,
            center,
            components,
            singular_values,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn project_row(&self, row: &[T]) -> Vec<T> {
        let (d, p) = (self.components.rows(), self.components.cols());
        (0..p)
            .map(|j| {
                (0..d)
                    .map(|i| (row[i] - self.center[i]) * self.components[(i, j)])
                    .sum()
            })
            .collect()
    }

    pub fn apply(&self, table: &FeatureTable<T>) -> Result<FeatureTable<T>> {
        check_order(table, Stage::Reduced)?;
        check_width(table, self.components.rows())?;
        let values = table.rows().flat_map(|r| self.project_row(r)).collect();
        table.with_values(self.n_components(), values, Stage::Reduced)
    }

    /// Maps projected coordinates back into the original space.
    pub fn reconstruct_row(&self, z: &[T]) -> Vec<T> {
        let (d, p) = (self.components.rows(), self.components.cols());
        (0..d)
            .map(|i| self.center[i] + (0..p).map(|j| z[j] * self.components[(i, j)]).sum::<T>())
            .collect()
    }

    /// Squared singular values of the directions that were dropped.
    pub fn discarded_energy(&self) -> T {
        self.singular_values[self.n_components()..]
            .iter()
            .map(|s| *s * *s)
            .sum()
    }
}

/// Per-column affine map of the fit range onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
    /// Columns with `min == max`; they map to 0.
    pub constant: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaled<T> {
    pub table: FeatureTable<T>,
    /// Values that fell outside the fit range and were clamped to ±1.
    pub clamped: usize,
}

impl<T: Real> MinMax<T> {
    pub fn fit(table: &FeatureTable<T>) -> Result<Self> {
        check_order(table, Stage::Scaled)?;
        if table.is_empty() {
            return Err(Error::Empty("fit table"));
        }
        let d = table.n_features();
        let mut min = table.row(0).to_vec();
        let mut max = min.clone();
        for row in table.rows() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        let constant = min.iter().zip(&max).map(|(a, b)| a == b).collect();
        Ok(Self { min, max, constant })
    }

    pub fn scale(&self, j: usize, v: T) -> (T, bool) {
        if self.constant[j] {
            return (T::zero(), v != self.min[j]);
        }
        let s = T::lit(2.0) * (v - self.min[j]) / (self.max[j] - self.min[j]) - T::one();
        if s > T::one() {
            (T::one(), true)
        } else if s < -T::one() {
            (-T::one(), true)
        } else {
            (s, false)
        }
    }

    pub fn apply(&self, table: &FeatureTable<T>) -> Result<Scaled<T>> {
        check_order(table, Stage::Scaled)?;
        let d = self.min.len();
        check_width(table, d)?;
        let mut clamped = 0;
        let values = table
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (s, c) = self.scale(i % d, *v);
                clamped += c as usize;
                s
            })
            .collect();
        Ok(Scaled {
            table: table.with_values(d, values, Stage::Scaled)?,
            clamped,
        })
    }

    pub fn unscale(&self, j: usize, s: T) -> T {
        if self.constant[j] {
            return self.min[j];
        }
        (s + T::one()) / T::lit(2.0) * (self.max[j] - self.min[j]) + self.min[j]
    }
}

/// The usual chain: zscore, optional reduction to `p` columns, then `[-1, 1]`
/// scaling, all fitted on `train` and applied to both partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline<T> {
    pub zscore: ZScore<T>,
    pub reducer: Option<Reducer<T>>,
    pub minmax: MinMax<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub reduce: Option<ReduceKind>,
    pub p: usize,
}

impl<T: Real> Pipeline<T> {
    pub fn fit(train: &FeatureTable<T>, spec: PipelineSpec) -> Result<Self> {
        let zscore = ZScore::fit(train)?;
        let mut t = zscore.apply(train)?;
        let reducer = match spec.reduce {
            Some(kind) => {
                let r = Reducer::fit(&t, kind, spec.p)?;
                t = r.apply(&t)?;
                Some(r)
            }
            None => None,
        };
        let minmax = MinMax::fit(&t)?;
        Ok(Self {
            zscore,
            reducer,
            minmax,
        })
    }

    pub fn apply(&self, table: &FeatureTable<T>) -> Result<Scaled<T>> {
        let mut t = self.zscore.apply(table)?;
        if let Some(r) = &self.reducer {
            t = r.apply(&t)?;
        }
        self.minmax.apply(&t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::Label;

    fn col(values: &[f64]) -> FeatureTable<f64> {
        let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        FeatureTable::from_rows(&rows, vec![Label::Pos; values.len()]).unwrap()
    }

    #[test]
    fn zscore_hand_values() {
        let t = col(&[1.0, 2.0, 3.0]);
        let z = ZScore::fit(&t).unwrap();
        let out = z.apply(&t).unwrap();
        let want = 1.5f64.sqrt();
        assert!((out.values()[0] + want).abs() < 1e-12);
        assert_eq!(out.values()[1], 0.0);
        assert!((out.values()[2] - want).abs() < 1e-12);
        let flat = ZScore::fit(&col(&[4.0, 4.0])).unwrap();
        assert_eq!(flat.zero_variance, vec![true]);
        assert_eq!(flat.apply(&col(&[4.0, 4.0])).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn minmax_hand_values() {
        let t = col(&[0.0, 5.0, 10.0]);
        let m = MinMax::fit(&t).unwrap();
        assert_eq!(m.apply(&t).unwrap().table.values(), &[-1.0, 0.0, 1.0]);
        let s = m.apply(&col(&[12.0, -3.0, 2.5])).unwrap();
        assert_eq!(s.table.values(), &[1.0, -1.0, -0.5]);
        assert_eq!(s.clamped, 2);
        let c = MinMax::fit(&col(&[3.0, 3.0])).unwrap();
        assert_eq!(c.constant, vec![true]);
        assert_eq!(c.apply(&col(&[3.0])).unwrap().table.values(), &[0.0]);
    }

    #[test]
    fn axis_aligned_pca() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 - 2.5, 0.0]).collect();
        let t = FeatureTable::from_rows(&rows, vec![Label::Neg; 6]).unwrap();
        let r = Reducer::fit(&t, ReduceKind::Pca, 1).unwrap();
        assert!((r.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(r.components[(1, 0)].abs() < 1e-12);
        let out = r.apply(&t).unwrap();
        for (i, v) in out.values().iter().enumerate() {
            assert!((v - rows[i][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn stage_order_enforced() {
        let t = col(&[0.0, 1.0, 2.0]);
        let m = MinMax::fit(&t).unwrap();
        let scaled = m.apply(&t).unwrap().table;
        assert!(ZScore::fit(&scaled).is_err());
        assert!(Reducer::fit(&scaled, ReduceKind::Pca, 1).is_err());
        assert!(MinMax::fit(&scaled).is_err());
        let z = ZScore::fit(&t).unwrap();
        let n = z.apply(&t).unwrap();
        assert!(z.apply(&n).is_err());
        assert!(Reducer::fit(&col(&[1.0]), ReduceKind::Pca, 1).is_err());
        assert!(Reducer::fit(&t, ReduceKind::Pca, 2).is_err());
    }
}
