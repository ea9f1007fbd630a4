use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::label::{label_by_percentile, TileLabel};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Binary class label, serialized as `1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn value<T: Real>(self) -> T {
        match self {
            Label::Pos => T::one(),
            Label::Neg => -T::one(),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.sign()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

/// Position of a table in the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Normalized,
    Reduced,
    Scaled,
}

/// `n_rows × n_features` real matrix with labels and stable row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    n_features: usize,
    values: Vec<T>,
    labels: Vec<Label>,
    ids: Vec<String>,
    stage: Stage,
}

impl<T: Real> FeatureTable<T> {
    pub fn new(
        n_features: usize,
        values: Vec<T>,
        labels: Vec<Label>,
        ids: Vec<String>,
        stage: Stage,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Data(
                "feature tables need at least one column".into(),
            ));
        }
        if values.len() != n_features * labels.len() || ids.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} values, {} labels and {} ids do not form a table of width {n_features}",
                values.len(),
                labels.len(),
                ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if stage == Stage::Scaled && values.iter().any(|v| v.abs() > T::one()) {
            return Err(Error::Data(
                "scaled table has values outside [-1, 1]".into(),
            ));
        }
        Ok(Self {
            n_features,
            values,
            labels,
            ids,
            stage,
        })
    }

    /// Builds a raw table with ids `0..n`.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<Label>) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::Empty("rows"))?;
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Data("ragged rows".into()));
        }
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(width, rows.concat(), labels, ids, Stage::Raw)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| **l == Label::Pos).count();
        (pos, self.labels.len() - pos)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_features: self.n_features,
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            stage: self.stage,
        }
    }

    pub(crate) fn with_values(
        &self,
        n_features: usize,
        values: Vec<T>,
        stage: Stage,
    ) -> Result<Self> {
        Self::new(
            n_features,
            values,
            self.labels.clone(),
            self.ids.clone(),
            stage,
        )
    }

    pub fn require_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::Stage {
                expected: format!("{expected:?}"),
                found: format!("{:?}", self.stage),
            });
        }
        Ok(())
    }

    /// Writes `id,f0..f{p-1},label`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.n_features).map(|j| format!("f{j}")));
        header.push("label".into());
        wr.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec = vec![self.ids[i].clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(self.labels[i].sign().to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Undersamples the majority class down to the minority count. Minority rows
/// are all kept; the output preserves the input row order.
pub fn rebalance<T: Real>(table: &FeatureTable<T>, seed: u64) -> FeatureTable<T> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..table.n_rows()).partition(|&i| table.labels[i] == Label::Pos);
    let (mut major, minor) = if pos.len() >= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    major.shuffle(&mut rng);
    major.truncate(minor.len());
    let mut keep: Vec<usize> = major.into_iter().chain(minor).collect();
    keep.sort_unstable();
    table.subset(&keep)
}

/// How labels are obtained when reading a feature CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelSource {
    /// A `label` column holding `1` / `-1`.
    Column,
    /// A `gamma` column turned into labels by the coverage rule with the
    /// threshold at this percentile of positive coverages; excluded rows
    /// are dropped.
    GammaPercentile(f64),
}

/// Reads `id,f0..f{p-1}[,gamma][,label]` (header required, `.` decimals).
pub fn read_feature_csv<T: Real, R: std::io::Read>(
    r: R,
    source: LabelSource,
) -> Result<FeatureTable<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(Error::Data("first CSV column must be `id`".into()));
    }
    let feature_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('f') && h[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns f0..".into()));
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let (gamma_col, label_col) = (find("gamma"), find("label"));
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut gammas = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("row {}: bad number in column {i}", line + 1)))
        };
        ids.push(rec.get(0).unwrap_or_default().to_string());
        for &c in &feature_cols {
            values.push(T::lit(num(c)?));
        }
        match source {
            LabelSource::Column => {
                let c = label_col.ok_or_else(|| Error::Data("no `label` column".into()))?;
                let v = num(c)?;
                labels.push(if v > 0.0 { Label::Pos } else { Label::Neg });
            }
            LabelSource::GammaPercentile(_) => {
                let c = gamma_col.ok_or_else(|| Error::Data("no `gamma` column".into()))?;
                gammas.push(num(c)?);
            }
        }
    }
    let p = feature_cols.len();
    if let LabelSource::GammaPercentile(q) = source {
        let report = label_by_percentile(&gammas, q)?;
        let mut keep = Vec::new();
        for (i, l) in report.labels.iter().enumerate() {
            if let TileLabel::Labeled(lab) = l {
                keep.push(i);
                labels.push(*lab);
            }
        }
        let mut kept_values = Vec::with_capacity(keep.len() * p);
        for &i in &keep {
            kept_values.extend_from_slice(&values[i * p..(i + 1) * p]);
        }
        let kept_ids = keep.iter().map(|&i| ids[i].clone()).collect();
        return FeatureTable::new(p, kept_values, labels, kept_ids, Stage::Raw);
    }
    FeatureTable::new(p, values, labels, ids, Stage::Raw)
}

pub fn load_feature_csv<T: Real>(
    path: impl AsRef<Path>,
    source: LabelSource,
) -> Result<FeatureTable<T>> {
    read_feature_csv(std::fs::File::open(path)?, source)
}
