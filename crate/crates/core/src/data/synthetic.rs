//! Two-dimensional toy datasets with ±1 labels.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::table::{FeatureTable, Label};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Gaussian clusters at (-2, -2) and (2, 2), unit std scaled by noise.
    Blobs,
    /// Outer circle radius 1 (label -1), inner radius 0.5 (label +1).
    Circles,
    /// Two interleaving half circles.
    Moons,
}

impl FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "circles" => Ok(Self::Circles),
            "moons" => Ok(Self::Moons),
            other => Err(Error::Config(format!(
                "unknown synthetic dataset {other:?}"
            ))),
        }
    }
}

/// `m` points, split as evenly as possible between the classes, in a seeded
/// random order. Gaussian noise of std `noise` is added to both coordinates.
pub fn make_synthetic<T: Real>(
    kind: SyntheticKind,
    m: usize,
    noise: f64,
    seed: u64,
) -> Result<FeatureTable<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic dataset needs >= 2 points, got {m}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise {noise} must be a finite non-negative number"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let n_pos = m / 2;
    let n_neg = m - n_pos;
    let mut points: Vec<(f64, f64, Label)> = Vec::with_capacity(m);
    match kind {
        SyntheticKind::Blobs => {
            for (count, c, label) in [(n_neg, -2.0, Label::Neg), (n_pos, 2.0, Label::Pos)] {
                for _ in 0..count {
                    points.push((
                        c + noise * gauss.sample(&mut rng),
                        c + noise * gauss.sample(&mut rng),
                        label,
                    ));
                }
            }
        }
        SyntheticKind::Circles => {
            for (count, r, label) in [(n_neg, 1.0, Label::Neg), (n_pos, 0.5, Label::Pos)] {
                for i in 0..count {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    points.push((r * t.cos(), r * t.sin(), label));
                }
            }
        }
        SyntheticKind::Moons => {
            for i in 0..n_neg {
                let t = PI * i as f64 / (n_neg.max(2) - 1) as f64;
                points.push((t.cos(), t.sin(), Label::Neg));
            }
            for i in 0..n_pos {
                let t = PI * i as f64 / (n_pos.max(2) - 1) as f64;
                points.push((1.0 - t.cos(), 0.5 - t.sin(), Label::Pos));
            }
        }
    }
    if kind != SyntheticKind::Blobs {
        for p in &mut points {
            p.0 += noise * gauss.sample(&mut rng);
            p.1 += noise * gauss.sample(&mut rng);
        }
    }
    points.shuffle(&mut rng);
    let rows: Vec<Vec<T>> = points
        .iter()
        .map(|p| vec![T::lit(p.0), T::lit(p.1)])
        .collect();
    let labels = points.iter().map(|p| p.2).collect();
    FeatureTable::from_rows(&rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        for kind in [
            SyntheticKind::Blobs,
            SyntheticKind::Circles,
            SyntheticKind::Moons,
        ] {
            let a: FeatureTable<f64> = make_synthetic(kind, 101, 0.1, 4).unwrap();
            assert_eq!(a, make_synthetic(kind, 101, 0.1, 4).unwrap());
            assert_ne!(a, make_synthetic(kind, 101, 0.1, 5).unwrap());
            assert_eq!(a.class_counts(), (50, 51));
        }
    }

    #[test]
    fn noiseless_circles_have_exact_radii() {
        let t: FeatureTable<f64> = make_synthetic(SyntheticKind::Circles, 40, 0.0, 0).unwrap();
        for (row, l) in t.rows().zip(t.labels()) {
            let r = row[0].hypot(row[1]);
            let want = if *l == Label::Pos { 0.5 } else { 1.0 };
            assert!((r - want).abs() < 1e-12);
        }
    }
}
