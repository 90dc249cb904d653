/*
Copyright 2026 The sonpath Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Witness points for sums of pairwise distances: an extreme point `u` and a
//! unit direction `v` such that moving `u` along `v` shrinks the distances
//! to the other points at an average rate of at least one half.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{euclidean_distance, CoreError, PointMatrix};

/// Tolerance on `‖v‖ = 1` for caller-supplied directions.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("direction has norm {norm}, expected 1")]
    NotUnit { norm: f64 },
    #[error("points {i} and {j} coincide")]
    DuplicatePoints { i: usize, j: usize },
    #[error("need at least 3 points, got {n}")]
    TooFewPoints { n: usize },
    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("direction has dimension {found}, points have {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Pairwise distinct finite points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSet {
    points: PointMatrix,
}

impl PointSet {
    pub fn new(points: PointMatrix) -> Result<Self, GeometryError> {
        if let Some(i) = points.as_slice().iter().position(|v| !v.is_finite()) {
            let p = points.cols().max(1);
            return Err(CoreError::NonFinite {
                row: i / p,
                col: i % p,
            }
            .into());
        }
        let mut order: Vec<usize> = (0..points.rows()).collect();
        order.sort_by(|&a, &b| lex_cmp(points.row(a), points.row(b)));
        for w in order.windows(2) {
            if points.row(w[0]) == points.row(w[1]) {
                return Err(GeometryError::DuplicatePoints {
                    i: w[0].min(w[1]),
                    j: w[0].max(w[1]),
                });
            }
        }
        Ok(Self { points })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, GeometryError> {
        Self::new(PointMatrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn p(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn matrix(&self) -> &PointMatrix {
        &self.points
    }

    fn subset(&self, keep: &[usize]) -> PointSet {
        let rows: Vec<&[f64]> = keep.iter().map(|&i| self.point(i)).collect();
        PointSet {
            points: PointMatrix::from_rows(&rows).expect("rows of a valid set"),
        }
    }
}

impl<'de> Deserialize<'de> for PointSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = PointMatrix::deserialize(deserializer)?;
        PointSet::new(m).map_err(serde::de::Error::custom)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub index: usize,
    pub direction: Vec<f64>,
    pub score: f64,
}

fn check_query(points: &PointSet, j: usize, v: &[f64]) -> Result<(), GeometryError> {
    if j >= points.n() {
        return Err(GeometryError::IndexOutOfRange {
            index: j,
            n: points.n(),
        });
    }
    if v.len() != points.p() {
        return Err(GeometryError::DimensionMismatch {
            expected: points.p(),
            found: v.len(),
        });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GeometryError::NotUnit { norm });
    }
    Ok(())
}

/// `Σ_{i≠j} ⟨(u_i − u_j)/‖u_i − u_j‖, v⟩`.
fn pull(points: &PointSet, j: usize, v: &[f64]) -> f64 {
    let uj = points.point(j);
    let mut total = 0.0;
    for i in 0..points.n() {
        if i == j {
            continue;
        }
        let ui = points.point(i);
        let d = euclidean_distance(ui, uj);
        let dot: f64 = ui
            .iter()
            .zip(uj)
            .zip(v)
            .map(|((a, b), c)| (a - b) * c)
            .sum();
        total += dot / d;
    }
    total
}

/// `(1/n) Σ_{i≠j} ⟨(u_i − u_j)/‖u_i − u_j‖, v⟩`.
pub fn direction_score(points: &PointSet, j: usize, v: &[f64]) -> Result<f64, GeometryError> {
    check_query(points, j, v)?;
    Ok(pull(points, j, v) / points.n() as f64)
}

/// Derivative at `t = 0` of `Σ_{i≠j} ‖u_i − (u_j + t v)‖`.
pub fn penalty_directional_derivative(
    points: &PointSet,
    j: usize,
    v: &[f64],
) -> Result<f64, GeometryError> {
    check_query(points, j, v)?;
    Ok(-pull(points, j, v))
}

/// Index of the lexicographically smallest point, a vertex of the convex hull.
pub fn extreme_start(points: &PointSet) -> usize {
    (1..points.n()).fold(0, |best, i| {
        if lex_cmp(points.point(i), points.point(best)).is_lt() {
            i
        } else {
            best
        }
    })
}

fn farthest_from(points: &PointSet, j: usize) -> usize {
    let mut best = (j, -1.0);
    for i in 0..points.n() {
        let d = euclidean_distance(points.point(i), points.point(j));
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn unit_from_to(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = euclidean_distance(a, b);
    a.iter().zip(b).map(|(x, y)| (y - x) / d).collect()
}

/// The better of the two candidates `(a, (b − a)/‖b − a‖)` and `(b, −that)`.
fn best_of_pair(points: &PointSet, a: usize, b: usize) -> Witness {
    let v = unit_from_to(points.point(a), points.point(b));
    let n = points.n() as f64;
    let s_a = pull(points, a, &v) / n;
    let back: Vec<f64> = v.iter().map(|x| -x).collect();
    let s_b = pull(points, b, &back) / n;
    if s_a >= s_b {
        Witness {
            index: a,
            direction: v,
            score: s_a,
        }
    } else {
        Witness {
            index: b,
            direction: back,
            score: s_b,
        }
    }
}

fn diameter_pair(points: &PointSet) -> (usize, usize) {
    let mut best = (0, 1, -1.0);
    for i in 0..points.n() {
        for j in (i + 1)..points.n() {
            let d = euclidean_distance(points.point(i), points.point(j));
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

/// An extreme point with a direction scoring at least ½.
///
/// Tries the lexicographic minimum and its farthest point first. That pair
/// need not be a diameter of the set, and only a diametral pair carries the
/// guarantee, so a score below ½ falls back to an exact diameter pair.
pub fn witness(points: &PointSet) -> Result<Witness, GeometryError> {
    if points.n() < 3 {
        return Err(GeometryError::TooFewPoints { n: points.n() });
    }
    let u = extreme_start(points);
    let y = farthest_from(points, u);
    let w = best_of_pair(points, u, y);
    if w.score >= 0.5 {
        return Ok(w);
    }
    let (a, b) = diameter_pair(points);
    log::debug!(
        "farthest-point witness scored {}, using diameter pair ({a}, {b})",
        w.score
    );
    let d = best_of_pair(points, a, b);
    Ok(if d.score >= w.score { d } else { w })
}

/// `⌈n/6⌉` witnesses obtained by repeatedly taking a witness of the remaining
/// points and removing it. Indices and scores refer to the full set.
pub fn witness_set(points: &PointSet) -> Result<Vec<Witness>, GeometryError> {
    let n = points.n();
    if n < 3 {
        return Err(GeometryError::TooFewPoints { n });
    }
    let count = n.div_ceil(6);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let local = witness(&points.subset(&remaining))?;
        let index = remaining.remove(local.index);
        let score = pull(points, index, &local.direction) / n as f64;
        out.push(Witness {
            index,
            direction: local.direction,
            score,
        });
    }
    Ok(out)
}
