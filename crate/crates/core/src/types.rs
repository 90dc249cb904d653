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

//! Shared domain types: data sets, affinities, partition trees, centroid
//! configurations, solution paths and dendrograms.
//!
//! Every type validates its invariants on construction and is immutable
//! afterwards. Indices are 0-based in storage; external formats identify
//! points by their string ids.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used by invariant checks.
pub const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("data set is empty")]
    EmptyData,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("level {level} is not a partition of the leaves: {reason}")]
    NotAPartition { level: usize, reason: String },
    #[error("folder {folder} of level {level} is not contained in a single folder of level {}", level + 1)]
    NotNested { level: usize, folder: usize },
    #[error("finest level does not consist of singleton folders")]
    BadLeaves,
    #[error("coarsest level is not a single root folder")]
    BadRoot,
    #[error("invalid affinity for pair ({i}, {j}): {reason}")]
    BadAffinity { i: usize, j: usize, reason: String },
    #[error("invalid solution path: {0}")]
    BadPath(String),
    #[error("invalid dendrogram: {0}")]
    BadDendrogram(String),
}

/// Dense row-major `rows × cols` matrix; row `i` is the `i`-th point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl PointMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major storage.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != rows * cols {
            return Err(CoreError::ShapeMismatch {
                expected: (rows, cols),
                found: (values.len() / cols.max(1), cols),
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CoreError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(CoreError::ShapeMismatch {
                    expected: (rows.len(), cols),
                    found: (rows.len(), r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    /// Column-wise mean of the rows.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Largest Euclidean distance between two rows (0 for fewer than two rows).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.rows {
                best = best.max(euclidean_distance(self.row(i), self.row(j)));
            }
        }
        best
    }

    /// Returns a copy with `offset` added to every row.
    pub fn translated(&self, offset: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, c) in out.row_mut(i).iter_mut().zip(offset) {
                *v += c;
            }
        }
        out
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols, k % self.cols))
    }
}

impl Serialize for PointMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter_rows())
    }
}

impl<'de> Deserialize<'de> for PointMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        PointMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Points `x_1..x_n` in `R^p` with unique string ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DataSetRepr", into = "DataSetRepr")]
pub struct DataSet {
    points: PointMatrix,
    ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DataSetRepr {
    ids: Vec<String>,
    points: PointMatrix,
}

impl TryFrom<DataSetRepr> for DataSet {
    type Error = CoreError;
    fn try_from(r: DataSetRepr) -> Result<Self, CoreError> {
        DataSet::new(r.points, r.ids)
    }
}

impl From<DataSet> for DataSetRepr {
    fn from(d: DataSet) -> Self {
        DataSetRepr {
            ids: d.ids,
            points: d.points,
        }
    }
}

/// Checks the data-set invariants: non-empty, finite, ids unique and aligned.
pub fn validate_dataset(points: &PointMatrix, ids: &[String]) -> Result<(), CoreError> {
    if points.rows() == 0 || points.cols() == 0 {
        return Err(CoreError::EmptyData);
    }
    if ids.len() != points.rows() {
        return Err(CoreError::ShapeMismatch {
            expected: (ids.len(), points.cols()),
            found: points.shape(),
        });
    }
    if let Some((row, col)) = points.first_non_finite() {
        return Err(CoreError::NonFinite { row, col });
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(CoreError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl DataSet {
    pub fn new(points: PointMatrix, ids: Vec<String>) -> Result<Self, CoreError> {
        validate_dataset(&points, &ids)?;
        Ok(Self { points, ids })
    }

    /// Data set whose ids are the 1-based row numbers.
    pub fn with_row_ids(points: PointMatrix) -> Result<Self, CoreError> {
        let ids = (1..=points.rows()).map(|i| i.to_string()).collect();
        Self::new(points, ids)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CoreError> {
        Self::with_row_ids(PointMatrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.points.rows()
    }

    pub fn p(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &PointMatrix {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Grand mean of the points.
    pub fn mean(&self) -> Vec<f64> {
        self.points.mean_row()
    }

    pub fn diameter(&self) -> f64 {
        self.points.diameter()
    }

    /// Same ids, every point shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self, CoreError> {
        Self::new(self.points.translated(offset), self.ids.clone())
    }
}

/// Centroids `u_1..u_n`, aligned row-for-row with a [`DataSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointMatrix", into = "PointMatrix")]
pub struct CentroidSet {
    centroids: PointMatrix,
}

impl TryFrom<PointMatrix> for CentroidSet {
    type Error = CoreError;
    fn try_from(m: PointMatrix) -> Result<Self, CoreError> {
        CentroidSet::new(m)
    }
}

impl From<CentroidSet> for PointMatrix {
    fn from(c: CentroidSet) -> Self {
        c.centroids
    }
}

impl CentroidSet {
    pub fn new(centroids: PointMatrix) -> Result<Self, CoreError> {
        if let Some((row, col)) = centroids.first_non_finite() {
            return Err(CoreError::NonFinite { row, col });
        }
        Ok(Self { centroids })
    }

    /// Centroids placed exactly on the data.
    pub fn from_data(data: &DataSet) -> Self {
        Self {
            centroids: data.points().clone(),
        }
    }

    /// Every centroid at the same location.
    pub fn constant(n: usize, location: &[f64]) -> Self {
        let mut m = PointMatrix::zeros(n, location.len());
        for i in 0..n {
            m.row_mut(i).copy_from_slice(location);
        }
        Self { centroids: m }
    }

    pub fn n(&self) -> usize {
        self.centroids.rows()
    }

    pub fn p(&self) -> usize {
        self.centroids.cols()
    }

    pub fn matrix(&self) -> &PointMatrix {
        &self.centroids
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        self.centroids.row(i)
    }

    /// Fails unless the shape matches `data`.
    pub fn check_aligned(&self, data: &DataSet) -> Result<(), CoreError> {
        if self.centroids.shape() != data.points().shape() {
            return Err(CoreError::ShapeMismatch {
                expected: data.points().shape(),
                found: self.centroids.shape(),
            });
        }
        Ok(())
    }

    /// Largest distance from a centroid to `target`.
    pub fn max_distance_to(&self, target: &[f64]) -> f64 {
        self.centroids
            .iter_rows()
            .map(|r| euclidean_distance(r, target))
            .fold(0.0, f64::max)
    }
}

/// Symmetric nonnegative pair weights `w_ij` with zero diagonal, stored
/// sparsely by unordered pair `(i, j)` with `i < j`. Absent pairs weigh 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffinityRepr", into = "AffinityRepr")]
pub struct AffinityMatrix {
    n: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize, Deserialize)]
struct AffinityRepr {
    n: usize,
    pairs: Vec<(usize, usize, f64)>,
}

impl TryFrom<AffinityRepr> for AffinityMatrix {
    type Error = CoreError;
    fn try_from(r: AffinityRepr) -> Result<Self, CoreError> {
        AffinityMatrix::from_pairs(r.n, r.pairs)
    }
}

impl From<AffinityMatrix> for AffinityRepr {
    fn from(a: AffinityMatrix) -> Self {
        AffinityRepr {
            n: a.n,
            pairs: a.pairs().collect(),
        }
    }
}

impl AffinityMatrix {
    /// All-zero affinities over `n` points.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            weights: BTreeMap::new(),
        }
    }

    pub fn from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, CoreError> {
        let mut a = Self::empty(n);
        for (i, j, w) in pairs {
            a.set(i, j, w)?;
        }
        Ok(a)
    }

    /// Sets `w_ij = w_ji = w`; a zero weight removes the pair.
    pub fn set(&mut self, i: usize, j: usize, w: f64) -> Result<(), CoreError> {
        let bad = |reason: &str| CoreError::BadAffinity {
            i,
            j,
            reason: reason.to_string(),
        };
        if i >= self.n || j >= self.n {
            return Err(bad("index out of range"));
        }
        if i == j {
            return Err(bad("diagonal entries are fixed at zero"));
        }
        if !w.is_finite() {
            return Err(bad("weight is not finite"));
        }
        if w < 0.0 {
            return Err(bad("weight is negative"));
        }
        let key = (i.min(j), i.max(j));
        if w == 0.0 {
            self.weights.remove(&key);
        } else {
            self.weights.insert(key, w);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.weights
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Number of pairs with positive weight.
    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Positive-weight pairs `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    /// Dense symmetric rendering.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, w) in self.pairs() {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        m
    }
}

/// Nested partitions `P_0..P_L` of the leaves `0..n`. `levels[0]` is the
/// leaf level and `levels[L]` the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    levels: Vec<Vec<Vec<usize>>>,
}

impl PartitionTree {
    /// Wraps levels as given; call [`validate_tree`] before relying on them.
    pub fn from_levels(levels: Vec<Vec<Vec<usize>>>) -> Self {
        Self { levels }
    }

    /// Prepends the singleton leaf level to `upper` (levels 1..L).
    pub fn from_upper_levels(n: usize, upper: Vec<Vec<Vec<usize>>>) -> Self {
        let mut levels = Vec::with_capacity(upper.len() + 1);
        levels.push((0..n).map(|i| vec![i]).collect());
        levels.extend(upper);
        Self { levels }
    }

    pub fn levels(&self) -> &[Vec<Vec<usize>>] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &[Vec<usize>] {
        &self.levels[l]
    }

    /// Tree height `L`.
    pub fn height(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    pub fn n_leaves(&self) -> usize {
        self.levels
            .first()
            .map_or(0, |l| l.iter().map(Vec::len).sum())
    }

    /// `folder_of[l][i]` = index of the level-`l` folder containing leaf `i`.
    pub fn folder_index(&self) -> Vec<Vec<usize>> {
        let n = self.n_leaves();
        self.levels
            .iter()
            .map(|level| {
                let mut of = vec![usize::MAX; n];
                for (f, folder) in level.iter().enumerate() {
                    for &i in folder {
                        if i < n {
                            of[i] = f;
                        }
                    }
                }
                of
            })
            .collect()
    }

    /// Lowest level at which leaves `i` and `j` share a folder.
    pub fn join_level(&self, folder_of: &[Vec<usize>], i: usize, j: usize) -> usize {
        folder_of
            .iter()
            .position(|of| of[i] == of[j])
            .unwrap_or(self.height())
    }
}

/// Checks the four partition-tree properties for leaves `0..n`.
pub fn validate_tree(tree: &PartitionTree, n: usize) -> Result<(), CoreError> {
    let levels = tree.levels();
    if levels.is_empty() {
        return Err(CoreError::BadLeaves);
    }
    for (l, level) in levels.iter().enumerate() {
        check_partition(level, n)
            .map_err(|reason| CoreError::NotAPartition { level: l, reason })?;
    }
    if levels[0].len() != n || levels[0].iter().any(|f| f.len() != 1) {
        return Err(CoreError::BadLeaves);
    }
    let root = &levels[levels.len() - 1];
    if root.len() != 1 {
        return Err(CoreError::BadRoot);
    }
    for l in 0..levels.len() - 1 {
        let mut parent = vec![usize::MAX; n];
        for (f, folder) in levels[l + 1].iter().enumerate() {
            for &i in folder {
                parent[i] = f;
            }
        }
        for (f, folder) in levels[l].iter().enumerate() {
            let p = parent[folder[0]];
            if folder.iter().any(|&i| parent[i] != p) {
                return Err(CoreError::NotNested {
                    level: l,
                    folder: f,
                });
            }
        }
    }
    Ok(())
}

fn check_partition(level: &[Vec<usize>], n: usize) -> Result<(), String> {
    let mut seen = vec![false; n];
    for folder in level {
        if folder.is_empty() {
            return Err("empty folder".into());
        }
        for &i in folder {
            if i >= n {
                return Err(format!("index {i} out of range"));
            }
            if seen[i] {
                return Err(format!("index {i} appears in more than one folder"));
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(format!("index {i} is not covered")),
        None => Ok(()),
    }
}

/// Penalty norm used on centroid differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum NormKind {
    #[default]
    #[serde(rename = "l2")]
    Euclidean,
    #[serde(rename = "l1")]
    OneNorm,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::OneNorm => v.iter().map(|x| x.abs()).sum(),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => euclidean_distance(a, b),
            NormKind::OneNorm => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Euclidean => "l2",
            NormKind::OneNorm => "l1",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l2" | "euclidean" => Ok(NormKind::Euclidean),
            "l1" | "one_norm" => Ok(NormKind::OneNorm),
            other => Err(format!("unknown norm {other:?} (expected l2 or l1)")),
        }
    }
}

/// Centroid snapshots `u(γ)` over a strictly increasing grid of γ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SolutionPathRepr", into = "SolutionPathRepr")]
pub struct SolutionPath {
    gammas: Vec<f64>,
    snapshots: Vec<CentroidSet>,
    converged: Vec<bool>,
    norm_kind: NormKind,
}

#[derive(Serialize, Deserialize)]
struct SolutionPathRepr {
    gammas: Vec<f64>,
    snapshots: Vec<CentroidSet>,
    converged: Vec<bool>,
    norm_kind: NormKind,
}

impl TryFrom<SolutionPathRepr> for SolutionPath {
    type Error = CoreError;
    fn try_from(r: SolutionPathRepr) -> Result<Self, CoreError> {
        SolutionPath::new(r.gammas, r.snapshots, r.converged, r.norm_kind)
    }
}

impl From<SolutionPath> for SolutionPathRepr {
    fn from(p: SolutionPath) -> Self {
        SolutionPathRepr {
            gammas: p.gammas,
            snapshots: p.snapshots,
            converged: p.converged,
            norm_kind: p.norm_kind,
        }
    }
}

impl SolutionPath {
    pub fn new(
        gammas: Vec<f64>,
        snapshots: Vec<CentroidSet>,
        converged: Vec<bool>,
        norm_kind: NormKind,
    ) -> Result<Self, CoreError> {
        if gammas.len() != snapshots.len() || gammas.len() != converged.len() {
            return Err(CoreError::BadPath(
                "gammas, snapshots and convergence flags differ in length".into(),
            ));
        }
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(CoreError::BadPath(
                "gammas must be finite and nonnegative".into(),
            ));
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::BadPath(
                "gammas must be strictly increasing".into(),
            ));
        }
        if let Some(first) = snapshots.first() {
            if snapshots
                .iter()
                .any(|s| s.matrix().shape() != first.matrix().shape())
            {
                return Err(CoreError::BadPath("snapshots differ in shape".into()));
            }
        }
        Ok(Self {
            gammas,
            snapshots,
            converged,
            norm_kind,
        })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn snapshots(&self) -> &[CentroidSet] {
        &self.snapshots
    }

    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

/// One agglomeration event. Cluster `k < n` is leaf `k`; the cluster created
/// by merge step `s` (0-based) has index `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// γ at which the fusion was first observed (or the linkage height).
    pub gamma: f64,
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub new_cluster: usize,
    /// Number of leaves in the new cluster.
    pub size: usize,
}

/// Ordered record of merge events over a set of labelled leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DendrogramRepr", into = "DendrogramRepr")]
pub struct Dendrogram {
    leaf_ids: Vec<String>,
    merges: Vec<Merge>,
}

#[derive(Serialize, Deserialize)]
struct DendrogramRepr {
    leaf_ids: Vec<String>,
    merges: Vec<Merge>,
}

impl TryFrom<DendrogramRepr> for Dendrogram {
    type Error = CoreError;
    fn try_from(r: DendrogramRepr) -> Result<Self, CoreError> {
        Dendrogram::new(r.leaf_ids, r.merges)
    }
}

impl From<Dendrogram> for DendrogramRepr {
    fn from(d: Dendrogram) -> Self {
        DendrogramRepr {
            leaf_ids: d.leaf_ids,
            merges: d.merges,
        }
    }
}

impl Dendrogram {
    pub fn new(leaf_ids: Vec<String>, merges: Vec<Merge>) -> Result<Self, CoreError> {
        let n = leaf_ids.len();
        let bad = |s: String| Err(CoreError::BadDendrogram(s));
        if merges.len() + 1 > n.max(1) {
            return bad(format!("{} merges over {n} leaves", merges.len()));
        }
        let mut size = vec![1usize; n + merges.len()];
        let mut used = vec![false; n + merges.len()];
        let mut last = f64::NEG_INFINITY;
        for (s, m) in merges.iter().enumerate() {
            if !m.gamma.is_finite() || m.gamma < last {
                return bad(format!("merge {s} has a decreasing or non-finite gamma"));
            }
            last = m.gamma;
            if m.new_cluster != n + s {
                return bad(format!(
                    "merge {s} creates cluster {} (expected {})",
                    m.new_cluster,
                    n + s
                ));
            }
            for c in [m.cluster_a, m.cluster_b] {
                if c >= n + s {
                    return bad(format!("merge {s} uses cluster {c} before it exists"));
                }
                if used[c] {
                    return bad(format!("cluster {c} is merged twice"));
                }
                used[c] = true;
            }
            if m.cluster_a == m.cluster_b {
                return bad(format!(
                    "merge {s} joins cluster {} with itself",
                    m.cluster_a
                ));
            }
            size[n + s] = size[m.cluster_a] + size[m.cluster_b];
            if m.size != size[n + s] {
                return bad(format!(
                    "merge {s} reports size {} (expected {})",
                    m.size,
                    size[n + s]
                ));
            }
        }
        Ok(Self { leaf_ids, merges })
    }

    pub fn leaf_ids(&self) -> &[String] {
        &self.leaf_ids
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_ids.len()
    }

    /// True when all leaves have been merged into one cluster.
    pub fn is_complete(&self) -> bool {
        self.merges.len() + 1 == self.leaf_ids.len().max(1)
    }

    /// Leaves contained in every cluster index `0..n + merges`.
    pub fn cluster_members(&self) -> Vec<Vec<usize>> {
        let n = self.n_leaves();
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut joined = members[m.cluster_a].clone();
            joined.extend_from_slice(&members[m.cluster_b]);
            joined.sort_unstable();
            members.push(joined);
        }
        members
    }

    /// Partition of the leaves after the first `steps` merges, folders sorted
    /// by smallest member.
    pub fn partition_after(&self, steps: usize) -> Vec<Vec<usize>> {
        let members = self.cluster_members();
        let n = self.n_leaves();
        let mut alive = vec![true; n + steps];
        for m in &self.merges[..steps] {
            alive[m.cluster_a] = false;
            alive[m.cluster_b] = false;
        }
        let mut out: Vec<Vec<usize>> = (0..n + steps)
            .filter(|&c| alive[c])
            .map(|c| members[c].clone())
            .collect();
        out.sort();
        out
    }

    /// Clusters not merged into anything else (the roots of the forest).
    pub fn roots(&self) -> Vec<usize> {
        let total = self.n_leaves() + self.merges.len();
        let mut used = vec![false; total];
        for m in &self.merges {
            used[m.cluster_a] = true;
            used[m.cluster_b] = true;
        }
        (0..total).filter(|&c| !used[c]).collect()
    }
}
