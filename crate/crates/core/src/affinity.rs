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

//! Affinity builders: tree-derived weights, Gaussian kernel weights and unit
//! weights, plus thresholding and per-point scale profiles.

use thiserror::Error;

use crate::types::{
    squared_distance, validate_tree, AffinityMatrix, CoreError, DataSet, PartitionTree,
};

/// Default geometric decay per tree level.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffinityError {
    #[error("invalid partition tree: {0}")]
    InvalidTree(#[from] CoreError),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("invalid per-level weights: {0}")]
    BadLevelWeights(String),
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
}

/// Edge weights of the weighted tree graph: either exact powers `ε^l` or an
/// explicit strictly decreasing weight per join level.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeWeightConfig {
    epsilon: f64,
    level_weights: Option<Vec<f64>>,
}

impl Default for TreeWeightConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            level_weights: None,
        }
    }
}

impl TreeWeightConfig {
    pub fn new(epsilon: f64) -> Result<Self, AffinityError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(AffinityError::BadEpsilon(epsilon));
        }
        Ok(Self {
            epsilon,
            level_weights: None,
        })
    }

    /// `weights[l - 1]` is the affinity of two leaves that first share a
    /// folder at level `l`.
    pub fn with_level_weights(weights: Vec<f64>) -> Result<Self, AffinityError> {
        if weights.is_empty() {
            return Err(AffinityError::BadLevelWeights("no weights given".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(AffinityError::BadLevelWeights(
                "weights must be positive and finite".into(),
            ));
        }
        if weights.windows(2).any(|w| w[0] <= w[1]) {
            return Err(AffinityError::BadLevelWeights(
                "weights must be strictly decreasing".into(),
            ));
        }
        Ok(Self {
            epsilon: DEFAULT_EPSILON,
            level_weights: Some(weights),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn level_weights(&self) -> Option<&[f64]> {
        self.level_weights.as_deref()
    }

    /// Weight for two leaves whose lowest common folder sits at `join_level`.
    fn weight_for(&self, join_level: usize) -> f64 {
        match &self.level_weights {
            Some(w) => w[join_level - 1],
            None => self.epsilon.powi(join_level as i32 - 1),
        }
    }
}

/// Gaussian kernel scale `σ` in `exp(-‖x_i - x_j‖² / σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianConfig {
    sigma: f64,
}

impl GaussianConfig {
    pub fn new(sigma: f64) -> Result<Self, AffinityError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AffinityError::BadSigma(sigma));
        }
        Ok(Self { sigma })
    }

    /// Scale set to the median pairwise squared distance of `data`.
    ///
    /// This is a common heuristic rather than a principled choice; it fails
    /// with `BadSigma` when the median is zero.
    pub fn median_heuristic(data: &DataSet) -> Result<Self, AffinityError> {
        Self::new(median_squared_distance(data))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Median of all pairwise squared distances (0 for a single point).
pub fn median_squared_distance(data: &DataSet) -> f64 {
    let n = data.n();
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(data.point(i), data.point(j)))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Affinities read off the weighted tree graph: the weight of a pair is the
/// smallest edge weight on the tree path between the two leaves.
///
/// Edge weights shrink strictly going up, so the minimum is always the edge
/// entering the lowest common folder and `w_ij = ε^(join_level - 1)`.
pub fn tree_affinities(
    tree: &PartitionTree,
    cfg: &TreeWeightConfig,
) -> Result<AffinityMatrix, AffinityError> {
    let n = tree.n_leaves();
    validate_tree(tree, n)?;
    if let Some(w) = cfg.level_weights() {
        if w.len() < tree.height() {
            return Err(AffinityError::BadLevelWeights(format!(
                "{} weights given for a tree of height {}",
                w.len(),
                tree.height()
            )));
        }
    }
    let folder_of = tree.folder_index();
    let mut aff = AffinityMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let level = tree.join_level(&folder_of, i, j);
            aff.set(i, j, cfg.weight_for(level))?;
        }
    }
    Ok(aff)
}

#[inline]
pub(crate) fn gaussian_weight(squared_distance: f64, sigma: f64) -> f64 {
    (-squared_distance / sigma).exp()
}

/// `w_ij = exp(-‖x_i - x_j‖² / σ)` over all pairs. Pairs whose weight
/// underflows to zero are absent.
pub fn gaussian_affinities(data: &DataSet, cfg: &GaussianConfig) -> AffinityMatrix {
    let n = data.n();
    let mut aff = AffinityMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = gaussian_weight(squared_distance(data.point(i), data.point(j)), cfg.sigma());
            aff.set(i, j, w)
                .expect("gaussian weights are finite and nonnegative");
        }
    }
    aff
}

/// `w_ij = 1` for every pair.
pub fn unit_affinities(n: usize) -> AffinityMatrix {
    let pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0)));
    AffinityMatrix::from_pairs(n, pairs).expect("unit weights are valid")
}

/// Drops every weight strictly below `threshold`. A negative threshold
/// behaves like zero.
pub fn sparsify(aff: &AffinityMatrix, threshold: f64) -> AffinityMatrix {
    let kept = aff.pairs().filter(|&(_, _, w)| w >= threshold);
    AffinityMatrix::from_pairs(aff.n(), kept).expect("subset of a valid matrix")
}

/// Affinities `(j, w_ij)` from point `i` to every other point, sorted by
/// decreasing weight (ties by index).
pub fn scale_profile(aff: &AffinityMatrix, i: usize) -> Result<Vec<(usize, f64)>, AffinityError> {
    let n = aff.n();
    if i >= n {
        return Err(AffinityError::IndexOutOfRange { index: i, n });
    }
    let mut row: Vec<(usize, f64)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| (j, aff.get(i, j)))
        .collect();
    row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(row)
}

/// Splits a descending profile into bands wherever consecutive weights drop
/// by at least `min_ratio` (a drop to zero always splits).
pub fn scale_bands(profile: &[(usize, f64)], min_ratio: f64) -> Vec<Vec<(usize, f64)>> {
    let mut bands: Vec<Vec<(usize, f64)>> = Vec::new();
    for (k, &entry) in profile.iter().enumerate() {
        let split = k == 0 || {
            let prev = profile[k - 1].1;
            entry.1 == 0.0 && prev > 0.0 || entry.1 > 0.0 && prev / entry.1 >= min_ratio
        };
        if split {
            bands.push(vec![entry]);
        } else {
            bands
                .last_mut()
                .expect("first entry opens a band")
                .push(entry);
        }
    }
    bands
}
