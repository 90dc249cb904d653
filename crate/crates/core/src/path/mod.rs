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

//! γ sweeps: warm-started solution paths, fusion detection, dendrogram
//! recovery, comparison against a target partition tree and agglomerative
//! linkage baselines.

mod linkage;

pub use linkage::{linkage_baseline, Linkage};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{
    energy_upper_bound, leaf_fusion_gamma_bound, solve_resumable, AdmmState, SolveOptions,
    SolverError,
};
use crate::types::{
    euclidean_distance, validate_tree, AffinityMatrix, CoreError, DataSet, Dendrogram, Merge,
    PartitionTree, PointMatrix, SolutionPath,
};

/// Default fusion threshold, relative to the data diameter.
pub const DEFAULT_FUSION_TOLERANCE: f64 = 1e-6;
/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 100;
/// Default ratio `gamma_max / gamma_min` of a geometric grid.
pub const DEFAULT_GRID_SPAN: f64 = 1e4;
/// Doubling cap for [`auto_gamma_max`], as a power of two times the seed.
pub const MAX_DOUBLINGS: u32 = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid path options: {0}")]
    BadOptions(String),
    #[error("centroids did not fully fuse up to gamma = {last_gamma} (seed {seed}); the affinity graph may be disconnected")]
    NoFullFusion { seed: f64, last_gamma: f64 },
    #[error("{} pair(s) fused and later separated", .0.len())]
    UnfusionDetected(Vec<Violation>),
    #[error("path never fuses into a single cluster ({} of {} merges)", .0.merges().len(), .0.n_leaves().saturating_sub(1))]
    IncompleteFusion(Dendrogram),
    #[error("dendrogram has {dendrogram} leaves, tree has {tree}")]
    LeafMismatch { dendrogram: usize, tree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GammaMax {
    /// Search for a fully fused γ with [`auto_gamma_max`].
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    /// Smallest grid value; defaults to `gamma_max / 1e4` (geometric) or 0
    /// (linear). A zero minimum in a geometric grid is kept as an extra
    /// leading point.
    pub gamma_min: Option<f64>,
    pub gamma_max: GammaMax,
    pub grid_size: usize,
    pub grid_kind: GridKind,
    /// Explicit grid, overriding the fields above.
    pub grid: Option<Vec<f64>>,
    /// Fusion threshold relative to the data diameter.
    pub fusion_tolerance: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            gamma_min: None,
            gamma_max: GammaMax::Auto,
            grid_size: DEFAULT_GRID_SIZE,
            grid_kind: GridKind::Geometric,
            grid: None,
            fusion_tolerance: DEFAULT_FUSION_TOLERANCE,
        }
    }
}

impl PathOptions {
    fn validate(&self) -> Result<(), PathError> {
        let bad = |s: &str| Err(PathError::BadOptions(s.into()));
        if !(self.fusion_tolerance > 0.0 && self.fusion_tolerance < 1.0) {
            return bad("fusion_tolerance must lie in (0, 1)");
        }
        if let Some(g) = &self.grid {
            if g.is_empty() {
                return bad("explicit grid is empty");
            }
            if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("grid values must be finite and nonnegative");
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return bad("grid must be strictly increasing");
            }
            return Ok(());
        }
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2");
        }
        if let Some(m) = self.gamma_min {
            if !(m.is_finite() && m >= 0.0) {
                return bad("gamma_min must be finite and nonnegative");
            }
        }
        if let GammaMax::Fixed(m) = self.gamma_max {
            if !(m.is_finite() && m > 0.0) {
                return bad("gamma_max must be positive");
            }
        }
        Ok(())
    }
}

/// A pair fused at `fused_gamma` but separated at the next grid value
/// `separated_gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub fused_gamma: f64,
    pub separated_gamma: f64,
}

/// Partitions induced by centroid coincidence at each grid γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub gammas: Vec<f64>,
    /// Folders sorted by smallest member, members ascending.
    pub clusters_per_gamma: Vec<Vec<Vec<usize>>>,
    pub violations: Vec<Violation>,
}

impl FusionReport {
    pub fn cluster_counts(&self) -> Vec<usize> {
        self.clusters_per_gamma.iter().map(Vec::len).collect()
    }
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Joins two sets; the smaller root index becomes the representative.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        lo
    }
}

/// Transitive closure of `‖u_i − u_j‖ ≤ threshold`, folders sorted by
/// smallest member.
pub fn fusion_partition(u: &PointMatrix, threshold: f64) -> Vec<Vec<usize>> {
    let n = u.rows();
    let mut sets = DisjointSets::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if euclidean_distance(u.row(i), u.row(j)) <= threshold {
                sets.union(i, j);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = sets.find(i);
        blocks[r].push(i);
    }
    blocks.retain(|b| !b.is_empty());
    blocks
}

/// A γ at which every centroid coincides within the fusion tolerance, found
/// by doubling from the leaf-fusion bound `8 √E / n`.
pub fn auto_gamma_max(
    data: &DataSet,
    aff: &AffinityMatrix,
    opts: &PathOptions,
    solve_opts: &SolveOptions,
) -> Result<f64, PathError> {
    opts.validate()?;
    let seed = leaf_fusion_gamma_bound(energy_upper_bound(data), data.n());
    if seed == 0.0 {
        // Identical points are fused at every γ.
        return Ok(match opts.gamma_min {
            Some(m) if m > 0.0 => m,
            _ => 1.0,
        });
    }
    let threshold = opts.fusion_tolerance * data.diameter();
    let mut gamma = seed;
    let mut state: Option<AdmmState> = None;
    for _ in 0..=MAX_DOUBLINGS {
        let (report, next) = solve_resumable(data, aff, gamma, solve_opts, state)?;
        if fusion_partition(report.centroids.matrix(), threshold).len() <= 1 {
            return Ok(gamma);
        }
        state = Some(next);
        gamma *= 2.0;
    }
    Err(PathError::NoFullFusion {
        seed,
        last_gamma: gamma / 2.0,
    })
}

/// Grid values for `opts`, resolving an automatic `gamma_max`.
pub fn resolve_grid(
    data: &DataSet,
    aff: &AffinityMatrix,
    opts: &PathOptions,
    solve_opts: &SolveOptions,
) -> Result<Vec<f64>, PathError> {
    opts.validate()?;
    if let Some(g) = &opts.grid {
        return Ok(g.clone());
    }
    let gamma_max = match opts.gamma_max {
        GammaMax::Fixed(g) => g,
        GammaMax::Auto => auto_gamma_max(data, aff, opts, solve_opts)?,
    };
    grid_between(opts, gamma_max)
}

fn grid_between(opts: &PathOptions, gamma_max: f64) -> Result<Vec<f64>, PathError> {
    let size = opts.grid_size;
    let mut grid = match opts.grid_kind {
        GridKind::Linear => {
            let lo = opts.gamma_min.unwrap_or(0.0);
            if lo >= gamma_max {
                return Err(PathError::BadOptions(
                    "gamma_min must be below gamma_max".into(),
                ));
            }
            (0..size)
                .map(|k| lo + (gamma_max - lo) * k as f64 / (size - 1) as f64)
                .collect::<Vec<_>>()
        }
        GridKind::Geometric => {
            let (zero, lo, count) = match opts.gamma_min {
                Some(0.0) => (true, gamma_max / DEFAULT_GRID_SPAN, size - 1),
                Some(m) => (false, m, size),
                None => (false, gamma_max / DEFAULT_GRID_SPAN, size),
            };
            if lo >= gamma_max {
                return Err(PathError::BadOptions(
                    "gamma_min must be below gamma_max".into(),
                ));
            }
            let span = (gamma_max / lo).ln();
            let mut g: Vec<f64> = if count == 1 {
                vec![gamma_max]
            } else {
                (0..count)
                    .map(|k| lo * (span * k as f64 / (count - 1) as f64).exp())
                    .collect()
            };
            if zero {
                g.insert(0, 0.0);
            }
            g
        }
    };
    if let Some(last) = grid.last_mut() {
        *last = gamma_max;
    }
    Ok(grid)
}

/// Solves every grid γ in increasing order, warm-starting each solve from
/// the previous one.
pub fn solve_path_on_grid(
    data: &DataSet,
    aff: &AffinityMatrix,
    grid: &[f64],
    solve_opts: &SolveOptions,
) -> Result<SolutionPath, PathError> {
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut converged = Vec::with_capacity(grid.len());
    let mut state: Option<AdmmState> = None;
    for &gamma in grid {
        let (report, next) = solve_resumable(data, aff, gamma, solve_opts, state)?;
        if !report.converged {
            log::warn!(
                "gamma = {gamma}: stopped after {} iterations without converging",
                report.iterations
            );
        }
        snapshots.push(report.centroids);
        converged.push(report.converged);
        state = Some(next);
    }
    Ok(SolutionPath::new(
        grid.to_vec(),
        snapshots,
        converged,
        solve_opts.norm_kind,
    )?)
}

/// [`resolve_grid`] followed by [`solve_path_on_grid`].
pub fn solve_path(
    data: &DataSet,
    aff: &AffinityMatrix,
    opts: &PathOptions,
    solve_opts: &SolveOptions,
) -> Result<SolutionPath, PathError> {
    let grid = resolve_grid(data, aff, opts, solve_opts)?;
    solve_path_on_grid(data, aff, &grid, solve_opts)
}

/// Clusters at every grid γ, with `‖u_i − u_j‖ ≤ tolerance · diam(data)`
/// meaning fused, plus every pair that is fused at one grid γ and apart at
/// the next.
pub fn detect_fusions(path: &SolutionPath, data: &DataSet, fusion_tolerance: f64) -> FusionReport {
    let threshold = fusion_tolerance * data.diameter();
    let clusters: Vec<Vec<Vec<usize>>> = path
        .snapshots()
        .iter()
        .map(|s| fusion_partition(s.matrix(), threshold))
        .collect();
    let n = data.n();
    let mut violations = Vec::new();
    for k in 1..clusters.len() {
        let mut block_of = vec![0usize; n];
        for (b, block) in clusters[k].iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        for block in &clusters[k - 1] {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    if block_of[i] != block_of[j] {
                        violations.push(Violation {
                            i,
                            j,
                            fused_gamma: path.gammas()[k - 1],
                            separated_gamma: path.gammas()[k],
                        });
                    }
                }
            }
        }
    }
    FusionReport {
        gammas: path.gammas().to_vec(),
        clusters_per_gamma: clusters,
        violations,
    }
}

/// Builds the dendrogram of first-coincidence events. Several clusters
/// meeting at one grid γ become a chain of binary merges at that γ, ordered
/// by smallest member.
pub fn recover_tree(report: &FusionReport, leaf_ids: &[String]) -> Result<Dendrogram, PathError> {
    if !report.violations.is_empty() {
        return Err(PathError::UnfusionDetected(report.violations.clone()));
    }
    let n = leaf_ids.len();
    let mut cluster_of: Vec<usize> = (0..n).collect();
    let mut min_member: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges: Vec<Merge> = Vec::new();
    for (gamma, blocks) in report.gammas.iter().zip(&report.clusters_per_gamma) {
        for block in blocks {
            let mut parts: Vec<usize> = block.iter().map(|&i| cluster_of[i]).collect();
            parts.sort_by_key(|&c| (min_member[c], c));
            parts.dedup();
            let Some((&first, rest)) = parts.split_first() else {
                continue;
            };
            let mut acc = first;
            for &c in rest {
                let new = n + merges.len();
                let s = size[acc] + size[c];
                merges.push(Merge {
                    gamma: *gamma,
                    cluster_a: acc,
                    cluster_b: c,
                    new_cluster: new,
                    size: s,
                });
                size.push(s);
                min_member.push(min_member[acc].min(min_member[c]));
                acc = new;
            }
            for &i in block {
                cluster_of[i] = acc;
            }
        }
    }
    let dendro = Dendrogram::new(leaf_ids.to_vec(), merges)?;
    if dendro.is_complete() {
        Ok(dendro)
    } else {
        Err(PathError::IncompleteFusion(dendro))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAgreement {
    pub level: usize,
    /// The partition after the merges realizing this level equals the
    /// tree's partition at this level.
    pub partition_matches: bool,
    /// γ of the first and last merge realizing this level.
    pub gamma_range: Option<(f64, f64)>,
    /// Every merge of this level happens at a strictly smaller γ than every
    /// merge of the next level.
    pub separated_from_next: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeAgreement {
    pub exact: bool,
    /// Lowest level failing either check.
    pub first_mismatch: Option<usize>,
    pub levels: Vec<LevelAgreement>,
}

/// Checks that the merge sequence, cut between levels, reproduces each
/// partition of `target` and that the levels are strictly ordered in γ.
pub fn tree_agreement(
    dendro: &Dendrogram,
    target: &PartitionTree,
) -> Result<TreeAgreement, PathError> {
    let n = dendro.n_leaves();
    if target.n_leaves() != n {
        return Err(PathError::LeafMismatch {
            dendrogram: n,
            tree: target.n_leaves(),
        });
    }
    validate_tree(target, n)?;
    let merges = dendro.merges();
    let height = target.height();
    let steps: Vec<usize> = (0..=height).map(|l| n - target.level(l).len()).collect();
    let range = |l: usize| -> Option<(f64, f64)> {
        let (lo, hi) = (steps[l - 1], steps[l].min(merges.len()));
        (lo < hi).then(|| (merges[lo].gamma, merges[hi - 1].gamma))
    };
    let mut levels = Vec::with_capacity(height);
    for l in 1..=height {
        let partition_matches = steps[l] <= merges.len() && {
            let mut want: Vec<Vec<usize>> = target
                .level(l)
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    f.sort_unstable();
                    f
                })
                .collect();
            want.sort();
            dendro.partition_after(steps[l]) == want
        };
        let here = range(l);
        let separated_from_next = l == height
            || match (here, range(l + 1)) {
                (Some((_, hi)), Some((lo, _))) => hi < lo,
                _ => true,
            };
        levels.push(LevelAgreement {
            level: l,
            partition_matches,
            gamma_range: here,
            separated_from_next,
        });
    }
    let first_mismatch = levels
        .iter()
        .find(|l| !(l.partition_matches && l.separated_from_next))
        .map(|l| l.level);
    Ok(TreeAgreement {
        exact: first_mismatch.is_none(),
        first_mismatch,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{gaussian_affinities, unit_affinities, GaussianConfig};
    use crate::types::{CentroidSet, NormKind};

    fn two_points() -> (DataSet, AffinityMatrix) {
        (
            DataSet::from_rows(&[[0.0], [1.0]]).unwrap(),
            unit_affinities(2),
        )
    }

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| i.to_string()).collect()
    }

    fn path_of(rows: &[Vec<Vec<f64>>], gammas: &[f64]) -> SolutionPath {
        let snaps = rows
            .iter()
            .map(|r| CentroidSet::new(PointMatrix::from_rows(r).unwrap()).unwrap())
            .collect();
        SolutionPath::new(
            gammas.to_vec(),
            snaps,
            vec![true; gammas.len()],
            NormKind::Euclidean,
        )
        .unwrap()
    }

    #[test]
    fn auto_gamma_max_two_points() {
        let (data, aff) = two_points();
        let g = auto_gamma_max(
            &data,
            &aff,
            &PathOptions::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(g >= 0.5, "{g}");
    }

    #[test]
    fn auto_gamma_max_identical_points() {
        let data = DataSet::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let aff = unit_affinities(3);
        let opts = PathOptions::default();
        assert_eq!(
            auto_gamma_max(&data, &aff, &opts, &SolveOptions::default()),
            Ok(1.0)
        );
        let opts = PathOptions {
            gamma_min: Some(0.25),
            ..PathOptions::default()
        };
        assert_eq!(
            auto_gamma_max(&data, &aff, &opts, &SolveOptions::default()),
            Ok(0.25)
        );
    }

    #[test]
    fn auto_gamma_max_without_coupling_fails() {
        let (data, _) = two_points();
        let r = auto_gamma_max(
            &data,
            &AffinityMatrix::empty(2),
            &PathOptions::default(),
            &SolveOptions::default(),
        );
        assert!(matches!(r, Err(PathError::NoFullFusion { .. })));
    }

    #[test]
    fn grid_shapes() {
        let opts = PathOptions {
            gamma_max: GammaMax::Fixed(10.0),
            grid_size: 5,
            ..PathOptions::default()
        };
        let (data, aff) = two_points();
        let so = SolveOptions::default();
        let g = resolve_grid(&data, &aff, &opts, &so).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert_eq!(g[4], 10.0);
        assert!((g[1] / g[0] - 10.0).abs() < 1e-9);

        let zero = PathOptions {
            gamma_min: Some(0.0),
            ..opts.clone()
        };
        let g = resolve_grid(&data, &aff, &zero, &so).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);

        let lin = PathOptions {
            grid_kind: GridKind::Linear,
            ..opts.clone()
        };
        assert_eq!(
            resolve_grid(&data, &aff, &lin, &so).unwrap(),
            vec![0.0, 2.5, 5.0, 7.5, 10.0]
        );

        let bad = PathOptions {
            grid: Some(vec![1.0, 0.5]),
            ..opts
        };
        assert!(matches!(
            resolve_grid(&data, &aff, &bad, &so),
            Err(PathError::BadOptions(_))
        ));
    }

    #[test]
    fn zero_grid_is_data() {
        let (data, aff) = two_points();
        let opts = PathOptions {
            grid: Some(vec![0.0]),
            ..PathOptions::default()
        };
        let path = solve_path(&data, &aff, &opts, &SolveOptions::default()).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.snapshots()[0], CentroidSet::from_data(&data));
    }

    #[test]
    fn two_point_path_matches_closed_form() {
        let (data, aff) = two_points();
        let opts = PathOptions {
            grid: Some(vec![0.1, 0.3, 0.8]),
            ..PathOptions::default()
        };
        let path = solve_path(&data, &aff, &opts, &SolveOptions::default()).unwrap();
        let expected = [[0.1, 0.9], [0.3, 0.7], [0.5, 0.5]];
        for (snap, want) in path.snapshots().iter().zip(expected) {
            for i in 0..2 {
                assert!((snap.centroid(i)[0] - want[i]).abs() < 1e-8);
            }
        }
        assert!(path.all_converged());
    }

    #[test]
    fn detect_single_cluster_and_singletons() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let p = path_of(
            &[
                vec![vec![0.0], vec![1.0], vec![3.0]],
                vec![vec![2.0], vec![2.0], vec![2.0]],
            ],
            &[0.0, 1.0],
        );
        let r = detect_fusions(&p, &data, 1e-6);
        assert_eq!(r.cluster_counts(), vec![3, 1]);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn detect_unfusion() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let p = path_of(
            &[
                vec![vec![0.0], vec![1.0], vec![3.0]],
                vec![vec![0.5], vec![0.5], vec![3.0]],
                vec![vec![0.4], vec![0.6], vec![2.0]],
            ],
            &[0.0, 1.0, 2.0],
        );
        let r = detect_fusions(&p, &data, 1e-6);
        assert_eq!(
            r.violations,
            vec![Violation {
                i: 0,
                j: 1,
                fused_gamma: 1.0,
                separated_gamma: 2.0
            }]
        );
        assert!(
            matches!(recover_tree(&r, &ids(3)), Err(PathError::UnfusionDetected(v)) if v.len() == 1)
        );
    }

    #[test]
    fn recover_two_point_merge() {
        let (data, aff) = two_points();
        let opts = PathOptions {
            grid: Some(vec![0.25, 0.5, 0.75]),
            ..PathOptions::default()
        };
        let path = solve_path(&data, &aff, &opts, &SolveOptions::default()).unwrap();
        let report = detect_fusions(&path, &data, DEFAULT_FUSION_TOLERANCE);
        let d = recover_tree(&report, data.ids()).unwrap();
        assert_eq!(d.merges().len(), 1);
        assert_eq!(d.merges()[0].gamma, 0.5);
    }

    #[test]
    fn recover_collinear_gaussian() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let aff = gaussian_affinities(&data, &GaussianConfig::new(100.0).unwrap());
        let path = solve_path(
            &data,
            &aff,
            &PathOptions::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        let report = detect_fusions(&path, &data, DEFAULT_FUSION_TOLERANCE);
        let d = recover_tree(&report, data.ids()).unwrap();
        let m = d.merges();
        assert_eq!((m[0].cluster_a, m[0].cluster_b), (0, 1));
        assert_eq!((m[1].cluster_a, m[1].cluster_b), (3, 2));
        assert!(m[0].gamma < m[1].gamma);
    }

    #[test]
    fn multiway_merge_is_chained_by_smallest_member() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let p = path_of(
            &[
                vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
                vec![vec![1.5], vec![1.5], vec![1.5], vec![1.5]],
            ],
            &[0.0, 1.0],
        );
        let d = recover_tree(&detect_fusions(&p, &data, 1e-6), &ids(4)).unwrap();
        let pairs: Vec<_> = d
            .merges()
            .iter()
            .map(|m| (m.cluster_a, m.cluster_b, m.gamma))
            .collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (4, 2, 1.0), (5, 3, 1.0)]);
    }

    #[test]
    fn incomplete_fusion_returns_partial_dendrogram() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let p = path_of(&[vec![vec![0.5], vec![0.5], vec![3.0]]], &[1.0]);
        match recover_tree(&detect_fusions(&p, &data, 1e-6), &ids(3)) {
            Err(PathError::IncompleteFusion(d)) => assert_eq!(d.merges().len(), 1),
            other => panic!("{other:?}"),
        }
    }

    fn dendro(merges: &[(usize, usize, f64)], n: usize) -> Dendrogram {
        let mut size: Vec<usize> = vec![1; n];
        let ms = merges
            .iter()
            .enumerate()
            .map(|(s, &(a, b, g))| {
                size.push(size[a] + size[b]);
                Merge {
                    gamma: g,
                    cluster_a: a,
                    cluster_b: b,
                    new_cluster: n + s,
                    size: size[n + s],
                }
            })
            .collect();
        Dendrogram::new(ids(n), ms).unwrap()
    }

    #[test]
    fn agreement_trivial_tree() {
        let t = PartitionTree::from_upper_levels(2, vec![vec![vec![0, 1]]]);
        assert!(
            tree_agreement(&dendro(&[(0, 1, 0.5)], 2), &t)
                .unwrap()
                .exact
        );
    }

    #[test]
    fn agreement_detects_wrong_order() {
        let t = PartitionTree::from_upper_levels(
            4,
            vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]]],
        );
        let good = dendro(&[(0, 1, 1.0), (2, 3, 1.5), (4, 5, 3.0)], 4);
        assert!(tree_agreement(&good, &t).unwrap().exact);

        let crossed = dendro(&[(0, 2, 1.0), (1, 3, 1.5), (4, 5, 3.0)], 4);
        let a = tree_agreement(&crossed, &t).unwrap();
        assert!(!a.exact);
        assert_eq!(a.first_mismatch, Some(1));

        let tied = dendro(&[(0, 1, 1.0), (2, 3, 3.0), (4, 5, 3.0)], 4);
        let a = tree_agreement(&tied, &t).unwrap();
        assert_eq!(a.first_mismatch, Some(1));
        assert!(a.levels[0].partition_matches && !a.levels[0].separated_from_next);

        assert!(matches!(
            tree_agreement(&dendro(&[(0, 1, 1.0)], 2), &t),
            Err(PathError::LeafMismatch { .. })
        ));
    }
}
