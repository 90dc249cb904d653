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

//! Synthetic instances: the eighteen-leaf, three-level partition tree with
//! matching well-separated planar data, and random point clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::types::{DataSet, PartitionTree, PointMatrix};

/// Level-1 folder sizes of the eighteen-leaf tree.
pub const LEVEL1_FOLDER_SIZES: [usize; 5] = [5, 3, 5, 3, 2];

/// Eighteen leaves in five level-1 folders `{0..4}, {5,6,7}, {8..12},
/// {13,14,15}, {16,17}`, grouped as `{F1, F2}` and `{F3, F4, F5}` at level 2,
/// with a single root at level 3.
pub fn three_level_tree() -> PartitionTree {
    let mut folders = Vec::new();
    let mut next = 0;
    for size in LEVEL1_FOLDER_SIZES {
        folders.push((next..next + size).collect::<Vec<_>>());
        next += size;
    }
    let level2 = vec![
        [folders[0].clone(), folders[1].clone()].concat(),
        [folders[2].clone(), folders[3].clone(), folders[4].clone()].concat(),
    ];
    PartitionTree::from_upper_levels(next, vec![folders, level2, vec![(0..next).collect()]])
}

/// Planar layout for [`three_level_tree`].
#[derive(Debug, Clone, Copy)]
pub struct ThreeLevelLayout {
    /// Maximum distance of a point from its level-1 folder centre.
    pub folder_radius: f64,
    /// Distance between level-1 folder centres inside a level-2 folder.
    pub folder_spacing: f64,
    /// Distance between the two level-2 folder centres.
    pub group_spacing: f64,
}

impl Default for ThreeLevelLayout {
    fn default() -> Self {
        Self {
            folder_radius: 0.5,
            folder_spacing: 10.0,
            group_spacing: 100.0,
        }
    }
}

/// Data for [`three_level_tree`]: folder members scattered around folder centres,
/// folder centres clustered by level-2 folder. Deterministic in `seed`.
pub fn three_level_instance(layout: ThreeLevelLayout, seed: u64) -> (DataSet, PartitionTree) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = layout.folder_spacing;
    let h = s * 3f64.sqrt() / 2.0;
    let g = layout.group_spacing;
    let centres = [
        [0.0, 0.0],
        [s, 0.0],
        [g, 0.0],
        [g + s, 0.0],
        [g + 0.5 * s, h],
    ];
    let mut rows = Vec::new();
    for (centre, size) in centres.iter().zip(LEVEL1_FOLDER_SIZES) {
        let offset: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        for k in 0..size {
            let angle = offset + std::f64::consts::TAU * k as f64 / size as f64;
            let radius = layout.folder_radius * rng.random_range(0.4..1.0);
            rows.push([
                centre[0] + radius * angle.cos(),
                centre[1] + radius * angle.sin(),
            ]);
        }
    }
    let data = DataSet::from_rows(&rows).expect("finite synthetic data");
    (data, three_level_tree())
}

/// `n` points in `R^p` with independent standard normal coordinates.
pub fn gaussian_cloud<R: Rng>(rng: &mut R, n: usize, p: usize) -> PointMatrix {
    let values = (0..n * p)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    PointMatrix::from_row_major(n, p, values).expect("n * p values")
}
