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

//! Convex clustering with sum-of-norms regularization.
//!
//! * [`types`]: data sets, affinities, partition trees, paths, dendrograms.
//! * [`affinity`]: tree-derived, Gaussian kernel and unit affinities.
//! * [`solver`]: fixed-γ minimization, energy bounds and a test oracle.
//! * [`path`]: γ sweeps, fusion detection, dendrograms and linkage baselines.
//! * [`geometry`]: witness points and directions for pairwise-distance sums.
//! * [`concave`]: folded concave penalties and the LLA iteration.
//! * [`formats`]: CSV, JSON and Newick readers and writers.
//! * [`synthetic`]: seeded instances with a known partition tree.

pub mod affinity;
pub mod concave;
pub mod formats;
pub mod geometry;
pub mod path;
pub mod solver;
pub mod synthetic;
pub mod types;

pub use types::{
    validate_dataset, validate_tree, AffinityMatrix, CentroidSet, CoreError, DataSet, Dendrogram,
    Merge, NormKind, PartitionTree, PointMatrix, SolutionPath,
};
