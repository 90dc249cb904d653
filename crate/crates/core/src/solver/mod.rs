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

//! Fixed-γ minimization of the convex clustering energy
//!
//! `E_γ(u) = ½ Σ_i ‖x_i − u_i‖² + γ Σ_{i<j} w_ij ‖u_i − u_j‖`
//!
//! together with the energy decomposition, the uniform energy bound and the
//! leaf-fusion threshold. [`solve`] runs an ADMM splitting over pair
//! differences; [`oracle_solve`] is an independent smoothed Newton method kept
//! for verification on small instances.
//!
//! Some texts write the energy without the ½ and with the penalty over ordered
//! pairs. That form equals this one after multiplying γ by 4.

mod admm;
mod oracle;

pub use admm::AdmmState;
pub use oracle::oracle_solve;

use thiserror::Error;

use crate::types::{AffinityMatrix, CentroidSet, DataSet, NormKind, PointMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("centroids have shape {found:?}, data has shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("affinities cover {found} points, data has {expected}")]
    AffinitySize { expected: usize, found: usize },
    #[error("gamma must be finite and nonnegative, got {0}")]
    NegativeGamma(f64),
    #[error("invalid solver options: {0}")]
    BadOptions(String),
    #[error("epsilon cut {0} coincides with an affinity value")]
    AmbiguousCut(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub norm_kind: NormKind,
    pub max_iterations: usize,
    /// Relative-change threshold for the stopping rule.
    pub tolerance: f64,
    /// Initial ADMM penalty parameter; `None` picks one from the problem scale.
    pub rho: Option<f64>,
    /// Keep the objective value of every iterate in the report.
    pub record_objective: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            norm_kind: NormKind::Euclidean,
            max_iterations: 100_000,
            tolerance: 1e-8,
            rho: None,
            record_objective: false,
        }
    }
}

impl SolveOptions {
    pub fn with_norm(norm_kind: NormKind) -> Self {
        Self {
            norm_kind,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SolverError::BadOptions("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::BadOptions(
                "max_iterations must be at least 1".into(),
            ));
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(SolverError::BadOptions("rho must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub centroids: CentroidSet,
    /// `E_γ` of `centroids`.
    pub objective: f64,
    pub iterations: usize,
    /// Whether the stopping rule fired before `max_iterations`.
    pub converged: bool,
    /// `‖Du − v‖` between centroid differences and the split variables.
    pub primal_residual: f64,
    /// Objective per iteration when requested.
    pub objective_trace: Vec<f64>,
}

fn check_inputs(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    u: Option<&CentroidSet>,
) -> Result<(), SolverError> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(SolverError::NegativeGamma(gamma));
    }
    if aff.n() != data.n() {
        return Err(SolverError::AffinitySize {
            expected: data.n(),
            found: aff.n(),
        });
    }
    if let Some(u) = u {
        if u.matrix().shape() != data.points().shape() {
            return Err(SolverError::ShapeMismatch {
                expected: data.points().shape(),
                found: u.matrix().shape(),
            });
        }
    }
    Ok(())
}

/// `½ Σ ‖x_i − u_i‖²`.
pub fn fidelity(data: &DataSet, u: &CentroidSet) -> f64 {
    0.5 * data
        .points()
        .as_slice()
        .iter()
        .zip(u.matrix().as_slice())
        .map(|(x, u)| (x - u) * (x - u))
        .sum::<f64>()
}

/// `Σ_{i<j} w_ij ‖u_i − u_j‖` over a pair subset.
fn penalty_over(
    aff: &AffinityMatrix,
    u: &PointMatrix,
    norm: NormKind,
    keep: impl Fn(f64) -> bool,
) -> f64 {
    aff.pairs()
        .filter(|&(_, _, w)| keep(w))
        .map(|(i, j, w)| w * norm.distance(u.row(i), u.row(j)))
        .sum()
}

/// The convex clustering energy `E_γ(u)`.
pub fn energy(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    u: &CentroidSet,
    norm: NormKind,
) -> Result<f64, SolverError> {
    check_inputs(data, aff, gamma, Some(u))?;
    Ok(fidelity(data, u) + gamma * penalty_over(aff, u.matrix(), norm, |_| true))
}

/// Splits `E_γ(u)` into `E1` (fidelity plus pairs weighted above `cut`) and
/// `E2` (pairs weighted below `cut`).
pub fn energy_split(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    u: &CentroidSet,
    cut: f64,
    norm: NormKind,
) -> Result<(f64, f64), SolverError> {
    check_inputs(data, aff, gamma, Some(u))?;
    if aff
        .pairs()
        .any(|(_, _, w)| (w - cut).abs() <= crate::types::INVARIANT_TOL)
    {
        return Err(SolverError::AmbiguousCut(cut));
    }
    let e1 = fidelity(data, u) + gamma * penalty_over(aff, u.matrix(), norm, |w| w > cut);
    let e2 = gamma * penalty_over(aff, u.matrix(), norm, |w| w < cut);
    Ok((e1, e2))
}

/// Energy of the fully fused configuration `u_i = x̄`, i.e.
/// `½ Σ ‖x_i − x̄‖²`, which bounds the minimal energy for every γ.
pub fn energy_upper_bound(data: &DataSet) -> f64 {
    fidelity(data, &CentroidSet::constant(data.n(), &data.mean()))
}

/// `8 √E / n`: the γ beyond which leaf folders are guaranteed fused.
pub fn leaf_fusion_gamma_bound(energy_bound: f64, n: usize) -> f64 {
    8.0 * energy_bound.max(0.0).sqrt() / n.max(1) as f64
}

/// Minimizes `E_γ` from `warm_start` (or from the data).
pub fn solve(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    opts: &SolveOptions,
    warm_start: Option<&CentroidSet>,
) -> Result<SolveReport, SolverError> {
    check_inputs(data, aff, gamma, warm_start)?;
    opts.validate()?;
    let init = warm_start.map(AdmmState::from_centroids);
    Ok(admm::run(data, aff, gamma, opts, init).0)
}

/// Like [`solve`], but resumes from (and returns) the full splitting state,
/// which includes the dual variables. Used along γ paths.
pub fn solve_resumable(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    opts: &SolveOptions,
    state: Option<AdmmState>,
) -> Result<(SolveReport, AdmmState), SolverError> {
    check_inputs(data, aff, gamma, state.as_ref().map(AdmmState::centroids))?;
    opts.validate()?;
    Ok(admm::run(data, aff, gamma, opts, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{tree_affinities, unit_affinities, TreeWeightConfig};
    use crate::synthetic::{three_level_instance, ThreeLevelLayout};

    fn two_points() -> (DataSet, AffinityMatrix) {
        (
            DataSet::from_rows(&[[0.0], [1.0]]).unwrap(),
            unit_affinities(2),
        )
    }

    fn centroids(rows: &[[f64; 1]]) -> CentroidSet {
        CentroidSet::new(PointMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn energy_at_data_is_pure_penalty() {
        let data = DataSet::from_rows(&[[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]]).unwrap();
        let aff = unit_affinities(3);
        let e = energy(
            &data,
            &aff,
            0.5,
            &CentroidSet::from_data(&data),
            NormKind::Euclidean,
        )
        .unwrap();
        // distances 5, 1, sqrt(18)
        assert!((e - 0.5 * (5.0 + 1.0 + 18f64.sqrt())).abs() < 1e-15);
        let e1 = energy(
            &data,
            &aff,
            0.5,
            &CentroidSet::from_data(&data),
            NormKind::OneNorm,
        )
        .unwrap();
        assert!((e1 - 0.5 * (7.0 + 1.0 + 6.0)).abs() < 1e-15);
    }

    #[test]
    fn energy_two_point_arithmetic() {
        let (data, aff) = two_points();
        let e = energy(
            &data,
            &aff,
            0.3,
            &centroids(&[[0.3], [0.7]]),
            NormKind::Euclidean,
        )
        .unwrap();
        assert!((e - 0.21).abs() < 1e-15);
    }

    #[test]
    fn energy_of_fused_centroids_is_fidelity() {
        let (data, aff) = two_points();
        let u = centroids(&[[0.25], [0.25]]);
        let e = energy(&data, &aff, 10.0, &u, NormKind::Euclidean).unwrap();
        assert_eq!(e, fidelity(&data, &u));
    }

    #[test]
    fn energy_rejects_bad_inputs() {
        let (data, aff) = two_points();
        assert!(matches!(
            energy(
                &data,
                &aff,
                -1.0,
                &CentroidSet::from_data(&data),
                NormKind::Euclidean
            ),
            Err(SolverError::NegativeGamma(_))
        ));
        let wrong = CentroidSet::constant(3, &[0.0]);
        assert!(matches!(
            energy(&data, &aff, 1.0, &wrong, NormKind::Euclidean),
            Err(SolverError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn split_with_unit_weights_has_no_small_part() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        let u = CentroidSet::from_data(&data);
        let (e1, e2) = energy_split(
            &data,
            &unit_affinities(3),
            0.7,
            &u,
            0.5,
            NormKind::Euclidean,
        )
        .unwrap();
        assert_eq!(e2, 0.0);
        assert!((e1 - 0.7 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn split_classifies_tree_weights() {
        let (data, tree) = three_level_instance(ThreeLevelLayout::default(), 1);
        let aff = tree_affinities(&tree, &TreeWeightConfig::new(0.01).unwrap()).unwrap();
        let u = CentroidSet::from_data(&data);
        let gamma = 0.8;
        let (e1, e2) = energy_split(&data, &aff, gamma, &u, 0.5, NormKind::Euclidean).unwrap();
        let small: f64 = aff
            .pairs()
            .filter(|&(_, _, w)| w < 1.0)
            .map(|(i, j, w)| w * crate::types::euclidean_distance(data.point(i), data.point(j)))
            .sum();
        assert!((e2 - gamma * small).abs() <= 1e-12 * e2);
        let total = energy(&data, &aff, gamma, &u, NormKind::Euclidean).unwrap();
        assert!((e1 + e2 - total).abs() <= 1e-12 * total);
        assert!(matches!(
            energy_split(&data, &aff, gamma, &u, 0.01, NormKind::Euclidean),
            Err(SolverError::AmbiguousCut(_))
        ));
        let fused = CentroidSet::constant(18, &data.mean());
        let (e1, e2) = energy_split(&data, &aff, gamma, &fused, 0.5, NormKind::Euclidean).unwrap();
        assert_eq!(e1, fidelity(&data, &fused));
        assert_eq!(e2, 0.0);
    }

    #[test]
    fn upper_bound_values() {
        let same = DataSet::from_rows(&[[2.0, 1.0], [2.0, 1.0]]).unwrap();
        assert_eq!(energy_upper_bound(&same), 0.0);
        let (data, _) = two_points();
        assert_eq!(energy_upper_bound(&data), 0.25);
    }

    #[test]
    fn fusion_gamma_bound_values() {
        assert_eq!(leaf_fusion_gamma_bound(0.0, 5), 0.0);
        assert_eq!(leaf_fusion_gamma_bound(1.0, 8), 1.0);
        assert_eq!(leaf_fusion_gamma_bound(4.0, 4), 4.0);
    }

    #[test]
    fn zero_gamma_returns_data_exactly() {
        let data = DataSet::from_rows(&[[0.1, 0.2], [3.0, -1.0], [0.3, 0.3]]).unwrap();
        let r = solve(
            &data,
            &unit_affinities(3),
            0.0,
            &SolveOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.centroids, CentroidSet::from_data(&data));
        assert!(r.converged);
    }

    #[test]
    fn two_points_below_fusion() {
        let (data, aff) = two_points();
        for norm in [NormKind::Euclidean, NormKind::OneNorm] {
            let r = solve(&data, &aff, 0.3, &SolveOptions::with_norm(norm), None).unwrap();
            assert!(r.converged);
            assert!((r.centroids.centroid(0)[0] - 0.3).abs() < 1e-8);
            assert!((r.centroids.centroid(1)[0] - 0.7).abs() < 1e-8);
            assert!((r.objective - 0.21).abs() < 1e-10);
        }
    }

    #[test]
    fn two_points_fused() {
        let (data, aff) = two_points();
        let r = solve(&data, &aff, 0.8, &SolveOptions::default(), None).unwrap();
        assert!(r.converged);
        for i in 0..2 {
            assert!((r.centroids.centroid(i)[0] - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn full_fusion_lands_on_the_mean() {
        let (data, tree) = three_level_instance(ThreeLevelLayout::default(), 3);
        let aff = tree_affinities(&tree, &TreeWeightConfig::new(0.01).unwrap()).unwrap();
        let r = solve(&data, &aff, 1e6, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.centroids, CentroidSet::constant(data.n(), &data.mean()));
        assert_eq!(r.objective, energy_upper_bound(&data));
    }

    #[test]
    fn single_point_is_fixed() {
        let data = DataSet::from_rows(&[[4.0, 2.0]]).unwrap();
        let r = solve(
            &data,
            &unit_affinities(1),
            3.0,
            &SolveOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.centroids, CentroidSet::from_data(&data));
    }

    #[test]
    fn objective_matches_energy_of_centroids() {
        let (data, tree) = three_level_instance(ThreeLevelLayout::default(), 2);
        let aff = tree_affinities(&tree, &TreeWeightConfig::new(0.01).unwrap()).unwrap();
        let r = solve(&data, &aff, 0.3, &SolveOptions::default(), None).unwrap();
        let e = energy(&data, &aff, 0.3, &r.centroids, NormKind::Euclidean).unwrap();
        assert!((r.objective - e).abs() <= 1e-10 * e.abs());
        assert!(r.objective <= energy_upper_bound(&data) + 1e-10);
    }

    #[test]
    fn bad_options_are_rejected() {
        let (data, aff) = two_points();
        let opts = SolveOptions {
            tolerance: 0.0,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&data, &aff, 1.0, &opts, None),
            Err(SolverError::BadOptions(_))
        ));
        let opts = SolveOptions {
            max_iterations: 0,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&data, &aff, 1.0, &opts, None),
            Err(SolverError::BadOptions(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (data, tree) = three_level_instance(ThreeLevelLayout::default(), 2);
        let aff = tree_affinities(&tree, &TreeWeightConfig::new(0.01).unwrap()).unwrap();
        let opts = SolveOptions {
            max_iterations: 3,
            ..SolveOptions::default()
        };
        let r = solve(&data, &aff, 5.0, &opts, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
