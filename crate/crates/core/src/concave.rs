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

//! Folded concave penalties and the local linear approximation (LLA).
//!
//! The folded energy is `½ Σ ‖x_i − u_i‖² + γ Σ_{i<j} φ(‖u_i − u_j‖)`. Its
//! tangent-line majorizer at an anchor `ũ` is a weighted convex clustering
//! energy with `w_ij = φ′(‖ũ_i − ũ_j‖)` plus a constant, so each LLA step is
//! one call to [`crate::solver::solve`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::gaussian_weight;
use crate::solver::{fidelity, solve, SolveOptions, SolverError};
use crate::types::{
    euclidean_distance, squared_distance, AffinityMatrix, CentroidSet, DataSet, NormKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConcaveError {
    #[error("penalty argument must be nonnegative, got {0}")]
    NegativeInput(f64),
    #[error("invalid penalty parameter: {0}")]
    BadParameter(String),
    #[error("LLA needs the Euclidean penalty norm")]
    UnsupportedNorm,
    #[error("LLA needs at least one step")]
    NoSteps,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PenaltyKind {
    /// `φ(z) = ∫₀^z exp(−α²/σ) dα`.
    Erf { sigma: f64 },
    /// Smoothly clipped absolute deviation, `a > 2`.
    Scad { lambda: f64, a: f64 },
    /// Minimax concave penalty, `a > 1`.
    Mcp { lambda: f64, a: f64 },
}

/// A validated [`PenaltyKind`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyKind", into = "PenaltyKind")]
pub struct Penalty(PenaltyKind);

impl TryFrom<PenaltyKind> for Penalty {
    type Error = ConcaveError;
    fn try_from(kind: PenaltyKind) -> Result<Self, ConcaveError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConcaveError::BadParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match kind {
            PenaltyKind::Erf { sigma } => positive("sigma", sigma)?,
            PenaltyKind::Scad { lambda, a } => {
                positive("lambda", lambda)?;
                if !(a.is_finite() && a > 2.0) {
                    return Err(ConcaveError::BadParameter(format!(
                        "scad needs a > 2, got {a}"
                    )));
                }
            }
            PenaltyKind::Mcp { lambda, a } => {
                positive("lambda", lambda)?;
                if !(a.is_finite() && a > 1.0) {
                    return Err(ConcaveError::BadParameter(format!(
                        "mcp needs a > 1, got {a}"
                    )));
                }
            }
        }
        Ok(Penalty(kind))
    }
}

impl From<Penalty> for PenaltyKind {
    fn from(p: Penalty) -> Self {
        p.0
    }
}

impl Penalty {
    pub fn erf(sigma: f64) -> Result<Self, ConcaveError> {
        PenaltyKind::Erf { sigma }.try_into()
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self, ConcaveError> {
        PenaltyKind::Scad { lambda, a }.try_into()
    }

    pub fn mcp(lambda: f64, a: f64) -> Result<Self, ConcaveError> {
        PenaltyKind::Mcp { lambda, a }.try_into()
    }

    pub fn kind(&self) -> PenaltyKind {
        self.0
    }

    fn value(&self, z: f64) -> f64 {
        match self.0 {
            PenaltyKind::Erf { sigma } => {
                let s = sigma.sqrt();
                0.5 * (std::f64::consts::PI * sigma).sqrt() * libm::erf(z / s)
            }
            PenaltyKind::Scad { lambda, a } => {
                if z <= lambda {
                    lambda * z
                } else if z <= a * lambda {
                    (2.0 * a * lambda * z - z * z - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    0.5 * lambda * lambda * (a + 1.0)
                }
            }
            PenaltyKind::Mcp { lambda, a } => {
                if z <= a * lambda {
                    lambda * z - z * z / (2.0 * a)
                } else {
                    0.5 * a * lambda * lambda
                }
            }
        }
    }

    fn slope(&self, z: f64) -> f64 {
        match self.0 {
            PenaltyKind::Erf { sigma } => gaussian_weight(z * z, sigma),
            PenaltyKind::Scad { lambda, a } => {
                if z <= lambda {
                    lambda
                } else {
                    (a * lambda - z).max(0.0) / (a - 1.0)
                }
            }
            PenaltyKind::Mcp { lambda, a } => (lambda - z / a).max(0.0),
        }
    }

    /// `φ′` at the squared distance `sq`. The erf variant uses the Gaussian
    /// kernel on `sq` directly so its weights equal [`crate::affinity::gaussian_affinities`].
    fn slope_at_squared(&self, sq: f64) -> f64 {
        match self.0 {
            PenaltyKind::Erf { sigma } => gaussian_weight(sq, sigma),
            _ => self.slope(sq.sqrt()),
        }
    }
}

/// `φ(z)`.
pub fn penalty_value(pen: &Penalty, z: f64) -> Result<f64, ConcaveError> {
    if !(z >= 0.0) {
        return Err(ConcaveError::NegativeInput(z));
    }
    Ok(pen.value(z))
}

/// `φ′(z)`, the right derivative at 0.
pub fn penalty_derivative(pen: &Penalty, z: f64) -> Result<f64, ConcaveError> {
    if !(z >= 0.0) {
        return Err(ConcaveError::NegativeInput(z));
    }
    Ok(pen.slope(z))
}

fn check(data: &DataSet, gamma: f64, u: &CentroidSet) -> Result<(), SolverError> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(SolverError::NegativeGamma(gamma));
    }
    if u.matrix().shape() != data.points().shape() {
        return Err(SolverError::ShapeMismatch {
            expected: data.points().shape(),
            found: u.matrix().shape(),
        });
    }
    Ok(())
}

fn pair_distances(u: &CentroidSet) -> impl Iterator<Item = f64> + '_ {
    let n = u.n();
    (0..n).flat_map(move |i| {
        ((i + 1)..n).map(move |j| euclidean_distance(u.centroid(i), u.centroid(j)))
    })
}

/// `½ Σ ‖x_i − u_i‖² + γ Σ_{i<j} φ(‖u_i − u_j‖)`.
pub fn folded_energy(
    data: &DataSet,
    pen: &Penalty,
    gamma: f64,
    u: &CentroidSet,
) -> Result<f64, ConcaveError> {
    check(data, gamma, u)?;
    Ok(fidelity(data, u) + gamma * pair_distances(u).map(|d| pen.value(d)).sum::<f64>())
}

/// `w_ij = φ′(‖ũ_i − ũ_j‖)`; zero weights are left out.
pub fn lla_weights(pen: &Penalty, anchor: &CentroidSet) -> AffinityMatrix {
    let n = anchor.n();
    let mut aff = AffinityMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = pen.slope_at_squared(squared_distance(anchor.centroid(i), anchor.centroid(j)));
            aff.set(i, j, w)
                .expect("penalty slopes are finite and nonnegative");
        }
    }
    aff
}

/// `γ Σ_{i<j} [φ(d̃_ij) − φ′(d̃_ij) d̃_ij]`, the part of the majorizer that
/// does not depend on `u`.
pub fn majorizer_offset(pen: &Penalty, gamma: f64, anchor: &CentroidSet) -> f64 {
    gamma
        * pair_distances(anchor)
            .map(|d| pen.value(d) - pen.slope(d) * d)
            .sum::<f64>()
}

/// The tangent-line majorizer of [`folded_energy`] at `anchor`, evaluated at `u`.
pub fn majorizer(
    data: &DataSet,
    pen: &Penalty,
    gamma: f64,
    u: &CentroidSet,
    anchor: &CentroidSet,
) -> Result<f64, ConcaveError> {
    check(data, gamma, u)?;
    check(data, gamma, anchor)?;
    let linear: f64 = pair_distances(u)
        .zip(pair_distances(anchor))
        .map(|(d, da)| pen.slope(da) * d)
        .sum();
    Ok(fidelity(data, u) + gamma * linear + majorizer_offset(pen, gamma, anchor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlaTrace {
    /// `u⁽⁰⁾ = x, u⁽¹⁾, …, u⁽ᴷ⁾`.
    pub iterates: Vec<CentroidSet>,
    /// Folded energy of each iterate.
    pub energies: Vec<f64>,
    /// Weights used to produce iterate `k + 1`.
    pub weights_per_step: Vec<AffinityMatrix>,
    /// Solver convergence flag per step.
    pub converged: Vec<bool>,
    /// Steps where the solver output did not lower the majorizer and the
    /// anchor was kept instead.
    pub kept_anchor: Vec<bool>,
}

impl LlaTrace {
    pub fn is_descending(&self, slack: f64) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// `K` LLA steps from `u⁽⁰⁾ = x`. Step 1 solves from the data, later steps
/// warm-start from the previous iterate.
pub fn lla_run(
    data: &DataSet,
    pen: &Penalty,
    gamma: f64,
    steps: usize,
    solve_opts: &SolveOptions,
) -> Result<LlaTrace, ConcaveError> {
    if steps == 0 {
        return Err(ConcaveError::NoSteps);
    }
    if solve_opts.norm_kind != NormKind::Euclidean {
        return Err(ConcaveError::UnsupportedNorm);
    }
    let start = CentroidSet::from_data(data);
    let mut trace = LlaTrace {
        energies: vec![folded_energy(data, pen, gamma, &start)?],
        iterates: vec![start],
        weights_per_step: Vec::with_capacity(steps),
        converged: Vec::with_capacity(steps),
        kept_anchor: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let anchor = &trace.iterates[k];
        let weights = lla_weights(pen, anchor);
        let warm = (k > 0).then_some(anchor);
        let report = solve(data, &weights, gamma, solve_opts, warm)?;
        let keep = majorizer(data, pen, gamma, &report.centroids, anchor)?
            > majorizer(data, pen, gamma, anchor, anchor)?;
        if keep {
            log::debug!(
                "LLA step {}: solver output raised the majorizer, keeping the anchor",
                k + 1
            );
        }
        let next = if keep {
            anchor.clone()
        } else {
            report.centroids
        };
        trace.energies.push(folded_energy(data, pen, gamma, &next)?);
        trace.iterates.push(next);
        trace.weights_per_step.push(weights);
        trace.converged.push(report.converged);
        trace.kept_anchor.push(keep);
    }
    Ok(trace)
}
