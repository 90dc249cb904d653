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

//! ADMM over pair differences.
//!
//! With `D` the pair-difference operator (`(Du)_l = u_i − u_j` for the
//! positive-weight pair `l = (i, j)`), the problem is
//! `min ½‖x − u‖² + γ Σ_l w_l ‖v_l‖` subject to `Du = v`. Each sweep solves
//! `(I + ρ DᵀD) u = x + Dᵀ(ρ v − λ)` with a cached Cholesky factor, applies
//! the proximal map of the penalty norm to every pair, then updates the
//! multipliers. `ρ` is rebalanced against the residuals early on.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{energy, SolveOptions, SolveReport};
use crate::types::{AffinityMatrix, CentroidSet, DataSet, NormKind, PointMatrix};

const RELAXATION: f64 = 1.6;
const RHO_ADAPT_EVERY: usize = 10;
const RHO_ADAPT_UNTIL: usize = 20_000;
const RHO_RESIDUAL_RATIO: f64 = 10.0;
const RHO_STEP: f64 = 2.0;
/// Centroids all within this distance (relative to the data spread) of
/// their mean are treated as one cluster.
const FUSED_RADIUS: f64 = 1e-6;

/// Resumable splitting state: centroids plus, when available, the split
/// variables and multipliers of the pair list they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    u: CentroidSet,
    pairs: Vec<(usize, usize)>,
    v: Vec<f64>,
    lambda: Vec<f64>,
    rho: f64,
    gamma: f64,
}

impl AdmmState {
    pub fn from_centroids(u: &CentroidSet) -> Self {
        Self {
            u: u.clone(),
            pairs: Vec::new(),
            v: Vec::new(),
            lambda: Vec::new(),
            rho: 0.0,
            gamma: 0.0,
        }
    }

    pub fn centroids(&self) -> &CentroidSet {
        &self.u
    }
}

fn to_dmatrix(m: &PointMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn to_points(m: &DMatrix<f64>) -> PointMatrix {
    let (n, p) = m.shape();
    let mut out = PointMatrix::zeros(n, p);
    for i in 0..n {
        for k in 0..p {
            out.row_mut(i)[k] = m[(i, k)];
        }
    }
    out
}

fn factor(n: usize, pairs: &[(usize, usize)], rho: f64) -> Cholesky<f64, Dyn> {
    let mut a = DMatrix::<f64>::identity(n, n);
    for &(i, j) in pairs {
        a[(i, i)] += rho;
        a[(j, j)] += rho;
        a[(i, j)] -= rho;
        a[(j, i)] -= rho;
    }
    Cholesky::new(a).expect("I + ρL is positive definite")
}

/// Proximal map of `κ‖·‖` applied in place.
fn prox(norm: NormKind, z: &mut [f64], kappa: f64) {
    match norm {
        NormKind::Euclidean => {
            let len = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if len <= kappa { 0.0 } else { 1.0 - kappa / len };
            z.iter_mut().for_each(|v| *v *= scale);
        }
        NormKind::OneNorm => {
            for v in z.iter_mut() {
                *v = v.signum() * (v.abs() - kappa).max(0.0);
            }
        }
    }
}

fn trivial_report(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    opts: &SolveOptions,
    u: CentroidSet,
) -> (SolveReport, AdmmState) {
    let objective = energy(data, aff, gamma, &u, opts.norm_kind).expect("validated inputs");
    let state = AdmmState::from_centroids(&u);
    (
        SolveReport {
            centroids: u,
            objective,
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            objective_trace: if opts.record_objective {
                vec![objective]
            } else {
                Vec::new()
            },
        },
        state,
    )
}

/// The fully fused minimizer `u_i = x̄`, when the iterate is within
/// [`FUSED_RADIUS`] of it.
fn snap_to_mean(data: &DataSet, u: &CentroidSet, spread: f64) -> Option<CentroidSet> {
    let mean = data.mean();
    (u.max_distance_to(&mean) <= FUSED_RADIUS * spread)
        .then(|| CentroidSet::constant(data.n(), &mean))
}

pub(super) fn run(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    opts: &SolveOptions,
    init: Option<AdmmState>,
) -> (SolveReport, AdmmState) {
    let n = data.n();
    let p = data.p();
    let edges: Vec<(usize, usize, f64)> = aff.pairs().collect();
    let spread = {
        let mean = data.mean();
        data.points()
            .iter_rows()
            .map(|r| {
                r.iter()
                    .zip(&mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    };
    // γ = 0, no coupling or identical points: the data is optimal.
    if gamma == 0.0 || edges.is_empty() || spread == 0.0 {
        return trivial_report(data, aff, gamma, opts, CentroidSet::from_data(data));
    }

    let m = edges.len();
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let x = to_dmatrix(data.points());

    let (mut u, mut v, mut lambda, mut rho) = match init {
        Some(s) if s.pairs == pairs && s.rho > 0.0 && s.gamma > 0.0 => {
            let ratio = gamma / s.gamma;
            let lambda = s.lambda.iter().map(|l| l * ratio).collect();
            (to_dmatrix(s.u.matrix()), s.v, lambda, s.rho * ratio)
        }
        other => {
            let u = other.map_or_else(|| x.clone(), |s| to_dmatrix(s.u.matrix()));
            let mut v = vec![0.0; m * p];
            for (l, &(i, j)) in pairs.iter().enumerate() {
                for k in 0..p {
                    v[l * p + k] = u[(i, k)] - u[(j, k)];
                }
            }
            (u, v, vec![0.0; m * p], opts.rho.unwrap_or(1.0))
        }
    };

    let mut chol = factor(n, &pairs, rho);
    let mut rhs = DMatrix::<f64>::zeros(n, p);
    let mut dt_dv = DMatrix::<f64>::zeros(n, p);
    let mut dt_lambda = DMatrix::<f64>::zeros(n, p);
    let mut z = vec![0.0; p];
    let mut d = vec![0.0; p];
    let mut trace = Vec::new();
    let mut objective = f64::INFINITY;
    let mut primal = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;

        rhs.copy_from(&x);
        for (l, &(i, j)) in pairs.iter().enumerate() {
            for k in 0..p {
                let t = rho * v[l * p + k] - lambda[l * p + k];
                rhs[(i, k)] += t;
                rhs[(j, k)] -= t;
            }
        }
        let u_prev = std::mem::replace(&mut u, chol.solve(&rhs));

        dt_dv.fill(0.0);
        dt_lambda.fill(0.0);
        let mut r2 = 0.0;
        let mut du2 = 0.0;
        let mut v2 = 0.0;
        for (l, &(i, j, w)) in edges.iter().enumerate() {
            let vl = &mut v[l * p..(l + 1) * p];
            let ll = &mut lambda[l * p..(l + 1) * p];
            for k in 0..p {
                d[k] = u[(i, k)] - u[(j, k)];
                let relaxed = RELAXATION * d[k] + (1.0 - RELAXATION) * vl[k];
                z[k] = relaxed + ll[k] / rho;
            }
            prox(opts.norm_kind, &mut z, gamma * w / rho);
            for k in 0..p {
                let relaxed = RELAXATION * d[k] + (1.0 - RELAXATION) * vl[k];
                ll[k] += rho * (relaxed - z[k]);
                let dv = z[k] - vl[k];
                dt_dv[(i, k)] += dv;
                dt_dv[(j, k)] -= dv;
                dt_lambda[(i, k)] += ll[k];
                dt_lambda[(j, k)] -= ll[k];
                r2 += (d[k] - z[k]) * (d[k] - z[k]);
                du2 += d[k] * d[k];
                v2 += z[k] * z[k];
                vl[k] = z[k];
            }
        }
        primal = r2.sqrt();
        let dual = rho * dt_dv.norm();

        let u_now = CentroidSet::new(to_points(&u)).expect("finite iterate");
        let previous = objective;
        objective = energy(data, aff, gamma, &u_now, opts.norm_kind).expect("validated inputs");
        if opts.record_objective {
            trace.push(objective);
        }

        let tol = opts.tolerance;
        let eps_primal = tol * (spread + du2.sqrt().max(v2.sqrt()));
        let eps_dual = tol * (spread + dt_lambda.norm());
        let step = (&u - &u_prev).norm();
        if primal <= eps_primal
            && dual <= eps_dual
            && step <= tol * spread
            && (objective - previous).abs() <= tol * objective.max(tol * spread * spread)
        {
            converged = true;
            break;
        }

        if iterations % RHO_ADAPT_EVERY == 0 && iterations <= RHO_ADAPT_UNTIL {
            let scaled_primal = primal / (du2.sqrt().max(v2.sqrt()) + spread * tol);
            let scaled_dual = dual / (dt_lambda.norm() + spread * tol);
            let new_rho = if scaled_primal > RHO_RESIDUAL_RATIO * scaled_dual {
                rho * RHO_STEP
            } else if scaled_dual > RHO_RESIDUAL_RATIO * scaled_primal {
                rho / RHO_STEP
            } else {
                rho
            };
            if new_rho != rho {
                rho = new_rho;
                chol = factor(n, &pairs, rho);
            }
        }
    }

    let iterate = CentroidSet::new(to_points(&u)).expect("finite iterate");
    let mut centroids = iterate.clone();
    if let Some(fused) = snap_to_mean(data, &iterate, spread) {
        let e = energy(data, aff, gamma, &fused, opts.norm_kind).expect("validated inputs");
        if e <= objective {
            centroids = fused;
            objective = e;
        }
    }
    let state = AdmmState {
        u: iterate,
        pairs,
        v,
        lambda,
        rho,
        gamma,
    };
    let report = SolveReport {
        centroids,
        objective,
        iterations,
        converged,
        primal_residual: primal,
        objective_trace: trace,
    };
    (report, state)
}
