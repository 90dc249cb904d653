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

//! Verification oracle: damped Newton on a smoothed energy with a shrinking
//! smoothing radius.
//!
//! Each norm is replaced by `h_δ(d) = √(‖d‖² + δ²) − δ` (per coordinate for
//! the one-norm), which satisfies `‖d‖ − δ ≤ h_δ(d) ≤ ‖d‖`. The smoothed
//! energy is smooth and strongly convex, so Newton with backtracking applies;
//! `δ` is shrunk geometrically with warm starts. The final energy lies within
//! `γ Σ w δ_final` (times `p` for the one-norm) of the true minimum. Dense
//! `np × np` Hessians restrict this to small instances.

use nalgebra::{DMatrix, DVector};

use crate::types::{AffinityMatrix, CentroidSet, DataSet, NormKind, PointMatrix};

const DELTA_START: f64 = 1e-1;
const DELTA_SHRINK: f64 = 0.1;
const DELTA_FINAL: f64 = 1e-11;

struct Smoothed<'a> {
    x: &'a [f64],
    pairs: Vec<(usize, usize, f64)>,
    gamma: f64,
    norm: NormKind,
    p: usize,
    delta: f64,
}

impl Smoothed<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let p = self.p;
        let fid: f64 = 0.5
            * self
                .x
                .iter()
                .zip(u)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        let mut pen = 0.0;
        for &(i, j, w) in &self.pairs {
            let d = (0..p).map(|k| u[i * p + k] - u[j * p + k]);
            pen += w * match self.norm {
                NormKind::Euclidean => {
                    let s2: f64 = d.map(|t| t * t).sum();
                    smooth_abs(s2, self.delta)
                }
                NormKind::OneNorm => d.map(|t| smooth_abs(t * t, self.delta)).sum(),
            };
        }
        fid + self.gamma * pen
    }

    fn gradient_hessian(&self, u: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let dim = u.len();
        let mut g = DVector::from_iterator(dim, u.iter().zip(self.x).map(|(a, b)| a - b));
        let mut h = DMatrix::<f64>::identity(dim, dim);
        let mut d = vec![0.0; p];
        let mut block = DMatrix::<f64>::zeros(p, p);
        for &(i, j, w) in &self.pairs {
            for k in 0..p {
                d[k] = u[i * p + k] - u[j * p + k];
            }
            let c = self.gamma * w;
            block.fill(0.0);
            let mut grad = vec![0.0; p];
            match self.norm {
                NormKind::Euclidean => {
                    let s = (d.iter().map(|t| t * t).sum::<f64>() + self.delta * self.delta).sqrt();
                    for a in 0..p {
                        grad[a] = d[a] / s;
                        for b in 0..p {
                            let eye = if a == b { 1.0 } else { 0.0 };
                            block[(a, b)] = (eye - d[a] * d[b] / (s * s)) / s;
                        }
                    }
                }
                NormKind::OneNorm => {
                    for a in 0..p {
                        let s = (d[a] * d[a] + self.delta * self.delta).sqrt();
                        grad[a] = d[a] / s;
                        block[(a, a)] = self.delta * self.delta / (s * s * s);
                    }
                }
            }
            for a in 0..p {
                g[i * p + a] += c * grad[a];
                g[j * p + a] -= c * grad[a];
                for b in 0..p {
                    let hb = c * block[(a, b)];
                    h[(i * p + a, i * p + b)] += hb;
                    h[(j * p + a, j * p + b)] += hb;
                    h[(i * p + a, j * p + b)] -= hb;
                    h[(j * p + a, i * p + b)] -= hb;
                }
            }
        }
        (g, h)
    }
}

/// `√(s² + δ²) − δ` evaluated without cancellation.
fn smooth_abs(s2: f64, delta: f64) -> f64 {
    s2 / ((s2 + delta * delta).sqrt() + delta)
}

/// Minimizes `E_γ` independently of [`super::solve`]. `iterations` caps the
/// Newton steps per smoothing stage. Intended for `n ≤ 8`, `p ≤ 3`.
pub fn oracle_solve(
    data: &DataSet,
    aff: &AffinityMatrix,
    gamma: f64,
    norm: NormKind,
    iterations: usize,
) -> CentroidSet {
    let p = data.p();
    let x = data.points().as_slice();
    if gamma == 0.0 || aff.is_empty() {
        return CentroidSet::from_data(data);
    }
    let scale = data.diameter().max(f64::MIN_POSITIVE);
    let mut f = Smoothed {
        x,
        pairs: aff.pairs().collect(),
        gamma,
        norm,
        p,
        delta: DELTA_START * scale,
    };
    let mut u = x.to_vec();
    loop {
        newton(&f, &mut u, iterations);
        if f.delta <= DELTA_FINAL * scale {
            break;
        }
        f.delta *= DELTA_SHRINK;
    }
    let m = PointMatrix::from_row_major(data.n(), p, u).expect("same shape as data");
    CentroidSet::new(m).expect("finite iterate")
}

fn newton(f: &Smoothed<'_>, u: &mut [f64], max_steps: usize) {
    let mut current = f.value(u);
    for _ in 0..max_steps {
        let (g, h) = f.gradient_hessian(u);
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&(-&g));
        let decrement = -g.dot(&step);
        if !(decrement > 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut trial = u.to_vec();
        let accepted = loop {
            for (k, v) in trial.iter_mut().enumerate() {
                *v = u[k] + t * step[k];
            }
            let value = f.value(&trial);
            if value <= current - 0.25 * t * decrement {
                break Some(value);
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some(value) => {
                u.copy_from_slice(&trial);
                let gained = current - value;
                current = value;
                if decrement < 1e-26 * (1.0 + current) || gained <= 0.0 {
                    break;
                }
            }
            None => break,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::unit_affinities;
    use crate::solver::energy;

    #[test]
    fn zero_gamma_is_data() {
        let data = DataSet::from_rows(&[[0.0, 1.0], [2.0, 3.0], [1.0, 1.0]]).unwrap();
        let u = oracle_solve(&data, &unit_affinities(3), 0.0, NormKind::Euclidean, 50);
        assert_eq!(u, CentroidSet::from_data(&data));
    }

    #[test]
    fn two_point_analytic_minimum() {
        let data = DataSet::from_rows(&[[0.0], [1.0]]).unwrap();
        let aff = unit_affinities(2);
        for norm in [NormKind::Euclidean, NormKind::OneNorm] {
            let u = oracle_solve(&data, &aff, 0.3, norm, 100);
            let e = energy(&data, &aff, 0.3, &u, norm).unwrap();
            assert!((e - 0.21).abs() < 1e-9, "{e}");
            assert!((u.centroid(0)[0] - 0.3).abs() < 1e-6);
            let fused = oracle_solve(&data, &aff, 0.8, norm, 100);
            let e = energy(&data, &aff, 0.8, &fused, norm).unwrap();
            assert!((e - 0.25).abs() < 1e-9, "{e}");
        }
    }
}
