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

use serde::{Deserialize, Serialize};

use super::DisjointSets;
use crate::types::{euclidean_distance, DataSet, Dendrogram, Merge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    #[default]
    Average,
}

impl std::str::FromStr for Linkage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Linkage::Single),
            "average" => Ok(Linkage::Average),
            other => Err(format!(
                "unknown linkage '{other}' (expected single or average)"
            )),
        }
    }
}

/// Agglomerative clustering on Euclidean distances. Merge heights are stored
/// in the `gamma` field. Runs the nearest-neighbour chain in O(n²) time and
/// memory.
pub fn linkage_baseline(data: &DataSet, method: Linkage) -> Dendrogram {
    let n = data.n();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean_distance(data.point(i), data.point(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // (slot kept, slot retired, height)
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(
                active
                    .iter()
                    .position(|&a| a)
                    .expect("an active slot remains"),
            );
        }
        let a = *chain.last().unwrap();
        let prev = chain.len().checked_sub(2).map(|k| chain[k]);
        let mut best = prev;
        let mut best_d = prev.map_or(f64::INFINITY, |p| dist[a * n + p]);
        for c in 0..n {
            if active[c] && c != a && dist[a * n + c] < best_d {
                best = Some(c);
                best_d = dist[a * n + c];
            }
        }
        let b = best.expect("at least two active slots");
        if Some(b) != prev {
            chain.push(b);
            continue;
        }
        chain.truncate(chain.len() - 2);
        let (keep, drop) = (a.min(b), a.max(b));
        let (sk, sd) = (size[keep] as f64, size[drop] as f64);
        for c in 0..n {
            if active[c] && c != keep && c != drop {
                let updated = match method {
                    Linkage::Single => dist[keep * n + c].min(dist[drop * n + c]),
                    Linkage::Average => {
                        (sk * dist[keep * n + c] + sd * dist[drop * n + c]) / (sk + sd)
                    }
                };
                dist[keep * n + c] = updated;
                dist[c * n + keep] = updated;
            }
        }
        size[keep] += size[drop];
        active[drop] = false;
        remaining -= 1;
        raw.push((keep, drop, best_d));
    }
    raw.sort_by(|x, y| x.2.total_cmp(&y.2));

    let mut sets = DisjointSets::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut csize = vec![1usize; n];
    let mut merges = Vec::with_capacity(raw.len());
    for (s, &(x, y, h)) in raw.iter().enumerate() {
        let (rx, ry) = (sets.find(x), sets.find(y));
        let (la, lb) = (label[rx].min(label[ry]), label[rx].max(label[ry]));
        let total = csize[rx] + csize[ry];
        let root = sets.union(rx, ry);
        label[root] = n + s;
        csize[root] = total;
        merges.push(Merge {
            gamma: h,
            cluster_a: la,
            cluster_b: lb,
            new_cluster: n + s,
            size: total,
        });
    }
    Dendrogram::new(data.ids().to_vec(), merges).expect("linkage produces a valid dendrogram")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heights(d: &Dendrogram) -> Vec<f64> {
        d.merges().iter().map(|m| m.gamma).collect()
    }

    #[test]
    fn collinear_three_points() {
        let data = DataSet::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let single = linkage_baseline(&data, Linkage::Single);
        assert_eq!(heights(&single), vec![1.0, 9.0]);
        assert_eq!(
            (single.merges()[0].cluster_a, single.merges()[0].cluster_b),
            (0, 1)
        );
        assert_eq!(
            (single.merges()[1].cluster_a, single.merges()[1].cluster_b),
            (2, 3)
        );
        let average = linkage_baseline(&data, Linkage::Average);
        assert_eq!(heights(&average), vec![1.0, 9.5]);
    }

    /// Direct O(n³) agglomeration used as an oracle.
    fn naive(data: &DataSet, method: Linkage) -> Vec<f64> {
        let mut clusters: Vec<Vec<usize>> = (0..data.n()).map(|i| vec![i]).collect();
        let mut out = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 1, f64::INFINITY);
            for a in 0..clusters.len() {
                for b in (a + 1)..clusters.len() {
                    let ds = clusters[a]
                        .iter()
                        .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                        .map(|(i, j)| euclidean_distance(data.point(i), data.point(j)));
                    let d = match method {
                        Linkage::Single => ds.fold(f64::INFINITY, f64::min),
                        Linkage::Average => {
                            ds.sum::<f64>() / (clusters[a].len() * clusters[b].len()) as f64
                        }
                    };
                    if d < best.2 {
                        best = (a, b, d);
                    }
                }
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
            out.push(best.2);
        }
        out
    }

    #[test]
    fn matches_naive_agglomeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(2..12);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let data = DataSet::from_rows(&rows).unwrap();
            for method in [Linkage::Single, Linkage::Average] {
                let got = heights(&linkage_baseline(&data, method));
                let want = naive(&data, method);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-9, "{method:?}: {got:?} vs {want:?}");
                }
            }
        }
    }
}
