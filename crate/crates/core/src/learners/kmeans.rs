use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Clustering;
use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    pub k: usize,
    pub dim: usize,
    /// Inertia after initialization and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("history starts at initialization")
    }

    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for c in 0..self.k {
            let d = dist2(x, self.centroid(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations. An emptied cluster keeps
/// its previous centroid.
pub fn fit_kmeans(vectors: &[f64], dim: usize, params: KMeansParams) -> Result<KMeansModel> {
    if dim == 0 || vectors.len() % dim != 0 {
        return Err(Error::InvalidArgument("vector buffer is not a multiple of dim".into()));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("fit_kmeans"));
    }
    let n = vectors.len() / dim;
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let point = |i: usize| &vectors[i * dim..(i + 1) * dim];

    let mut g = rng::stream(params.seed, "kmeans++", 0);
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(point(g.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = g.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            g.random_range(0..n)
        };
        let c = centroids.len() / dim;
        centroids.extend_from_slice(point(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(point(i), &centroids[c * dim..(c + 1) * dim]));
        }
    }

    let mut model = KMeansModel {
        centroids,
        k,
        dim,
        inertia_history: Vec::new(),
        iterations: 0,
    };
    let mut labels = vec![0usize; n];
    let assign = |model: &KMeansModel, labels: &mut [usize]| -> f64 {
        let mut inertia = 0.0;
        for (i, l) in labels.iter_mut().enumerate() {
            let (c, d) = model.nearest(point(i));
            *l = c;
            inertia += d;
        }
        inertia
    };
    let initial = assign(&model, &mut labels);
    model.inertia_history.push(initial);

    for _ in 0..params.max_iter {
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            sums[l * dim..(l + 1) * dim].iter_mut().zip(point(i)).for_each(|(s, v)| *s += v);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[c * dim..(c + 1) * dim].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(dist2(&new, model.centroid(c)).sqrt());
            model.centroids[c * dim..(c + 1) * dim].copy_from_slice(&new);
        }
        model.iterations += 1;
        let inertia = assign(&model, &mut labels);
        model.inertia_history.push(inertia);
        if shift < params.tol {
            break;
        }
    }
    Ok(model)
}

/// Nearest-centroid labels; ties go to the lowest centroid index.
pub fn assign_clusters(model: &KMeansModel, ds: &EmbeddingDataset) -> Result<Clustering> {
    if ds.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            found: ds.dim(),
        });
    }
    Ok(Clustering::new((0..ds.len()).map(|i| model.nearest(ds.vector(i)).0 as u32).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_identities;

    #[test]
    fn single_cluster_is_the_mean() {
        let v = vec![0.0, 0.0, 2.0, 4.0, 4.0, 2.0];
        let m = fit_kmeans(&v, 2, KMeansParams::new(1, 0)).unwrap();
        assert!((m.centroid(0)[0] - 2.0).abs() < 1e-12);
        assert!((m.centroid(0)[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_distinct_points() {
        let v = vec![0.0, 1.0, 5.0, 9.0, 20.0];
        let m = fit_kmeans(&v, 1, KMeansParams::new(5, 3)).unwrap();
        assert_eq!(m.inertia(), 0.0);
        let ds = EmbeddingDataset::new((0..5).map(|i| i.to_string()).collect(), 1, v, vec![0; 5]).unwrap();
        let mut labels = assign_clusters(&m, &ds).unwrap().assignment;
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 5);
    }

    #[test]
    fn k_exceeding_n_is_rejected() {
        assert!(matches!(
            fit_kmeans(&[1.0, 2.0], 1, KMeansParams::new(3, 0)),
            Err(Error::KExceedsN { k: 3, n: 2 })
        ));
    }

    #[test]
    fn inertia_is_non_increasing() {
        let ds = generate_synthetic_identities(15, 6, 4, 0.8, 1.0, 11).unwrap();
        for seed in 0..5 {
            let m = fit_kmeans(ds.vectors(), ds.dim(), KMeansParams::new(10, seed)).unwrap();
            for w in m.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", m.inertia_history);
            }
            // Recomputed final inertia agrees with the recorded one.
            let labels = assign_clusters(&m, &ds).unwrap().assignment;
            let direct: f64 = (0..ds.len())
                .map(|i| dist2(ds.vector(i), m.centroid(labels[i] as usize)))
                .sum();
            assert!((direct - m.inertia()).abs() <= 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = generate_synthetic_identities(8, 5, 3, 0.5, 1.0, 4).unwrap();
        let a = fit_kmeans(ds.vectors(), 3, KMeansParams::new(6, 9)).unwrap();
        assert_eq!(a, fit_kmeans(ds.vectors(), 3, KMeansParams::new(6, 9)).unwrap());
    }

    #[test]
    fn assignment_matches_brute_force_and_ties_go_low() {
        let ds = generate_synthetic_identities(6, 5, 3, 0.6, 1.0, 8).unwrap();
        let m = fit_kmeans(ds.vectors(), 3, KMeansParams::new(4, 1)).unwrap();
        let labels = assign_clusters(&m, &ds).unwrap().assignment;
        for i in 0..ds.len() {
            let d: Vec<f64> = (0..4).map(|c| dist2(ds.vector(i), m.centroid(c))).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(labels[i] as usize, d.iter().position(|&x| x == min).unwrap());
        }

        let tie = KMeansModel {
            centroids: vec![-1.0, 1.0],
            k: 2,
            dim: 1,
            inertia_history: vec![0.0],
            iterations: 0,
        };
        let ds = EmbeddingDataset::new(vec!["a".into(), "b".into()], 1, vec![0.0, 1.0], vec![0, 0]).unwrap();
        assert_eq!(assign_clusters(&tie, &ds).unwrap().assignment, vec![0, 1]);
    }
}
