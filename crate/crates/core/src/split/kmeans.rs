use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::solution::ClusterSolution;
use crate::error::{Error, Result};
use crate::math::{dot, norm};

/// Result of a spherical k-means run. `objective_trace[t]` is the mean
/// cosine between each point and its assigned centroid after the
/// assignment step of iteration `t`.
#[derive(Clone, Debug)]
pub struct KmeansResult {
    pub solution: ClusterSolution,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Spherical k-means over the normalized composites. The first centroid is
/// a point chosen by `seed`, the rest are picked farthest-first. An empty
/// cluster or a zero mean centroid is reseeded from the farthest point.
pub fn spherical_kmeans(composites: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KmeansResult> {
    let n = composites.len();
    if k < 2 || n < k {
        return Err(Error::Precondition(format!(
            "spherical k-means needs k >= 2 and n >= k (k = {k}, n = {n})"
        )));
    }
    let dim = composites[0].len();
    let points: Vec<Vec<f64>> = composites.iter().map(|c| unit(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centroids.len() < k {
        let far = (0..n)
            .map(|i| {
                let closest = centroids.iter().map(|c| dot(&points[i], c)).fold(f64::NEG_INFINITY, f64::max);
                (closest, i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
            .expect("n >= k");
        centroids.push(points[far].clone());
    }

    let mut assignment = vec![usize::MAX; n];
    let mut similarity = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let s = dot(p, c);
                if s > best.1 {
                    best = (j, s);
                }
            }
            if assignment[i] != best.0 {
                assignment[i] = best.0;
                changed = true;
            }
            similarity[i] = best.1;
        }
        trace.push(similarity.iter().sum::<f64>() / n as f64);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &a) in points.iter().zip(&assignment) {
            crate::math::axpy(1.0, p, &mut sums[a]);
        }
        let mut live: Vec<usize> = Vec::new();
        let mut degenerate = Vec::new();
        for (j, s) in sums.iter().enumerate() {
            if norm(s) > 0.0 {
                centroids[j] = unit(s);
                live.push(j);
            } else {
                degenerate.push(j);
            }
        }
        // Reseed from the point farthest from every live centroid (or from
        // its own centroid when none is live).
        for j in degenerate {
            let distance = |i: usize| -> f64 {
                if live.is_empty() {
                    similarity[i]
                } else {
                    live.iter()
                        .map(|&c| dot(&points[i], &centroids[c]))
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            };
            let far = (0..n)
                .map(|i| (distance(i), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, i)| i)
                .expect("n >= k");
            centroids[j] = points[far].clone();
            live.push(j);
        }
    }
    let solution = ClusterSolution::from_assignment(composites, k, assignment)?;
    Ok(KmeansResult {
        solution,
        iterations,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundles() -> Vec<Vec<f64>> {
        (0..10)
            .map(|i| {
                let e = 0.02 * (i % 5) as f64;
                if i % 2 == 0 {
                    vec![1.0, e, 0.0]
                } else {
                    vec![0.0, e, 2.0]
                }
            })
            .collect()
    }

    #[test]
    fn recovers_orthogonal_bundles() {
        let c = bundles();
        for seed in 0..20 {
            let r = spherical_kmeans(&c, 2, seed, 100).unwrap();
            let a = r.solution.assignment();
            for i in 0..10 {
                assert_eq!(a[i] == a[0], i % 2 == 0);
            }
        }
    }

    #[test]
    fn n_equal_k_gives_singletons() {
        let c = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let r = spherical_kmeans(&c, 3, 5, 10).unwrap();
        let mut a = r.solution.assignment().to_vec();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn objective_trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..30 {
            let c: Vec<Vec<f64>> = (0..60)
                .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let r = spherical_kmeans(&c, 2 + (seed as usize % 3), seed, 100).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{:?}", r.objective_trace);
            }
        }
    }

    #[test]
    fn antipodal_points_do_not_stall() {
        let c = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let r = spherical_kmeans(&c, 2, 0, 20).unwrap();
        let a = r.solution.assignment();
        assert_eq!(a[0], a[2]);
        assert_eq!(a[1], a[3]);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn rejects_bad_k() {
        let c = vec![vec![1.0]];
        assert!(spherical_kmeans(&c, 2, 0, 5).is_err());
        assert!(spherical_kmeans(&[vec![1.0], vec![2.0]], 1, 0, 5).is_err());
    }
}
