//! I1 clustering: maximize `Σ_i ‖s_i‖² / n_i`, where `s_i` is the sum of the
//! composites in cluster `i`. With composites scaled as in
//! [`composite_of`](super::composite_of) this equals `Σ_i n_i Q(S_i)`, the
//! size-weighted average pairwise context similarity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{dot, mix_seed};

/// Smallest objective gain that counts as an improving move.
pub const MOVE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSolution {
    k: usize,
    dim: usize,
    assignment: Vec<usize>,
    sizes: Vec<usize>,
    sums: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl ClusterSolution {
    pub fn from_assignment(composites: &[Vec<f64>], k: usize, assignment: Vec<usize>) -> Result<Self> {
        if composites.len() != assignment.len() {
            return Err(Error::Invariant(format!(
                "{} composites but {} assignments",
                composites.len(),
                assignment.len()
            )));
        }
        if k == 0 {
            return Err(Error::Precondition("k must be at least 1".into()));
        }
        let dim = composites.first().map_or(0, Vec::len);
        let mut sol = ClusterSolution {
            k,
            dim,
            assignment,
            sizes: vec![0; k],
            sums: vec![0.0; k * dim],
            sq_norms: vec![0.0; k],
        };
        for (c, &a) in composites.iter().zip(&sol.assignment) {
            if a >= k {
                return Err(Error::Invariant(format!("cluster {a} out of range for k = {k}")));
            }
            if c.len() != dim {
                return Err(Error::Invariant("composites differ in dimension".into()));
            }
            sol.sizes[a] += 1;
            crate::math::axpy(1.0, c, &mut sol.sums[a * dim..(a + 1) * dim]);
        }
        sol.refresh_norms();
        Ok(sol)
    }

    fn refresh_norms(&mut self) {
        for i in 0..self.k {
            let s = self.sum(i);
            self.sq_norms[i] = dot(s, s);
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn sum(&self, cluster: usize) -> &[f64] {
        &self.sums[cluster * self.dim..(cluster + 1) * self.dim]
    }

    /// Mean composite of a cluster (zero for an empty cluster).
    pub fn centroid(&self, cluster: usize) -> Vec<f64> {
        let n = self.sizes[cluster].max(1) as f64;
        self.sum(cluster).iter().map(|x| x / n).collect()
    }

    fn term(sq_norm: f64, size: usize) -> f64 {
        if size == 0 {
            0.0
        } else {
            sq_norm / size as f64
        }
    }

    /// Objective from the maintained squared norms.
    pub fn objective(&self) -> f64 {
        (0..self.k).map(|i| Self::term(self.sq_norms[i], self.sizes[i])).sum()
    }

    /// Change in objective if composite `c`, currently in `from`, moved to
    /// `to`.
    pub fn move_delta(&self, c: &[f64], from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        let cc = dot(c, c);
        let (na, nb) = (self.sizes[from], self.sizes[to]);
        let sa = self.sq_norms[from];
        let sb = self.sq_norms[to];
        let new_a = if na > 1 {
            (sa - 2.0 * dot(self.sum(from), c) + cc) / (na - 1) as f64
        } else {
            0.0
        };
        let new_b = (sb + 2.0 * dot(self.sum(to), c) + cc) / (nb + 1) as f64;
        new_a - Self::term(sa, na) + new_b - Self::term(sb, nb)
    }

    pub fn apply_move(&mut self, index: usize, c: &[f64], to: usize) {
        let from = self.assignment[index];
        if from == to {
            return;
        }
        let cc = dot(c, c);
        let dim = self.dim;
        self.sq_norms[from] += cc - 2.0 * dot(self.sum(from), c);
        self.sq_norms[to] += cc + 2.0 * dot(self.sum(to), c);
        crate::math::axpy(-1.0, c, &mut self.sums[from * dim..(from + 1) * dim]);
        crate::math::axpy(1.0, c, &mut self.sums[to * dim..(to + 1) * dim]);
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.assignment[index] = to;
    }
}

/// `Σ_i ‖s_i‖² / n_i`, recomputed from the cluster sums.
pub fn i1_objective(solution: &ClusterSolution) -> f64 {
    (0..solution.k)
        .map(|i| {
            let s = solution.sum(i);
            ClusterSolution::term(dot(s, s), solution.sizes[i])
        })
        .sum()
}

/// Random balanced two-way assignment of `n` items.
pub fn balanced_split(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for &i in &idx[n / 2..] {
        assignment[i] = 1;
    }
    assignment
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefineStats {
    pub passes: usize,
    pub moves: usize,
}

/// Greedy incremental refinement: visit items in shuffled order and move
/// each to the cluster with the largest objective gain, if that gain exceeds
/// [`MOVE_TOLERANCE`]. Moves that would empty a cluster are not allowed.
/// Stops after a pass without moves or after `max_passes`.
pub fn greedy_refine(
    composites: &[Vec<f64>],
    mut solution: ClusterSolution,
    max_passes: usize,
    seed: u64,
) -> Result<(ClusterSolution, RefineStats)> {
    if composites.len() < 2 {
        return Err(Error::Precondition("clustering needs at least 2 items".into()));
    }
    if solution.len() != composites.len() {
        return Err(Error::Invariant("solution does not match composites".into()));
    }
    let mut stats = RefineStats::default();
    let mut order: Vec<usize> = (0..composites.len()).collect();
    while stats.passes < max_passes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, stats.passes as u64));
        order.shuffle(&mut rng);
        solution.refresh_norms();
        stats.passes += 1;
        let mut moved = 0;
        for &u in &order {
            let from = solution.assignment[u];
            if solution.sizes[from] <= 1 {
                continue;
            }
            let c = &composites[u];
            let mut best = (from, MOVE_TOLERANCE);
            for to in (0..solution.k).filter(|&t| t != from) {
                let delta = solution.move_delta(c, from, to);
                if delta > best.1 {
                    best = (to, delta);
                }
            }
            if best.0 != from {
                solution.apply_move(u, c, best.0);
                moved += 1;
            }
        }
        stats.moves += moved;
        if moved == 0 {
            break;
        }
    }
    solution.refresh_norms();
    Ok((solution, stats))
}

/// Best of `trials` greedy refinements into two clusters, each started from
/// its own random balanced split. Ties keep the earlier trial.
pub fn i1_cluster(
    composites: &[Vec<f64>],
    trials: usize,
    max_passes: usize,
    seed: u64,
) -> Result<(ClusterSolution, RefineStats)> {
    let mut best: Option<(ClusterSolution, RefineStats)> = None;
    for t in 0..trials.max(1) as u64 {
        let start = balanced_split(composites.len(), mix_seed(seed, 2 * t));
        let init = ClusterSolution::from_assignment(composites, 2, start)?;
        let (sol, stats) = greedy_refine(composites, init, max_passes, mix_seed(seed, 2 * t + 1))?;
        if best.as_ref().is_none_or(|(b, _)| sol.objective() > b.objective()) {
            best = Some((sol, stats));
        }
    }
    Ok(best.expect("at least one trial"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_composites(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn identical_unit_composites_in_one_cluster() {
        let c = vec![vec![0.6, 0.8]; 7];
        let s = ClusterSolution::from_assignment(&c, 1, vec![0; 7]).unwrap();
        assert!((i1_objective(&s) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn two_singletons() {
        let c = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = ClusterSolution::from_assignment(&c, 2, vec![0, 1]).unwrap();
        assert!((i1_objective(&s) - 2.0).abs() < 1e-15);
        assert!((s.objective() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn incremental_delta_matches_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.random_range(3..20);
            let c = random_composites(&mut rng, n, 6);
            let s = ClusterSolution::from_assignment(&c, 2, balanced_split(n, rng.random())).unwrap();
            let u = rng.random_range(0..n);
            let from = s.assignment()[u];
            if s.sizes()[from] == 1 {
                continue;
            }
            let delta = s.move_delta(&c[u], from, 1 - from);
            let mut moved = s.assignment().to_vec();
            moved[u] = 1 - from;
            let after = ClusterSolution::from_assignment(&c, 2, moved).unwrap();
            let exact = i1_objective(&after) - i1_objective(&s);
            assert!((delta - exact).abs() <= 1e-9 * i1_objective(&s).max(1.0));
        }
    }

    #[test]
    fn sums_track_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random_composites(&mut rng, 30, 5);
        let mut s = ClusterSolution::from_assignment(&c, 2, balanced_split(30, 1)).unwrap();
        for _ in 0..200 {
            let u = rng.random_range(0..30);
            let to = rng.random_range(0..2);
            s.apply_move(u, &c[u], to);
        }
        let fresh = ClusterSolution::from_assignment(&c, 2, s.assignment().to_vec()).unwrap();
        for i in 0..2 {
            for (a, b) in s.sum(i).iter().zip(fresh.sum(i)) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
        assert!((s.objective() - i1_objective(&fresh)).abs() < 1e-9 * i1_objective(&fresh).max(1.0));
    }

    #[test]
    fn recovers_orthogonal_bundles() {
        let mut c = Vec::new();
        for i in 0..10 {
            let jitter = 0.01 * i as f64;
            if i < 5 {
                c.push(vec![1.0, jitter, 0.0]);
            } else {
                c.push(vec![0.0, jitter, 1.0]);
            }
        }
        for seed in 0..20 {
            let init = ClusterSolution::from_assignment(&c, 2, balanced_split(10, seed)).unwrap();
            let (s, _) = greedy_refine(&c, init, 50, seed).unwrap();
            let a = s.assignment();
            assert!(a[..5].iter().all(|&x| x == a[0]));
            assert!(a[5..].iter().all(|&x| x == a[5]));
            assert_ne!(a[0], a[5]);
        }
    }

    #[test]
    fn identical_composites_terminate() {
        let c = vec![vec![0.0, 1.0]; 9];
        let init = ClusterSolution::from_assignment(&c, 2, balanced_split(9, 3)).unwrap();
        let (s, stats) = greedy_refine(&c, init, 100, 3).unwrap();
        assert!((i1_objective(&s) - 9.0).abs() < 1e-12);
        assert_eq!(stats.moves, 0);
        assert_eq!(stats.passes, 1);
    }

    #[test]
    fn refuses_tiny_inputs_and_never_empties_a_cluster() {
        let c = vec![vec![1.0]];
        let init = ClusterSolution::from_assignment(&c, 2, vec![0]).unwrap();
        assert!(matches!(greedy_refine(&c, init, 5, 0), Err(Error::Precondition(_))));

        let c = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.01]];
        let init = ClusterSolution::from_assignment(&c, 2, vec![0, 0, 1]).unwrap();
        let (s, _) = greedy_refine(&c, init, 10, 0).unwrap();
        assert!(s.sizes().iter().all(|&n| n >= 1));
    }

    #[test]
    fn more_trials_never_hurt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..30 {
            let c = random_composites(&mut rng, 11, 3);
            let one = i1_cluster(&c, 1, 50, seed).unwrap().0.objective();
            let ten = i1_cluster(&c, 10, 50, seed).unwrap().0.objective();
            assert!(ten >= one);
        }
    }

    #[test]
    fn objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..50 {
            let c = random_composites(&mut rng, 25, 4);
            let init = ClusterSolution::from_assignment(&c, 2, balanced_split(25, trial)).unwrap();
            let before = i1_objective(&init);
            let (after, _) = greedy_refine(&c, init, 30, trial).unwrap();
            assert!(i1_objective(&after) >= before - 1e-12);
        }
    }
}
