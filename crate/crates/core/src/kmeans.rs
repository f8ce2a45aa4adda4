//! Lloyd's k-means with k-means++ seeding and seeded parallel restarts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GlpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 30,
            max_iter: 300,
        }
    }
}

/// Cluster labels for each row of the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Labels in `1..=support`, numbered by first occurrence.
    pub z: Vec<usize>,
    pub inertia: f64,
    pub restarts_used: usize,
    /// Number of non-empty clusters.
    pub support: usize,
    /// Requested number of clusters.
    pub k: usize,
}

impl ClusterAssignment {
    /// True when every restart lost at least one cluster.
    pub fn is_degenerate(&self) -> bool {
        self.support < self.k
    }
}

struct Run {
    labels: Vec<usize>,
    inertia: f64,
    nonempty: bool,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    points
        .row(i)
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(points, i, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.nrows();
    let row = |i: usize| points.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &DMatrix<f64>, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Run {
    let n = points.nrows();
    let p = points.ncols();
    let mut centers = plus_plus(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(points, i, &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(points.row(i).iter()) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            let inertia = (0..n)
                .map(|i| sq_dist(points, i, &centers[labels[i]]))
                .sum();
            return Run {
                labels,
                inertia,
                nonempty: false,
            };
        }
        for c in 0..k {
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
        }
        centers = sums;
        if !changed {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points, i, &centers[labels[i]]))
        .sum();
    Run {
        labels,
        inertia,
        nonempty: true,
    }
}

/// Renumbers labels `1..` by first occurrence.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().find(|(from, _)| from == l) {
            Some((_, to)) => *to,
            None => {
                let to = map.len() + 1;
                map.push((*l, to));
                to
            }
        })
        .collect()
}

/// Clusters the rows of `points` into `k` groups.
///
/// Restart `r` draws from a ChaCha8 stream `r` keyed by `seed`, and the
/// winner is chosen by `(inertia, r)`, so results do not depend on thread
/// scheduling. Restarts that lose a cluster are discarded unless all of them
/// do, in which case the best of those is returned with reduced support.
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<ClusterAssignment> {
    let n = points.nrows();
    if config.restarts == 0 {
        return Err(GlpError::InvalidArgument(
            "k-means needs at least one restart".into(),
        ));
    }
    if k == 0 || k > n {
        return Err(GlpError::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let runs: Vec<Run> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, k, config.max_iter, &mut rng)
        })
        .collect();

    let pick = |want_nonempty: bool| {
        runs.iter()
            .enumerate()
            .filter(|(_, r)| r.nonempty == want_nonempty)
            .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
    };
    let (_, best) = pick(true)
        .or_else(|| pick(false))
        .expect("at least one restart ran");

    let z = canonical_labels(&best.labels);
    let support = z.iter().copied().max().unwrap_or(0);
    Ok(ClusterAssignment {
        z,
        inertia: best.inertia,
        restarts_used: config.restarts,
        support,
        k,
    })
}
