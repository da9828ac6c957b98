//! k-means clustering of units on their posterior `(total effect, network share)` pairs,
//! with silhouette selection of the number of clusters and an ordering constraint
//! against label switching.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::impacts::EffectPair;
use crate::linalg::substream;
use crate::par;

pub type Point = [f64; 2];

pub const RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERS: usize = 300;
pub const DEFAULT_K_MAX: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} needs at least {k} distinct points, found {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("invalid k = {k} for {n} points")]
    BadK { k: usize, n: usize },
    #[error("non-finite point at index {0}")]
    NonFinite(usize),
    #[error("silhouette selection needs at least 3 points (got {0})")]
    TooFewPoints(usize),
    #[error("no draw has a complete set of effect pairs")]
    NoUsableDraws,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centers: Vec<Point>,
    pub within_ss: f64,
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn distinct_count(points: &[Point]) -> usize {
    let mut v: Vec<Point> = points.to_vec();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v.dedup();
    v.len()
}

fn check_points(points: &[Point], k: usize) -> Result<(), ClusterError> {
    if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(ClusterError::NonFinite(i));
    }
    if k == 0 || k > points.len() {
        return Err(ClusterError::BadK { k, n: points.len() });
    }
    let distinct = distinct_count(points);
    if distinct < k {
        return Err(ClusterError::TooFewDistinct { k, distinct });
    }
    Ok(())
}

/// k-means++ seeding: first center uniform, later ones with probability proportional to
/// the squared distance to the nearest chosen center.
fn seed_centers<R: Rng + ?Sized>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: &[Point], centers: &[Point], out: &mut [usize]) -> f64 {
    let mut wss = 0.0;
    for (a, p) in out.iter_mut().zip(points) {
        let (best, d) = centers
            .iter()
            .enumerate()
            .map(|(c, ctr)| (c, dist2(p, ctr)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        *a = best;
        wss += d;
    }
    wss
}

/// Lloyd iterations from given centers; returns the result and the within-cluster sum
/// of squares after every assignment step.
fn lloyd(points: &[Point], mut centers: Vec<Point>) -> (KMeans, Vec<f64>) {
    let k = centers.len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut next = vec![0; points.len()];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        let wss = assign(points, &centers, &mut next);
        trace.push(wss);
        if next == assignments {
            break;
        }
        assignments.copy_from_slice(&next);
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            } else {
                // empty cluster: move it to the point farthest from its center
                let far = points
                    .iter()
                    .zip(&assignments)
                    .enumerate()
                    .max_by(|x, y| {
                        dist2(x.1 .0, &centers[*x.1 .1]).total_cmp(&dist2(y.1 .0, &centers[*y.1 .1]))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centers[c] = points[far];
            }
        }
    }
    let within_ss = assign(points, &centers, &mut assignments);
    (
        KMeans {
            assignments,
            centers,
            within_ss,
        },
        trace,
    )
}

/// Lloyd's algorithm with k-means++ seeding; the best of [`RESTARTS`] runs by
/// within-cluster sum of squares. Deterministic given `seed`.
pub fn kmeans(points: &[Point], k: usize, seed: u64) -> Result<KMeans, ClusterError> {
    check_points(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..RESTARTS {
        let (run, _) = lloyd(points, seed_centers(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.within_ss < b.within_ss) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// Per-point silhouette `(b - a) / max(a, b)`; zero for members of singleton clusters.
pub fn silhouette_scores(points: &[Point], assignments: &[usize], k: usize) -> Vec<f64> {
    let n = points.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    (0..n)
        .map(|i| {
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[assignments[j]] += dist2(&points[i], &points[j]).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 || !b.is_finite() {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect()
}

pub fn mean_silhouette(points: &[Point], assignments: &[usize], k: usize) -> f64 {
    let s = silhouette_scores(points, assignments, k);
    s.iter().sum::<f64>() / s.len() as f64
}

/// Number of clusters in `2..=min(k_max, distinct points, N - 1)` with the largest mean
/// silhouette (smallest `k` on ties), together with the score of every candidate.
pub fn silhouette_k(
    points: &[Point],
    k_max: usize,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>), ClusterError> {
    if points.len() < 3 {
        return Err(ClusterError::TooFewPoints(points.len()));
    }
    let upper = k_max.min(distinct_count(points)).min(points.len() - 1);
    if upper < 2 {
        return Err(ClusterError::TooFewDistinct {
            k: 2,
            distinct: distinct_count(points),
        });
    }
    let mut scores = Vec::new();
    for k in 2..=upper {
        let km = kmeans(points, k, seed.wrapping_add(k as u64))?;
        scores.push((k, mean_silhouette(points, &km.assignments, k)));
    }
    let best = scores
        .iter()
        .fold((0, f64::NEG_INFINITY), |acc, &(k, s)| if s > acc.1 { (k, s) } else { acc });
    Ok((best.0, scores))
}

/// Relabels clusters in decreasing order of the mean second coordinate (network share)
/// of their members, so label 0 is the most network-driven cluster.
pub fn order_by_share(points: &[Point], km: &KMeans) -> KMeans {
    let k = km.centers.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(&km.assignments) {
        sums[a] += p[1];
        counts[a] += 1;
    }
    let mean = |c: usize| {
        if counts[c] > 0 {
            sums[c] / counts[c] as f64
        } else {
            km.centers[c][1]
        }
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        mean(b)
            .total_cmp(&mean(a))
            .then(km.centers[b][0].total_cmp(&km.centers[a][0]))
    });
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    KMeans {
        assignments: km.assignments.iter().map(|&a| relabel[a]).collect(),
        centers: order.iter().map(|&c| km.centers[c]).collect(),
        within_ss: km.within_ss,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    /// Share of draws selecting each `k`.
    pub k_distribution: BTreeMap<usize, f64>,
    /// `N x k_fixed` membership probabilities under the ordering constraint.
    pub inclusion_prob: DMatrix<f64>,
    /// Relabeled centers per used draw, in the units of the clustered features.
    pub centers: Vec<Vec<Point>>,
    pub used_draws: usize,
    /// Draws skipped because some unit's share was undefined.
    pub skipped_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub k_fixed: usize,
    pub k_max: usize,
    pub seed: u64,
    /// z-score both features within each draw before clustering.
    pub standardize: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            k_fixed: 2,
            k_max: DEFAULT_K_MAX,
            seed: 0,
            standardize: false,
        }
    }
}

fn standardize(points: &mut [Point]) {
    for c in 0..2 {
        let col: Vec<f64> = points.iter().map(|p| p[c]).collect();
        let m = crate::stats::mean(&col);
        let sd = crate::stats::variance(&col).sqrt();
        if sd > 0.0 {
            for p in points.iter_mut() {
                p[c] = (p[c] - m) / sd;
            }
        }
    }
}

/// Per draw: silhouette choice of `k`, then `k_fixed`-means with the ordering
/// constraint; results pooled over draws.
pub fn cluster_posterior(
    pairs: &[Vec<EffectPair>],
    opts: &ClusterOptions,
) -> Result<ClusterRun, ClusterError> {
    let per = par::map_range(pairs.len(), |d| {
        let mut pts: Vec<Point> = Vec::with_capacity(pairs[d].len());
        for &(total, share) in &pairs[d] {
            pts.push([total, share?]);
        }
        if opts.standardize {
            standardize(&mut pts);
        }
        let seed = substream(opts.seed, d as u64).next_u64();
        Some((|| {
            let (k, _) = silhouette_k(&pts, opts.k_max, seed)?;
            let km = order_by_share(&pts, &kmeans(&pts, opts.k_fixed, seed)?);
            Ok::<_, ClusterError>((k, km))
        })())
    });

    let n = pairs.first().map_or(0, Vec::len);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut incl = DMatrix::zeros(n, opts.k_fixed);
    let mut centers = Vec::new();
    let mut skipped = 0;
    for r in per {
        let Some(r) = r else {
            skipped += 1;
            continue;
        };
        let (k, km) = r?;
        *counts.entry(k).or_default() += 1;
        for (i, &a) in km.assignments.iter().enumerate() {
            incl[(i, a)] += 1.0;
        }
        centers.push(km.centers);
    }
    let used = centers.len();
    if used == 0 {
        return Err(ClusterError::NoUsableDraws);
    }
    incl /= used as f64;
    Ok(ClusterRun {
        k_distribution: counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / used as f64))
            .collect(),
        inclusion_prob: incl,
        centers,
        used_draws: used,
        skipped_draws: skipped,
    })
}
