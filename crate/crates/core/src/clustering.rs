//! Correlation-based user clustering.
//!
//! Users of one base station are grouped by the normalized inner product of
//! their channel vectors. The enhanced scheme seeds cluster heads by
//! farthest-point selection under that correlation and then runs Lloyd
//! iterations (assign to most correlated head, recompute heads as member means)
//! until membership stops changing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::CVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusteringError {
    #[error("cannot form {clusters} clusters from {users} users")]
    TooFewUsers { users: usize, clusters: usize },
    #[error("correlation is undefined for a zero vector")]
    ZeroVector,
    #[error("channel vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("max_iter must be at least 1")]
    NoIterations,
}

/// Channel correlation `|h1^H h2| / (|h1| |h2|)`, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Correlation(f64);

impl Correlation {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn correlation(h1: &CVector, h2: &CVector) -> Result<Correlation, ClusteringError> {
    if h1.len() != h2.len() {
        return Err(ClusteringError::LengthMismatch(h1.len(), h2.len()));
    }
    let n1 = h1.norm();
    let n2 = h2.norm();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(ClusteringError::ZeroVector);
    }
    Ok(Correlation((h1.dotc(h2).norm() / (n1 * n2)).clamp(0.0, 1.0)))
}

/// A partition of one base station's users into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster index of every user.
    pub membership: Vec<usize>,
    /// Representative channel of every cluster.
    pub heads: Vec<CVector>,
    pub cluster_sizes: Vec<usize>,
    pub iterations_used: usize,
    /// Clustering MSE after each iteration.
    pub mse_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.heads.len()
    }

    /// User indices of cluster `n`, ascending.
    pub fn members(&self, n: usize) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m == n)
            .map(|(u, _)| u)
            .collect()
    }
}

fn check_counts(channels: &[CVector], n_clusters: usize) -> Result<(), ClusteringError> {
    if n_clusters == 0 || channels.len() < n_clusters {
        return Err(ClusteringError::TooFewUsers {
            users: channels.len(),
            clusters: n_clusters,
        });
    }
    Ok(())
}

fn sizes(membership: &[usize], n_clusters: usize) -> Vec<usize> {
    let mut sizes = vec![0; n_clusters];
    for &m in membership {
        sizes[m] += 1;
    }
    sizes
}

/// Farthest-point initialization: a random first head, then repeatedly the
/// unselected user with the smallest summed correlation to the heads so far.
/// Returns the selected user indices.
pub fn init_heads_enhanced(channels: &[CVector], n_clusters: usize, seed: u64) -> Result<Vec<usize>, ClusteringError> {
    check_counts(channels, n_clusters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = vec![rng.gen_range(0..channels.len())];
    let mut score = vec![0.0; channels.len()];
    while selected.len() < n_clusters {
        let last = &channels[*selected.last().unwrap()];
        for (u, h) in channels.iter().enumerate() {
            score[u] += correlation(h, last)?.value();
        }
        let mut best: Option<usize> = None;
        for u in 0..channels.len() {
            if selected.contains(&u) {
                continue;
            }
            if best.is_none_or(|b| score[u] < score[b]) {
                best = Some(u);
            }
        }
        selected.push(best.expect("more users than heads"));
    }
    Ok(selected)
}

/// Assigns each user to the head it is most correlated with; ties go to the
/// lowest cluster index.
pub fn assign_users(channels: &[CVector], heads: &[CVector]) -> Result<Vec<usize>, ClusteringError> {
    channels
        .iter()
        .map(|h| {
            let mut best = 0;
            let mut best_corr = f64::NEG_INFINITY;
            for (n, head) in heads.iter().enumerate() {
                let c = correlation(h, head)?.value();
                if c > best_corr {
                    best = n;
                    best_corr = c;
                }
            }
            Ok(best)
        })
        .collect()
}

fn mean_of(channels: &[CVector], users: impl Iterator<Item = usize>) -> Option<CVector> {
    let mut sum: Option<CVector> = None;
    let mut count = 0usize;
    for u in users {
        count += 1;
        match sum.as_mut() {
            Some(s) => *s += &channels[u],
            None => sum = Some(channels[u].clone()),
        }
    }
    sum.map(|s| s.unscale(count as f64))
}

fn is_degenerate(head: &CVector, channels: &[CVector], members: &[usize]) -> bool {
    let scale = members.iter().map(|&u| channels[u].norm()).fold(0.0, f64::max);
    head.norm() <= 1e-12 * scale
}

/// Recomputes every head as the mean of its members' channels.
///
/// A cluster that is empty, or whose mean vanishes, is reseeded with the channel
/// of the least-correlated member of the largest cluster.
pub fn update_heads(
    channels: &[CVector],
    membership: &[usize],
    n_clusters: usize,
) -> Result<Vec<CVector>, ClusteringError> {
    let members: Vec<Vec<usize>> = (0..n_clusters)
        .map(|n| (0..membership.len()).filter(|&u| membership[u] == n).collect())
        .collect();
    let mut heads: Vec<Option<CVector>> = members
        .iter()
        .map(|m| mean_of(channels, m.iter().copied()).filter(|head| !is_degenerate(head, channels, m)))
        .collect();

    for n in 0..n_clusters {
        if heads[n].is_some() {
            continue;
        }
        let mut largest = 0;
        for c in 1..n_clusters {
            if members[c].len() > members[largest].len() {
                largest = c;
            }
        }
        let pool = &members[largest];
        if pool.is_empty() {
            return Err(ClusteringError::TooFewUsers {
                users: channels.len(),
                clusters: n_clusters,
            });
        }
        let pick = match heads[largest].as_ref() {
            Some(head) => {
                let mut pick = pool[0];
                let mut lowest = f64::INFINITY;
                for &u in pool {
                    let c = correlation(&channels[u], head)?.value();
                    if c < lowest {
                        lowest = c;
                        pick = u;
                    }
                }
                pick
            }
            None => pool[0],
        };
        heads[n] = Some(channels[pick].clone());
    }
    Ok(heads.into_iter().map(|h| h.unwrap()).collect())
}

/// Mean unit-normalized squared distance between users and their cluster heads,
/// after rotating each head onto its user's phase:
/// `min_theta |h/|h| - e^{j theta} c/|c||^2 = 2 - 2 M(h, c)`.
pub fn clustering_mse(channels: &[CVector], membership: &[usize], heads: &[CVector]) -> Result<f64, ClusteringError> {
    let mut total = 0.0;
    for (h, &m) in channels.iter().zip(membership) {
        total += 2.0 - 2.0 * correlation(h, &heads[m])?.value();
    }
    Ok(total / channels.len() as f64)
}

/// Moves users into empty clusters: each empty cluster takes the least-correlated
/// member of the largest cluster. Heads are recomputed as means.
fn fill_empty_clusters(
    channels: &[CVector],
    membership: &mut [usize],
    heads: &mut [CVector],
) -> Result<(), ClusteringError> {
    let n_clusters = heads.len();
    loop {
        let counts = sizes(membership, n_clusters);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return Ok(());
        };
        let largest = (0..n_clusters).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
        let mut pick = None;
        let mut lowest = f64::INFINITY;
        for (u, &m) in membership.iter().enumerate() {
            if m != largest {
                continue;
            }
            let c = correlation(&channels[u], &heads[largest])
                .map(|c| c.value())
                .unwrap_or(0.0);
            if c < lowest {
                lowest = c;
                pick = Some(u);
            }
        }
        let u = pick.ok_or(ClusteringError::TooFewUsers {
            users: channels.len(),
            clusters: n_clusters,
        })?;
        membership[u] = empty;
        let refreshed = update_heads(channels, membership, n_clusters)?;
        heads.clone_from_slice(&refreshed);
    }
}

/// Lloyd iterations from the given heads.
///
/// `prior` is the membership the heads came from, if any; with a converged
/// prior the loop stops after one iteration.
pub fn refine(
    channels: &[CVector],
    mut heads: Vec<CVector>,
    prior: Option<&[usize]>,
    max_iter: usize,
) -> Result<ClusterAssignment, ClusteringError> {
    if max_iter == 0 {
        return Err(ClusteringError::NoIterations);
    }
    let n_clusters = heads.len();
    check_counts(channels, n_clusters)?;
    let mut membership: Option<Vec<usize>> = prior.map(<[usize]>::to_vec);
    let mut mse_trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let assigned = assign_users(channels, &heads)?;
        let changed = membership.as_deref() != Some(assigned.as_slice());
        heads = update_heads(channels, &assigned, n_clusters)?;
        mse_trace.push(clustering_mse(channels, &assigned, &heads)?);
        membership = Some(assigned);
        if !changed {
            break;
        }
    }
    let mut membership = membership.expect("at least one iteration ran");
    if sizes(&membership, n_clusters).contains(&0) {
        fill_empty_clusters(channels, &mut membership, &mut heads)?;
        if let Some(last) = mse_trace.last_mut() {
            *last = clustering_mse(channels, &membership, &heads)?;
        }
    }
    Ok(ClusterAssignment {
        cluster_sizes: sizes(&membership, n_clusters),
        membership,
        heads,
        iterations_used: iterations,
        mse_trace,
    })
}

/// Enhanced K-means: farthest-point initialization followed by Lloyd iterations.
pub fn enhanced_kmeans(
    channels: &[CVector],
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment, ClusteringError> {
    let init = init_heads_enhanced(channels, n_clusters, seed)?;
    let heads = init.iter().map(|&u| channels[u].clone()).collect();
    refine(channels, heads, None, max_iter)
}

/// Plain K-means with uniformly random distinct users as initial heads.
pub fn kmeans_baseline(
    channels: &[CVector],
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment, ClusteringError> {
    check_counts(channels, n_clusters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = rand::seq::index::sample(&mut rng, channels.len(), n_clusters)
        .into_iter()
        .map(|u| channels[u].clone())
        .collect();
    refine(channels, heads, None, max_iter)
}

/// Cluster-head selection: the strongest users become fixed heads and every
/// user is assigned once.
pub fn chs_baseline(channels: &[CVector], n_clusters: usize) -> Result<ClusterAssignment, ClusteringError> {
    check_counts(channels, n_clusters)?;
    let mut by_norm: Vec<usize> = (0..channels.len()).collect();
    by_norm.sort_by(|&a, &b| channels[b].norm().total_cmp(&channels[a].norm()).then(a.cmp(&b)));
    let heads: Vec<CVector> = by_norm[..n_clusters].iter().map(|&u| channels[u].clone()).collect();
    let mut membership = assign_users(channels, &heads)?;
    // Heads are users themselves; a head can only lose its own cluster to an
    // identical, lower-indexed head.
    for (n, &u) in by_norm[..n_clusters].iter().enumerate() {
        if !membership.contains(&n) {
            membership[u] = n;
        }
    }
    let mse = clustering_mse(channels, &membership, &heads)?;
    Ok(ClusterAssignment {
        cluster_sizes: sizes(&membership, n_clusters),
        membership,
        heads,
        iterations_used: 1,
        mse_trace: vec![mse],
    })
}

/// Balanced random partition: shuffle users and deal them round-robin.
pub fn random_clustering(
    channels: &[CVector],
    n_clusters: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusteringError> {
    check_counts(channels, n_clusters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..channels.len()).collect();
    order.shuffle(&mut rng);
    let mut membership = vec![0; channels.len()];
    for (slot, &u) in order.iter().enumerate() {
        membership[u] = slot % n_clusters;
    }
    let heads = update_heads(channels, &membership, n_clusters)?;
    let mse = clustering_mse(channels, &membership, &heads)?;
    Ok(ClusterAssignment {
        cluster_sizes: sizes(&membership, n_clusters),
        membership,
        heads,
        iterations_used: 0,
        mse_trace: vec![mse],
    })
}
