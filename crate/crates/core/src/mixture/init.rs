use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::MixtureState;
use crate::error::{Error, Result};
use crate::langevin::{fit_from_mean, invert_h, MlParams, H_SOLVE_TOL};
use crate::stiefel::{svd_sorted, unique_svd, StiefelPoint};

/// Points used by the hierarchical step; the rest are assigned to the
/// nearest cluster mean.
pub const LINKAGE_SUBSAMPLE: usize = 2000;

/// Average-linkage agglomerative clustering (nearest-neighbor chain) on
/// the chordal distance `||X_i - X_j||_F`, cut into `k` clusters.
/// Labels are `0..k` in order of first appearance.
pub fn average_linkage(points: &[&DMatrix<f64>], k: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot cut {n} points into {k} clusters")));
    }
    let idx = |i: usize, j: usize| if i < j { i * n + j } else { j * n + i };
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            dist[i * n + j] = (points[i] - points[j]).norm();
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();
    let mut remaining = n;
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        let a = *chain.last().unwrap();
        let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
        // nearest active neighbour; ties go to the previous chain element
        let mut best = prev;
        let mut best_d = prev.map_or(f64::INFINITY, |b| dist[idx(a, b)]);
        for b in 0..n {
            if active[b] && b != a && dist[idx(a, b)] < best_d {
                best_d = dist[idx(a, b)];
                best = Some(b);
            }
        }
        let b = best.unwrap();
        if Some(b) == prev {
            chain.pop();
            chain.pop();
            let (keep, gone) = (a.min(b), a.max(b));
            merges.push((keep, gone, best_d));
            let (sa, sb) = (size[keep] as f64, size[gone] as f64);
            for o in 0..n {
                if active[o] && o != keep && o != gone {
                    dist[idx(keep, o)] = (sa * dist[idx(keep, o)] + sb * dist[idx(gone, o)]) / (sa + sb);
                }
            }
            size[keep] += size[gone];
            active[gone] = false;
            remaining -= 1;
        } else {
            chain.push(b);
        }
    }
    // replay the n - k lowest merges
    merges.sort_by(|x, y| x.2.total_cmp(&y.2));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b, _) in merges.iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[rb] = ra;
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(&mut parent, i);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels.push(ids[r]);
    }
    Ok(labels)
}

/// Initial state: hierarchical clustering of a subsample, nearest-mean
/// assignment of the rest, random splits of the largest cluster until every
/// cluster has two points, then per-cluster point fits.
pub fn init_state<R: Rng + ?Sized>(data: &[StiefelPoint], c: usize, rng: &mut R) -> Result<MixtureState> {
    if c == 0 {
        return Err(Error::Config("at least one component is required".into()));
    }
    if data.len() < 2 * c {
        return Err(Error::InsufficientSamples { needed: 2 * c, got: data.len() });
    }
    let n_obs = data.len();
    let sub: Vec<usize> = if n_obs > LINKAGE_SUBSAMPLE {
        let mut all: Vec<usize> = (0..n_obs).collect();
        all.shuffle(rng);
        all.truncate(LINKAGE_SUBSAMPLE);
        all
    } else {
        (0..n_obs).collect()
    };
    let pts: Vec<&DMatrix<f64>> = sub.iter().map(|&i| data[i].matrix()).collect();
    let sub_labels = average_linkage(&pts, c)?;

    let mut z = vec![usize::MAX; n_obs];
    for (&i, &l) in sub.iter().zip(&sub_labels) {
        z[i] = l;
    }
    if sub.len() < n_obs {
        let means = cluster_means(data, &z, c);
        for (i, zi) in z.iter_mut().enumerate() {
            if *zi == usize::MAX {
                let x = data[i].matrix();
                *zi = (0..c)
                    .min_by(|&a, &b| (x - &means[a]).norm_squared().total_cmp(&(x - &means[b]).norm_squared()))
                    .unwrap();
            }
        }
    }

    loop {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
        for (i, &k) in z.iter().enumerate() {
            members[k].push(i);
        }
        let Some(small) = (0..c).find(|&k| members[k].len() < 2) else { break };
        let largest = (0..c).max_by_key(|&k| members[k].len()).unwrap();
        let mut donor = members[largest].clone();
        donor.shuffle(rng);
        for &i in donor.iter().take(donor.len() / 2) {
            z[i] = small;
        }
    }

    let means = cluster_means(data, &z, c);
    let mut counts = vec![0usize; c];
    for &k in &z {
        counts[k] += 1;
    }
    let theta = means.iter().map(|m| robust_fit(m, rng)).collect::<Result<Vec<_>>>()?;
    let pi = counts.iter().map(|&k| k as f64 / n_obs as f64).collect();
    Ok(MixtureState { theta, pi, z })
}

fn cluster_means(data: &[StiefelPoint], z: &[usize], c: usize) -> Vec<DMatrix<f64>> {
    let (n, p) = data[0].matrix().shape();
    let mut sums = vec![DMatrix::<f64>::zeros(n, p); c];
    let mut counts = vec![0usize; c];
    for (x, &k) in data.iter().zip(z) {
        if k < c {
            sums[k] += x.matrix();
            counts[k] += 1;
        }
    }
    for (s, &k) in sums.iter_mut().zip(&counts) {
        if k > 0 {
            *s /= k as f64;
        }
    }
    sums
}

/// Point fit from a cluster mean. Clusters whose mean sits on the
/// boundary (identical points) or has tied singular values get their
/// singular values pulled into `[1e-3, 0.999]` and separated first.
pub(crate) fn robust_fit<R: Rng + ?Sized>(mean: &DMatrix<f64>, rng: &mut R) -> Result<MlParams> {
    if let Ok(fit) = fit_from_mean(mean, None) {
        return Ok(fit);
    }
    let (n, p) = mean.shape();
    let mut target = mean.clone();
    if svd_sorted(&target).1.iter().all(|s| *s < 1e-9) {
        // no direction at all: any frame will do
        target = crate::stiefel::haar_sample(n, p, rng).into_matrix();
    }
    let (u, s, v) = svd_sorted(&target);
    let mut t: Vec<f64> = s.iter().map(|x| x.clamp(1e-3, 0.999)).collect();
    for j in 1..p {
        if t[j] > t[j - 1] - 1e-3 {
            t[j] = t[j - 1] - 1e-3;
        }
    }
    let scaled = crate::stiefel::compose(&u, &t, &v);
    let svd = unique_svd(&scaled)?;
    let d = invert_h(n, &svd.d, None, H_SOLVE_TOL)?;
    MlParams::new(svd.m, d, svd.v)
}
