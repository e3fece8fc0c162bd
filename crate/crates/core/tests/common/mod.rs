//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Textbook FCM with the distance-ratio membership formula, memberships
/// stored instance-major.
pub struct OracleFcm {
    pub memberships: Vec<Vec<f64>>, // [instance][cluster]
    pub costs: Vec<f64>,
}

pub fn oracle_fcm(points: &[Vec<f64>], init: &[Vec<f64>], m: f64, max_iter: usize, phi: f64) -> OracleFcm {
    let t = points.len();
    let c = init.len();
    let dim = points[0].len();
    let mut u: Vec<Vec<f64>> = (0..t).map(|j| (0..c).map(|k| init[k][j]).collect()).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut costs = Vec::new();
    for _ in 0..max_iter {
        let mut v = vec![vec![0.0; dim]; c];
        for (k, vk) in v.iter_mut().enumerate() {
            let mut den = 0.0;
            for j in 0..t {
                let w = u[j][k].powf(m);
                den += w;
                for (x, p) in vk.iter_mut().zip(&points[j]) {
                    *x += w * p;
                }
            }
            vk.iter_mut().for_each(|x| *x /= den);
        }
        let mut next = vec![vec![0.0; c]; t];
        for j in 0..t {
            let d: Vec<f64> = v.iter().map(|vk| dist(&points[j], vk)).collect();
            let on_centroid = d.iter().filter(|&&x| x < 1e-12).count();
            for k in 0..c {
                next[j][k] = if on_centroid > 0 {
                    // Equal split among the centroids the point sits on.
                    if d[k] < 1e-12 { 1.0 / on_centroid as f64 } else { 0.0 }
                } else {
                    1.0 / (0..c).map(|l| (d[k] / d[l]).powf(2.0 / (m - 1.0))).sum::<f64>()
                };
            }
        }
        let delta = (0..t).flat_map(|j| (0..c).map(move |k| (j, k))).map(|(j, k)| (next[j][k] - u[j][k]).abs()).fold(0.0, f64::max);
        u = next;
        let cost: f64 = (0..t)
            .map(|j| (0..c).map(|k| u[j][k].powf(m) * dist(&points[j], &v[k]).powi(2)).sum::<f64>())
            .sum();
        costs.push(cost);
        if delta < phi {
            break;
        }
    }
    OracleFcm { memberships: u, costs }
}

pub fn random_simplex_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn noisy_around(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sigma).unwrap();
    let v: Vec<f64> = center.iter().map(|c| (c + n.sample(rng)).max(1e-6)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn planted(rng: &mut ChaCha8Rng, t: usize, centers: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    (0..t)
        .map(|j| {
            // Every cluster gets at least one point; the rest are random.
            let k = if j < centers.len() { j } else { rng.random_range(0..centers.len()) };
            noisy_around(rng, &centers[k], sigma)
        })
        .collect()
}

/// Brute-force fuzzy step: every candidate count from the shared seeded
/// initialization, best partition coefficient (ties to the smaller count),
/// then the instance with the largest membership entropy (ties to the
/// smaller index).
pub fn oracle_selected_index(points: &[Vec<f64>], candidates: &[usize], seed: u64, m: f64, max_iter: usize, phi: f64) -> (usize, usize) {
    let mut best: Option<(usize, f64, Vec<Vec<f64>>)> = None;
    for &c in candidates {
        let init = fcmqem::fcm::initial_memberships(points.len(), c, seed);
        let u = oracle_fcm(points, &init, m, max_iter, phi).memberships;
        let coefficient = u.iter().flatten().map(|w| w * w).sum::<f64>() / points.len() as f64;
        if best.as_ref().is_none_or(|b| coefficient > b.1) {
            best = Some((c, coefficient, u));
        }
    }
    let (c, _, u) = best.unwrap();
    let entropy = |row: &Vec<f64>| row.iter().filter(|&&w| w > 0.0).map(|&w| -w * w.log2()).sum::<f64>();
    let mut pick = 0;
    for j in 1..u.len() {
        if entropy(&u[j]) > entropy(&u[pick]) {
            pick = j;
        }
    }
    (c, pick)
}
