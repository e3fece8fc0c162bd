//! Fuzzy C-Means clustering of calibration datasets.
//!
//! Alternating optimization of
//! `J(W, V) = sum_k sum_j w_kj^m * ||x_j - v_k||^2`
//! starting from a seeded random membership matrix, followed by
//! cluster-count selection with the partition coefficient and the
//! "most uncertain instance" pick used to build the calibration matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::{validate_distribution, RegisterSpec};
use crate::rng::{StreamSeed, TAG_FCM_INIT};

/// Distances below this are treated as a point sitting on a centroid.
pub const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcmConfig {
    /// Fuzzifier `m > 1`.
    #[serde(rename = "m", default = "default_m")]
    pub fuzzifier: f64,
    #[serde(rename = "maxiter", default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop once no membership moves by `phi` or more between iterations.
    #[serde(rename = "phi", default = "default_phi")]
    pub tolerance: f64,
    #[serde(default = "default_candidates")]
    pub c_candidates: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_m() -> f64 {
    2.0
}
fn default_max_iter() -> usize {
    10
}
fn default_phi() -> f64 {
    0.005
}
fn default_candidates() -> Vec<usize> {
    vec![2, 3, 4]
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            fuzzifier: default_m(),
            max_iter: default_max_iter(),
            tolerance: default_phi(),
            c_candidates: default_candidates(),
            seed: 0,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fuzzifier > 1.0 && self.fuzzifier.is_finite()) {
            return Err(Error::InvalidFcmConfig(format!("fuzzifier {} must exceed 1", self.fuzzifier)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidFcmConfig("maxiter must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidFcmConfig(format!("phi {} must be positive", self.tolerance)));
        }
        if self.c_candidates.is_empty() {
            return Err(Error::InvalidFcmConfig("no cluster-count candidates".into()));
        }
        if let Some(c) = self.c_candidates.iter().find(|&&c| c < 2) {
            return Err(Error::InvalidFcmConfig(format!("cluster count {c} is below 2")));
        }
        Ok(())
    }

    pub fn max_candidate(&self) -> usize {
        self.c_candidates.iter().copied().max().unwrap_or(0)
    }
}

/// Repeated experiments after preparing one basis state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    register: RegisterSpec,
    basis_index: usize,
    basis_state: String,
    instances: Vec<Vec<f64>>,
    experiment_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        register: RegisterSpec,
        basis_index: usize,
        instances: Vec<Vec<f64>>,
        experiment_ids: Vec<String>,
    ) -> Result<Self> {
        if basis_index >= register.dimension() {
            return Err(Error::InvalidBasisState(basis_index.to_string()));
        }
        if instances.is_empty() {
            return Err(Error::InvalidProbability("dataset has no instances".into()));
        }
        if experiment_ids.len() != instances.len() {
            return Err(Error::Import("one experiment id per instance required".into()));
        }
        for x in &instances {
            register.check_len(x.len())?;
            validate_distribution(x)?;
        }
        let basis_state = register.basis_label(basis_index);
        Ok(Self { register, basis_index, basis_state, instances, experiment_ids })
    }

    pub fn register(&self) -> &RegisterSpec {
        &self.register
    }

    pub fn basis_index(&self) -> usize {
        self.basis_index
    }

    pub fn basis_state(&self) -> &str {
        &self.basis_state
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    pub fn experiment_ids(&self) -> &[String] {
        &self.experiment_ids
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Result of one FCM run: memberships `w[k][j]` (cluster `k`, instance `j`)
/// and centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    pub memberships: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub fpc: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective after each membership update.
    pub cost_history: Vec<f64>,
}

impl FuzzyPartition {
    pub fn clusters(&self) -> usize {
        self.memberships.len()
    }

    pub fn instances(&self) -> usize {
        self.memberships.first().map_or(0, Vec::len)
    }

    /// Membership column of instance `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.memberships.iter().map(|row| row[j]).collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Membership of one point in each cluster for fixed centroids.
///
/// A point on one or more centroids (distance below [`COINCIDENCE_EPS`])
/// splits its membership equally among those centroids.
pub fn memberships_for(point: &[f64], centroids: &[Vec<f64>], fuzzifier: f64) -> Vec<f64> {
    let d2: Vec<f64> = centroids.iter().map(|v| squared_distance(point, v)).collect();
    let coincident: Vec<bool> = d2.iter().map(|&d| d.sqrt() < COINCIDENCE_EPS).collect();
    let hits = coincident.iter().filter(|&&c| c).count();
    if hits > 0 {
        let share = 1.0 / hits as f64;
        return coincident.iter().map(|&c| if c { share } else { 0.0 }).collect();
    }
    // w_k = d_k^(-2/(m-1)) / sum_l d_l^(-2/(m-1)), written on squared distances.
    let exponent = -1.0 / (fuzzifier - 1.0);
    let weights: Vec<f64> = d2.iter().map(|&d| d.powf(exponent)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn update_centroids(points: &[Vec<f64>], w: &[Vec<f64>], fuzzifier: f64) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    w.iter()
        .map(|row| {
            let mut v = vec![0.0; dim];
            let mut norm = 0.0;
            for (x, &wkj) in points.iter().zip(row) {
                let weight = wkj.powf(fuzzifier);
                norm += weight;
                for (vi, xi) in v.iter_mut().zip(x) {
                    *vi += weight * xi;
                }
            }
            if norm > 0.0 {
                v.iter_mut().for_each(|vi| *vi /= norm);
            }
            v
        })
        .collect()
}

fn update_memberships(points: &[Vec<f64>], centroids: &[Vec<f64>], fuzzifier: f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; points.len()]; centroids.len()];
    for (j, x) in points.iter().enumerate() {
        for (k, u) in memberships_for(x, centroids, fuzzifier).into_iter().enumerate() {
            w[k][j] = u;
        }
    }
    w
}

/// The FCM objective `J(W, V)`.
pub fn objective(points: &[Vec<f64>], w: &[Vec<f64>], centroids: &[Vec<f64>], fuzzifier: f64) -> f64 {
    w.iter()
        .zip(centroids)
        .map(|(row, v)| {
            row.iter()
                .zip(points)
                .map(|(wkj, x)| wkj.powf(fuzzifier) * squared_distance(x, v))
                .sum::<f64>()
        })
        .sum()
}

/// Seeded initial memberships: uniform entries, each column normalized.
#[allow(clippy::needless_range_loop)]
pub fn initial_memberships(t: usize, c: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StreamSeed::new(seed).child(TAG_FCM_INIT, c as u64).rng();
    let mut w = vec![vec![0.0; t]; c];
    for j in 0..t {
        let col: Vec<f64> = (0..c).map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = col.iter().sum();
        for (k, x) in col.into_iter().enumerate() {
            w[k][j] = x / total;
        }
    }
    w
}

/// Runs FCM with `c` clusters, initialized from `cfg.seed`.
pub fn fcm_cluster(data: &Dataset, c: usize, cfg: &FcmConfig) -> Result<FuzzyPartition> {
    check_cluster_count(data.len(), c)?;
    let w0 = initial_memberships(data.len(), c, cfg.seed);
    fcm_from_memberships(data.instances(), w0, cfg)
}

fn check_cluster_count(t: usize, c: usize) -> Result<()> {
    if c > t {
        return Err(Error::MoreClustersThanInstances { clusters: c, instances: t });
    }
    if c < 2 {
        return Err(Error::InvalidFcmConfig(format!("cluster count {c} is below 2")));
    }
    Ok(())
}

/// Runs FCM from an explicit initial membership matrix (`c` rows, `t` columns).
///
/// Each iteration updates the centroids from the current memberships, then
/// the memberships from the new centroids. Iteration stops when the largest
/// entry-wise membership change is below `cfg.tolerance` or after
/// `cfg.max_iter` iterations; the last iterate is returned either way.
pub fn fcm_from_memberships(points: &[Vec<f64>], initial: Vec<Vec<f64>>, cfg: &FcmConfig) -> Result<FuzzyPartition> {
    cfg.validate()?;
    let c = initial.len();
    check_cluster_count(points.len(), c)?;
    if initial.iter().any(|row| row.len() != points.len()) {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: initial.iter().map(Vec::len).find(|&l| l != points.len()).unwrap_or(0),
        });
    }

    let m = cfg.fuzzifier;
    let mut w = initial;
    let mut centroids = Vec::new();
    let mut cost_history = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;
    let mut iterations_used = 0;
    for _ in 0..cfg.max_iter {
        iterations_used += 1;
        centroids = update_centroids(points, &w, m);
        let next = update_memberships(points, &centroids, m);
        let delta = next
            .iter()
            .flatten()
            .zip(w.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        cost_history.push(objective(points, &w, &centroids, m));
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let fpc = partition_coefficient(&w);
    Ok(FuzzyPartition { memberships: w, centroids, fpc, iterations_used, converged, cost_history })
}

fn partition_coefficient(w: &[Vec<f64>]) -> f64 {
    let t = w.first().map_or(0, Vec::len);
    if t == 0 {
        return 0.0;
    }
    w.iter().flatten().map(|x| x * x).sum::<f64>() / t as f64
}

/// Fuzzy partition coefficient `(1/t) * sum w_kj^2`, in `[1/C, 1]`.
pub fn fpc(partition: &FuzzyPartition) -> f64 {
    partition_coefficient(&partition.memberships)
}

/// Clusters with every candidate count and keeps the partition with the
/// highest coefficient; ties go to the smaller count.
pub fn select_best_c(data: &Dataset, cfg: &FcmConfig) -> Result<FuzzyPartition> {
    cfg.validate()?;
    let mut best: Option<(usize, FuzzyPartition)> = None;
    for &c in &cfg.c_candidates {
        let p = fcm_cluster(data, c, cfg)?;
        let better = match &best {
            None => true,
            Some((best_c, best_p)) => p.fpc > best_p.fpc || (p.fpc == best_p.fpc && c < *best_c),
        };
        if better {
            best = Some((c, p));
        }
    }
    Ok(best.expect("candidates validated non-empty").1)
}

/// Shannon entropy (bits) of a membership column.
pub fn membership_entropy(column: &[f64]) -> f64 {
    column.iter().filter(|&&w| w > 0.0).map(|&w| -w * w.log2()).sum()
}

/// Instance whose memberships are spread most evenly across clusters
/// (largest entropy); ties go to the smaller index.
pub fn most_uncertain_instance(partition: &FuzzyPartition) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..partition.instances() {
        let h = membership_entropy(&partition.column(j));
        if h > best.1 {
            best = (j, h);
        }
    }
    best.0
}
