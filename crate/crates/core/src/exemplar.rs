//! Exemplar selection: k-means++ seeding, Lloyd refinement and a two-threshold
//! drift classifier over feature vectors.
//!
//! Serialized model (`SKMN`), little-endian:
//!
//! ```text
//! "SKMN" | version u8 | k u32 | dims u32 | centers (k*dims f64) | tau1 f64 | tau2 f64
//! ```

use crate::rng::SplitMix64;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"SKMN";
const VERSION: u8 = 1;
const MIN_TAU: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExemplarError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("decode error: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriftCase {
    Known,
    Drifted,
    Novel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CenterStats {
    pub count: usize,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centers: Vec<Vec<f64>>,
    tau1: f64,
    tau2: f64,
    /// Per-center statistics from the clustering run. Not persisted; a
    /// deserialized model carries zeroed stats.
    pub stats: Vec<CenterStats>,
    /// Cost of the initial centers, then after each iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Index and squared distance of the nearest center, lowest index on ties.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, ExemplarError> {
    let dims = points
        .first()
        .ok_or_else(|| ExemplarError::InvalidInput("no points".into()))?
        .len();
    if dims == 0 {
        return Err(ExemplarError::InvalidInput("zero-dimensional points".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dims {
            return Err(ExemplarError::InvalidInput(format!(
                "point {i} has {} components, expected {dims}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ExemplarError::InvalidInput(format!("point {i} is not finite")));
        }
    }
    Ok(dims)
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center the next center is drawn uniformly.
pub fn kmeanspp_seed(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>, ExemplarError> {
    check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(ExemplarError::InvalidInput(format!(
            "k = {k} with {} points",
            points.len()
        )));
    }
    let mut g = SplitMix64::stream(seed, "kmeanspp");
    let n = points.len() as u64;
    let mut centers = vec![points[g.next_below(n) as usize].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = g.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > r {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass"))
        } else {
            g.next_below(n) as usize
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Sum of squared nearest-center distances.
pub fn clustering_cost(points: &[Vec<f64>], centers: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| nearest(p, centers).1).sum()
}

/// Lloyd iterations from `init_centers` until no center moves by `tol` or
/// more, or `max_iter` iterations have run. An emptied cluster is moved onto
/// the point farthest from its current center.
pub fn kmeans_cluster(
    points: &[Vec<f64>],
    init_centers: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<ClusterModel, ExemplarError> {
    let dims = check_points(points)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(ExemplarError::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if init_centers.is_empty() || init_centers.iter().any(|c| c.len() != dims || c.iter().any(|v| !v.is_finite())) {
        return Err(ExemplarError::InvalidInput("initial centers do not match the points".into()));
    }
    let k = init_centers.len();
    let mut centers = init_centers.to_vec();
    let mut cost_trace = vec![clustering_cost(points, &centers)];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let assign: Vec<(usize, f64)> = points.iter().map(|p| nearest(p, &centers)).collect();
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = vec![false; points.len()];
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                next.push(sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<f64>>());
            } else {
                let far = (0..points.len())
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if assign[b].1 >= assign[i].1 => Some(b),
                        _ => Some(i),
                    });
                match far {
                    Some(i) => {
                        taken[i] = true;
                        next.push(points[i].clone());
                    }
                    None => next.push(centers[c].clone()),
                }
            }
        }
        let movement = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max);
        centers = next;
        cost_trace.push(clustering_cost(points, &centers));
        if movement < tol {
            break;
        }
    }
    let mut model = ClusterModel {
        centers,
        tau1: MIN_TAU,
        tau2: 2.0 * MIN_TAU,
        stats: Vec::new(),
        cost_trace,
        iterations,
    };
    model.refresh_stats(points);
    Ok(model)
}

impl ClusterModel {
    /// Builds a model from explicit centers and thresholds.
    pub fn new(centers: Vec<Vec<f64>>, tau1: f64, tau2: f64) -> Result<Self, ExemplarError> {
        let dims = centers.first().map_or(0, Vec::len);
        if dims == 0 || centers.iter().any(|c| c.len() != dims || c.iter().any(|v| !v.is_finite())) {
            return Err(ExemplarError::InvalidInput("centers must be non-empty, finite and equally sized".into()));
        }
        let mut m = Self {
            stats: vec![CenterStats::default(); centers.len()],
            centers,
            tau1: MIN_TAU,
            tau2: 2.0 * MIN_TAU,
            cost_trace: Vec::new(),
            iterations: 0,
        };
        m.set_thresholds(tau1, tau2)?;
        Ok(m)
    }

    /// Recomputes per-center stats and the default thresholds
    /// (`mean + 2 std`, `mean + 4 std` of nearest-center distances).
    fn refresh_stats(&mut self, points: &[Vec<f64>]) {
        let mut stats = vec![CenterStats::default(); self.centers.len()];
        let dists: Vec<f64> = points
            .iter()
            .map(|p| {
                let (c, d2) = nearest(p, &self.centers);
                let d = d2.sqrt();
                stats[c].count += 1;
                stats[c].mean_distance += d;
                d
            })
            .collect();
        for s in &mut stats {
            if s.count > 0 {
                s.mean_distance /= s.count as f64;
            }
        }
        self.stats = stats;
        let n = dists.len() as f64;
        let mean = dists.iter().sum::<f64>() / n;
        let std = (dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        let tau1 = (mean + 2.0 * std).max(MIN_TAU);
        let tau2 = (mean + 4.0 * std).max(2.0 * tau1);
        self.tau1 = tau1;
        self.tau2 = tau2;
    }

    pub fn set_thresholds(&mut self, tau1: f64, tau2: f64) -> Result<(), ExemplarError> {
        if !(tau1 > 0.0 && tau1 < tau2 && tau2.is_finite()) {
            return Err(ExemplarError::InvalidInput(format!(
                "thresholds must satisfy 0 < tau1 < tau2, got {tau1}, {tau2}"
            )));
        }
        self.tau1 = tau1;
        self.tau2 = tau2;
        Ok(())
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dims(&self) -> usize {
        self.centers[0].len()
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn cost(&self, points: &[Vec<f64>]) -> f64 {
        clustering_cost(points, &self.centers)
    }

    /// Nearest center index (lowest on ties) and Euclidean distance.
    pub fn nearest(&self, f: &[f64]) -> (usize, f64) {
        let (i, d2) = nearest(f, &self.centers);
        (i, d2.sqrt())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * (self.k() * self.dims() + 2));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims() as u32).to_le_bytes());
        for v in self.centers.iter().flatten().chain([&self.tau1, &self.tau2]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExemplarError> {
        let err = |m: &str| ExemplarError::Decode(m.to_string());
        if bytes.len() < 13 {
            return Err(err("truncated header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(err("bad magic"));
        }
        if bytes[4] != VERSION {
            return Err(err("unsupported version"));
        }
        let k = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let dims = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if k == 0 || dims == 0 {
            return Err(err("empty model"));
        }
        let expected = k
            .checked_mul(dims)
            .and_then(|n| n.checked_add(2))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(13))
            .ok_or_else(|| err("model size overflow"))?;
        if bytes.len() != expected {
            return Err(err("length does not match k and dims"));
        }
        let values: Vec<f64> = bytes[13..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (centers, taus) = values.split_at(k * dims);
        Self::new(centers.chunks(dims).map(<[f64]>::to_vec).collect(), taus[0], taus[1])
            .map_err(|e| ExemplarError::Decode(e.to_string()))
    }
}

pub fn classify_drift(f: &[f64], m: &ClusterModel) -> DriftCase {
    let (_, d) = m.nearest(f);
    if d <= m.tau1 {
        DriftCase::Known
    } else if d <= m.tau2 {
        DriftCase::Drifted
    } else {
        DriftCase::Novel
    }
}

/// Indices of items classified Drifted or Novel, in input order.
pub fn select_exemplars(features: &[Vec<f64>], m: &ClusterModel) -> Vec<usize> {
    features
        .iter()
        .enumerate()
        .filter(|(_, f)| classify_drift(f, m) != DriftCase::Known)
        .map(|(i, _)| i)
        .collect()
}

/// Moves single points between clusters while a move lowers the total
/// cost, taking the shift of both means into account. Returns the means of
/// the resulting partition.
fn hartigan_refine(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = centers.len();
    let dims = points[0].len();
    let mut label: Vec<usize> = points.iter().map(|p| nearest(p, centers).0).collect();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; dims]; k];
    for (p, &l) in points.iter().zip(&label) {
        counts[l] += 1;
        sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    if counts.contains(&0) {
        return centers.to_vec();
    }
    let mean = |sums: &[Vec<f64>], counts: &[usize], c: usize| -> Vec<f64> {
        sums[c].iter().map(|s| s / counts[c] as f64).collect()
    };
    for _ in 0..100 * points.len() {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = label[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let gain = na / (na - 1.0) * squared_distance(p, &mean(&sums, &counts, a));
            let mut best: Option<(usize, f64)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let cost = nb / (nb + 1.0) * squared_distance(p, &mean(&sums, &counts, b));
                if cost < gain * (1.0 - 1e-12) && best.is_none_or(|(_, c)| cost < c) {
                    best = Some((b, cost));
                }
            }
            if let Some((b, _)) = best {
                counts[a] -= 1;
                counts[b] += 1;
                for d in 0..dims {
                    sums[a][d] -= p[d];
                    sums[b][d] += p[d];
                }
                label[i] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    (0..k).map(|c| mean(&sums, &counts, c)).collect()
}

/// Best of `restarts` seeded k-means++ plus Lloyd runs, by final cost. Each
/// Lloyd solution is polished with single-point moves and Lloyd is rerun from
/// the polished centers.
pub fn fit(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<ClusterModel, ExemplarError> {
    let mut best: Option<(f64, ClusterModel)> = None;
    for r in 0..restarts.max(1) {
        let init = kmeanspp_seed(points, k, seed.wrapping_add(r as u64))?;
        let m = kmeans_cluster(points, &init, tol, max_iter)?;
        let polished = hartigan_refine(points, m.centers());
        let m = kmeans_cluster(points, &polished, tol, max_iter)?;
        let cost = m.cost(points);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, m));
        }
    }
    Ok(best.expect("at least one restart").1)
}
