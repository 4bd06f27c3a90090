//! Latent-space clustering: PCA decorrelation, mean shift with a
//! spurious-cluster threshold, prototype decoding, and the k-means baseline
//! on engineered (mean pitch, slope) features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::Model;
use crate::error::{Error, Result};
use crate::pitch::CONTOUR_LEN;

pub type Point = [f64; 2];

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Centering plus rotation onto the principal axes (no variance scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Point,
    /// Columns are principal directions, largest variance first.
    pub rotation: [[f64; 2]; 2],
}

impl PcaTransform {
    pub fn identity() -> Self {
        Self {
            mean: [0.0, 0.0],
            rotation: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `Rᵀ (z − mean)`.
    pub fn apply(&self, z: &Point) -> Point {
        let d = [z[0] - self.mean[0], z[1] - self.mean[1]];
        let r = &self.rotation;
        [r[0][0] * d[0] + r[1][0] * d[1], r[0][1] * d[0] + r[1][1] * d[1]]
    }

    /// `R p + mean`.
    pub fn inverse(&self, p: &Point) -> Point {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + self.mean[0],
            r[1][0] * p[0] + r[1][1] * p[1] + self.mean[1],
        ]
    }
}

/// Fits PCA on `points` and returns the transform with the rotated points.
pub fn pca_fit_apply(points: &[Point]) -> Result<(PcaTransform, Vec<Point>)> {
    if points.len() < 3 {
        return Err(Error::DegenerateCovariance(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / (n - 1.0), sxy / (n - 1.0), syy / (n - 1.0));
    if !(sxx + syy > 0.0) || !(sxx + syy).is_finite() {
        return Err(Error::DegenerateCovariance("points have no spread".into()));
    }
    // Angle of the major axis of the symmetric 2×2 covariance.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, c) = theta.sin_cos();
    let mut v1 = [c, s];
    let mut v2 = [-s, c];
    // Sign convention: each direction's dominant component is positive.
    for v in [&mut v1, &mut v2] {
        let dominant = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
        if dominant < 0.0 {
            v[0] = -v[0];
            v[1] = -v[1];
        }
    }
    let pca = PcaTransform {
        mean,
        rotation: [[v1[0], v2[0]], [v1[1], v2[1]]],
    };
    let rotated = points.iter().map(|p| pca.apply(p)).collect();
    Ok((pca, rotated))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Uniform weight within `bandwidth`.
    Flat,
    /// Gaussian weight with standard deviation `bandwidth`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanShiftConfig {
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub max_iters: usize,
    pub convergence_tol: f64,
    /// Converged points closer than this share a mode; `None` means half
    /// the bandwidth.
    pub mode_merge_radius: Option<f64>,
    /// Clusters smaller than this are spurious; `None` means N/20.
    pub min_cluster_size: Option<usize>,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self {
            bandwidth: 0.6,
            kernel: Kernel::Flat,
            max_iters: 300,
            convergence_tol: 1e-6,
            mode_merge_radius: None,
            min_cluster_size: None,
        }
    }
}

impl MeanShiftConfig {
    pub fn merge_radius(&self) -> f64 {
        self.mode_merge_radius.unwrap_or(self.bandwidth / 2.0)
    }

    pub fn threshold_for(&self, n: usize) -> usize {
        self.min_cluster_size.unwrap_or(n / 20)
    }

    fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.convergence_tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Config("convergence_tol and max_iters must be positive".into()));
        }
        if !(self.merge_radius() > 0.0) {
            return Err(Error::Config("mode_merge_radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftOutput {
    pub modes: Vec<Point>,
    /// Mode index of every input point.
    pub assignments: Vec<usize>,
    /// Largest number of shift iterations any point needed.
    pub iterations: usize,
}

fn shift_point(start: Point, points: &[Point], cfg: &MeanShiftConfig) -> (Point, usize) {
    let h2 = cfg.bandwidth * cfg.bandwidth;
    let mut x = start;
    for it in 1..=cfg.max_iters {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for p in points {
            let d2 = dist2(&x, p);
            let w = match cfg.kernel {
                Kernel::Flat if d2 <= h2 => 1.0,
                Kernel::Flat => 0.0,
                Kernel::Gaussian => (-0.5 * d2 / h2).exp(),
            };
            sx += w * p[0];
            sy += w * p[1];
            sw += w;
        }
        if sw == 0.0 {
            return (x, it);
        }
        let next = [sx / sw, sy / sw];
        let moved = dist2(&next, &x).sqrt();
        x = next;
        if moved < cfg.convergence_tol {
            return (x, it);
        }
    }
    (x, cfg.max_iters)
}

/// Moves every point to the mean of its neighbourhood until it stops, then
/// merges converged positions into modes.
pub fn mean_shift(points: &[Point], cfg: &MeanShiftConfig) -> Result<MeanShiftOutput> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidClustering("mean shift needs at least one point".into()));
    }
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::InvalidClustering("non-finite latent point".into()));
    }
    let converged: Vec<(Point, usize)> = points.par_iter().map(|&p| shift_point(p, points, cfg)).collect();
    let iterations = converged.iter().map(|c| c.1).max().unwrap_or(0);

    let r2 = cfg.merge_radius().powi(2);
    let mut sums: Vec<(Point, usize)> = Vec::new();
    let mut anchors: Vec<Point> = Vec::new();
    let mut assignments = Vec::with_capacity(points.len());
    for (x, _) in &converged {
        let found = anchors.iter().position(|a| dist2(a, x) <= r2);
        let k = match found {
            Some(k) => k,
            None => {
                anchors.push(*x);
                sums.push(([0.0, 0.0], 0));
                anchors.len() - 1
            }
        };
        sums[k].0[0] += x[0];
        sums[k].0[1] += x[1];
        sums[k].1 += 1;
        assignments.push(k);
    }
    let modes = sums
        .iter()
        .map(|(s, n)| [s[0] / *n as f64, s[1] / *n as f64])
        .collect();
    Ok(MeanShiftOutput {
        modes,
        assignments,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster of every point; `None` is unclustered.
    pub assignments: Vec<Option<usize>>,
    /// Cluster centers in PCA space, largest cluster first.
    pub centers: Vec<Point>,
    pub sizes: Vec<usize>,
    /// Decoded contour per cluster; empty until [`decode_prototypes`] runs.
    pub prototypes: Vec<Vec<f64>>,
    pub threshold: usize,
}

impl ClusterResult {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn unclustered(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_none()).count()
    }
}

/// Drops clusters below `min_cluster_size` (their points become
/// unclustered) and re-indexes survivors from largest to smallest.
pub fn apply_threshold(raw: &MeanShiftOutput, min_cluster_size: usize) -> Result<ClusterResult> {
    let mut sizes = vec![0usize; raw.modes.len()];
    for &a in &raw.assignments {
        sizes[a] += 1;
    }
    let mut survivors: Vec<usize> = (0..raw.modes.len())
        .filter(|&k| sizes[k] >= min_cluster_size && sizes[k] > 0)
        .collect();
    if survivors.is_empty() {
        return Err(Error::AllClustersSpurious {
            clusters: raw.modes.len(),
            threshold: min_cluster_size,
        });
    }
    // Stable sort keeps the original mode order among equal sizes.
    survivors.sort_by(|a, b| sizes[*b].cmp(&sizes[*a]));
    let mut new_index = vec![None; raw.modes.len()];
    for (new, &old) in survivors.iter().enumerate() {
        new_index[old] = Some(new);
    }
    Ok(ClusterResult {
        assignments: raw.assignments.iter().map(|&a| new_index[a]).collect(),
        centers: survivors.iter().map(|&k| raw.modes[k]).collect(),
        sizes: survivors.iter().map(|&k| sizes[k]).collect(),
        prototypes: Vec::new(),
        threshold: min_cluster_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicCheck {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityReport {
    pub checks: Vec<HeuristicCheck>,
}

impl PlausibilityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let v = match c.verdict {
                Verdict::Pass => "PASS",
                Verdict::Warn => "WARN",
            };
            s.push_str(&format!("{v} {}: {}\n", c.name, c.detail));
        }
        s
    }
}

/// Checks the linguistic plausibility heuristics: 3 to 8 clusters, each
/// holding at least a tenth of the points, and most points clustered.
/// Never fails; problems are reported as warnings.
pub fn plausibility_check(result: &ClusterResult, n: usize) -> PlausibilityReport {
    let k = result.k();
    let verdict = |ok: bool| if ok { Verdict::Pass } else { Verdict::Warn };
    let count_detail = if k < 3 {
        format!("{k} clusters: too few clusters (expected 3 to 8)")
    } else if k > 8 {
        format!("{k} clusters: too many clusters (expected 3 to 8)")
    } else {
        format!("{k} clusters")
    };
    let smallest = result.sizes.iter().copied().min().unwrap_or(0);
    let clustered = n - result.unclustered().min(n);
    let coverage = if n == 0 { 0.0 } else { clustered as f64 / n as f64 };
    PlausibilityReport {
        checks: vec![
            HeuristicCheck {
                name: "cluster_count".into(),
                verdict: verdict((3..=8).contains(&k)),
                detail: count_detail,
            },
            HeuristicCheck {
                name: "min_cluster_share".into(),
                verdict: verdict(k > 0 && smallest * 10 >= n),
                detail: format!("smallest cluster has {smallest} of {n} points (need >= 1/10)"),
            },
            HeuristicCheck {
                name: "coverage".into(),
                verdict: verdict(coverage >= 0.5),
                detail: format!("{clustered} of {n} points clustered ({coverage:.3})"),
            },
        ],
    }
}

/// Decodes each cluster center (mapped back out of PCA space) into a
/// prototype contour.
pub fn decode_prototypes(result: &ClusterResult, pca: &PcaTransform, model: &Model) -> Vec<Vec<f64>> {
    result
        .centers
        .iter()
        .map(|c| model.decode(pca.inverse(c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineFeatures {
    pub mean_pitch: f64,
    /// OLS slope against the contour position rescaled to [0, 1].
    pub ols_slope: f64,
}

pub fn baseline_features(values: &[f64]) -> Result<BaselineFeatures> {
    if values.len() != CONTOUR_LEN {
        return Err(Error::ShapeMismatch(format!(
            "contour of length {}, expected {CONTOUR_LEN}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64 / (n - 1.0)).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_pitch = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(values) {
        sxy += (x - mean_x) * (y - mean_pitch);
        sxx += (x - mean_x) * (x - mean_x);
    }
    Ok(BaselineFeatures {
        mean_pitch,
        ols_slope: sxy / sxx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// Centers in z-scored feature space.
    pub centers: Vec<Point>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub inertia_history: Vec<f64>,
}

/// Per-dimension z-scoring; a constant dimension is only centered.
pub fn zscore(features: &[Point]) -> Vec<Point> {
    let n = features.len() as f64;
    let mut out = features.to_vec();
    for d in 0..2 {
        let mean = features.iter().map(|f| f[d]).sum::<f64>() / n;
        let var = features.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for (o, f) in out.iter_mut().zip(features) {
            o[d] = if sd > 0.0 { (f[d] - mean) / sd } else { f[d] - mean };
        }
    }
    out
}

fn nearest(p: &Point, centers: &[Point]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(k, c)| (k, dist2(p, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeans_pp(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[idx]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[idx]));
        }
    }
    centers
}

fn lloyd(points: &[Point], mut centers: Vec<Point>, cfg: &KMeansConfig) -> KMeansResult {
    let k = centers.len();
    let mut assignments = vec![0; points.len()];
    let mut history = Vec::new();
    for _ in 0..cfg.max_iters {
        let mut inertia = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centers);
            *a = c;
            inertia += d;
        }
        history.push(inertia);

        let mut sums = vec![([0.0, 0.0], 0usize); k];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a].0[0] += p[0];
            sums[a].0[1] += p[1];
            sums[a].1 += 1;
        }
        let mut next: Vec<Point> = sums
            .iter()
            .zip(&centers)
            .map(|((s, n), old)| if *n > 0 { [s[0] / *n as f64, s[1] / *n as f64] } else { *old })
            .collect();
        for c in 0..k {
            if sums[c].1 == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, dist2(p, &next[assignments[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                log::debug!("k-means: cluster {c} empty, re-seeded from point {far}");
                next[c] = points[far];
                assignments[far] = c;
            }
        }
        let moved = next
            .iter()
            .zip(&centers)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if moved < cfg.tol {
            break;
        }
    }
    let mut inertia = 0.0;
    for (a, p) in assignments.iter_mut().zip(points) {
        let (c, d) = nearest(p, &centers);
        *a = c;
        inertia += d;
    }
    if history.last().map_or(true, |&h| inertia < h) {
        history.push(inertia);
    }
    KMeansResult {
        assignments,
        centers,
        inertia,
        inertia_history: history,
    }
}

/// k-means on z-scored features: k-means++ seeding and Lloyd iterations,
/// keeping the lowest-inertia result of the seeded restarts.
pub fn kmeans(features: &[Point], k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansResult> {
    if k == 0 || features.len() < k {
        return Err(Error::InvalidClustering(format!(
            "k-means needs 1 <= k <= N, got k={k}, N={}",
            features.len()
        )));
    }
    if features.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::InvalidClustering("non-finite feature".into()));
    }
    let points = zscore(features);
    let runs: Vec<KMeansResult> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(&points, kmeans_pp(&points, k, &mut rng), cfg)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, cur| if cur.inertia < best.inertia { cur } else { best })
        .expect("at least one restart");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, centers: &[Point], per: usize, sd: f64) -> (Vec<Point>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, sd).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push([c[0] + nd.sample(&mut rng), c[1] + nd.sample(&mut rng)]);
                labels.push(k);
            }
        }
        (pts, labels)
    }

    #[test]
    fn pca_identity_on_axis_aligned() {
        let pts: Vec<Point> = vec![[-2.0, 0.0], [2.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
        let (pca, out) = pca_fit_apply(&pts).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((pca.rotation[i][j].abs() - want).abs() < 1e-12);
            }
        }
        for (a, b) in pts.iter().zip(&out) {
            assert!((a[0].abs() - b[0].abs()).abs() < 1e-12 && (a[1].abs() - b[1].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_diagonal_line() {
        let pts: Vec<Point> = (0..20).map(|i| [i as f64 * 0.1, i as f64 * 0.1]).collect();
        let (pca, _) = pca_fit_apply(&pts).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pca.rotation[0][0] - s).abs() < 1e-12);
        assert!((pca.rotation[1][0] - s).abs() < 1e-12);
    }

    #[test]
    fn pca_degenerate() {
        assert!(matches!(pca_fit_apply(&[[1.0, 1.0]; 5]), Err(Error::DegenerateCovariance(_))));
        assert!(pca_fit_apply(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn mean_shift_single_and_identical() {
        let out = mean_shift(&[[0.3, -0.2]], &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.modes, vec![[0.3, -0.2]]);
        let out = mean_shift(&[[1.0, 2.0]; 10], &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.modes.len(), 1);
        assert_eq!(out.iterations, 1);
        assert!(out.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn mean_shift_two_blobs() {
        let (pts, labels) = blobs(11, &[[0.0, 0.0], [3.0, 3.0]], 100, 0.1);
        let out = mean_shift(&pts, &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.modes.len(), 2);
        let m0 = out.assignments[0];
        for (a, l) in out.assignments.iter().zip(&labels) {
            assert_eq!(*a == m0, *l == 0);
        }
        for (k, c) in [[0.0, 0.0], [3.0, 3.0]].iter().enumerate() {
            let mode = out.modes[out.assignments[k * 100]];
            assert!(dist2(&mode, c).sqrt() < 0.1);
        }
    }

    #[test]
    fn gaussian_kernel_also_separates() {
        let (pts, _) = blobs(3, &[[0.0, 0.0], [3.0, 3.0]], 60, 0.1);
        let cfg = MeanShiftConfig {
            kernel: Kernel::Gaussian,
            bandwidth: 0.3,
            ..MeanShiftConfig::default()
        };
        assert_eq!(mean_shift(&pts, &cfg).unwrap().modes.len(), 2);
    }

    fn raw(sizes: &[usize]) -> MeanShiftOutput {
        let mut assignments = Vec::new();
        for (k, &s) in sizes.iter().enumerate() {
            assignments.extend(std::iter::repeat(k).take(s));
        }
        MeanShiftOutput {
            modes: (0..sizes.len()).map(|k| [k as f64, 0.0]).collect(),
            assignments,
            iterations: 1,
        }
    }

    #[test]
    fn threshold_filters_and_sorts() {
        let r = apply_threshold(&raw(&[90, 3, 120]), 20).unwrap();
        assert_eq!(r.sizes, [120, 90]);
        assert_eq!(r.unclustered(), 3);
        assert_eq!(r.centers, vec![[2.0, 0.0], [0.0, 0.0]]);
        assert_eq!(r.assignments[0], Some(1));
        assert_eq!(r.assignments[90], None);
        assert_eq!(r.assignments[93], Some(0));

        let all = apply_threshold(&raw(&[5, 7, 2]), 0).unwrap();
        assert_eq!(all.k(), 3);
        assert_eq!(all.unclustered(), 0);

        assert!(matches!(
            apply_threshold(&raw(&[1, 1, 1]), 20),
            Err(Error::AllClustersSpurious { clusters: 3, threshold: 20 })
        ));
    }

    #[test]
    fn plausibility_rules() {
        let good = apply_threshold(&raw(&[100, 80, 60, 40, 20]), 30).unwrap();
        let rep = plausibility_check(&good, 300);
        assert!(rep.all_pass(), "{}", rep.to_text());

        let two = apply_threshold(&raw(&[100, 100]), 1).unwrap();
        let rep = plausibility_check(&two, 200);
        assert_eq!(rep.checks[0].verdict, Verdict::Warn);
        assert!(rep.checks[0].detail.contains("too few clusters"));

        let small = apply_threshold(&raw(&[95, 95, 95, 15]), 10).unwrap();
        let rep = plausibility_check(&small, 300);
        assert_eq!(rep.checks[1].verdict, Verdict::Warn);
        assert_eq!(rep.checks[2].verdict, Verdict::Pass);
    }

    #[test]
    fn pca_inverse_identity() {
        let pca = PcaTransform::identity();
        assert_eq!(pca.inverse(&[0.4, -1.0]), [0.4, -1.0]);
    }

    #[test]
    fn baseline_feature_examples() {
        let f = baseline_features(&[0.5; 40]).unwrap();
        assert_eq!(f.mean_pitch, 0.5);
        assert!(f.ols_slope.abs() < 1e-15);
        let line: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let f = baseline_features(&line).unwrap();
        assert!((f.mean_pitch - 0.5).abs() < 1e-12 && (f.ols_slope - 1.0).abs() < 1e-12);
        assert!(baseline_features(&[0.5; 10]).is_err());
    }

    #[test]
    fn baseline_noisy_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nd = Normal::new(0.0, 0.01).unwrap();
        let ys: Vec<f64> = (0..40).map(|i| 0.2 + 0.4 * i as f64 / 39.0 + nd.sample(&mut rng)).collect();
        // Closed-form OLS via normal equations on the raw sums.
        let n = 40.0;
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let f = baseline_features(&ys).unwrap();
        assert!((f.ols_slope - oracle).abs() < 1e-12);
        assert!((f.ols_slope - 0.4).abs() < 0.02);
    }

    #[test]
    fn kmeans_examples() {
        let (pts, labels) = blobs(2, &[[0.0, 0.0], [5.0, 1.0]], 50, 0.2);
        let cfg = KMeansConfig::default();
        let one = kmeans(&pts, 1, 0, &cfg).unwrap();
        assert!(one.assignments.iter().all(|&a| a == 0));
        // z-scored data has zero mean
        assert!(one.centers[0][0].abs() < 1e-12 && one.centers[0][1].abs() < 1e-12);

        let two = kmeans(&pts, 2, 0, &cfg).unwrap();
        let a0 = two.assignments[0];
        for (a, l) in two.assignments.iter().zip(&labels) {
            assert_eq!(*a == a0, *l == 0);
        }

        let few: Vec<Point> = (0..6).map(|i| [i as f64, (i * i) as f64]).collect();
        assert!(kmeans(&few, 6, 0, &cfg).unwrap().inertia < 1e-20);
        assert!(kmeans(&few, 7, 0, &cfg).is_err());
        assert!(kmeans(&few, 0, 0, &cfg).is_err());
    }

    #[test]
    fn kmeans_inertia_nonincreasing() {
        let (pts, _) = blobs(9, &[[0.0, 0.0], [1.0, 0.5], [0.3, 1.2], [2.0, 2.0]], 40, 0.4);
        for seed in 0..5 {
            let r = kmeans(&pts, 4, seed, &KMeansConfig::default()).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", r.inertia_history);
            }
        }
    }
}
