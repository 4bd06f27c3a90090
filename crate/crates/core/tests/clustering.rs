use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tonecluster::cluster::*;
use tonecluster::eval::{nmi_counts, NmiVariant};

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

/// Partitions equal up to relabeling.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

fn covariance(pts: &[Point]) -> (f64, f64, f64, Point) {
    let n = pts.len() as f64;
    let m = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in pts {
        a += (p[0] - m[0]).powi(2);
        b += (p[0] - m[0]) * (p[1] - m[1]);
        c += (p[1] - m[1]).powi(2);
    }
    (a / (n - 1.0), b / (n - 1.0), c / (n - 1.0), m)
}

#[test]
fn two_blob_mean_shift_oracle() {
    let centers = [[0.0, 0.0], [3.0, 3.0]];
    for seed in 0..5 {
        let (pts, labels) = blobs(seed, &centers, 100, 0.1);
        let out = mean_shift(&pts, &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.modes.len(), 2, "seed {seed}");
        assert!(same_partition(&out.assignments, &labels), "seed {seed}: misassignments");
        for (k, c) in centers.iter().enumerate() {
            let m = out.modes[out.assignments[k * 100]];
            assert!(((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt() < 0.1);
        }
    }
}

#[test]
fn mean_shift_permutation_invariant() {
    let (pts, _) = blobs(21, &[[0.0, 0.0], [2.0, 0.5], [0.5, 2.2]], 60, 0.25);
    let base = mean_shift(&pts, &MeanShiftConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Point> = perm.iter().map(|&i| pts[i]).collect();
        let out = mean_shift(&shuffled, &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.modes.len(), base.modes.len());
        let original_order: Vec<usize> = {
            let mut v = vec![0; pts.len()];
            for (j, &i) in perm.iter().enumerate() {
                v[i] = out.assignments[j];
            }
            v
        };
        assert!(same_partition(&original_order, &base.assignments));
        for (j, &i) in perm.iter().enumerate() {
            let a = out.modes[out.assignments[j]];
            let b = base.modes[base.assignments[i]];
            assert!((a[0] - b[0]).abs() < 1e-4 && (a[1] - b[1]).abs() < 1e-4);
        }
    }
}

#[test]
fn mean_shift_translation_equivariant() {
    let (pts, _) = blobs(22, &[[0.0, 0.0], [2.0, 0.5], [0.5, 2.2]], 60, 0.25);
    let base = mean_shift(&pts, &MeanShiftConfig::default()).unwrap();
    for shift in [[1.5, -0.75], [-10.0, 4.0]] {
        let moved: Vec<Point> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        let out = mean_shift(&moved, &MeanShiftConfig::default()).unwrap();
        assert_eq!(out.assignments, base.assignments);
        for (a, b) in out.modes.iter().zip(&base.modes) {
            assert!((a[0] - b[0] - shift[0]).abs() < 1e-6 && (a[1] - b[1] - shift[1]).abs() < 1e-6);
        }
    }
}

#[test]
fn kmeans_recovers_blob_partition() {
    let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]];
    for seed in 0..5 {
        let (pts, labels) = blobs(100 + seed, &centers, 50, 0.3);
        let km = kmeans(&pts, 4, seed, &KMeansConfig::default()).unwrap();
        assert!(same_partition(&km.assignments, &labels), "seed {seed}");
    }
}

#[test]
fn kmeans_k1_center_is_feature_mean() {
    let (pts, _) = blobs(5, &[[1.0, 2.0], [3.0, -1.0]], 30, 0.5);
    let km = kmeans(&pts, 1, 0, &KMeansConfig::default()).unwrap();
    // Centers live in z-scored space, where the mean is the origin.
    assert!(km.centers[0][0].abs() < 1e-12 && km.centers[0][1].abs() < 1e-12);
}

#[test]
fn pca_oracles_on_seeded_gaussian_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let nd = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..20 {
        let (sx, sy, rho) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(-0.95..0.95));
        let pts: Vec<Point> = (0..300)
            .map(|_| {
                let (u, v): (f64, f64) = (nd.sample(&mut rng), nd.sample(&mut rng));
                [1.0 + sx * u, -2.0 + sy * (rho * u + (1.0f64 - rho * rho).sqrt() * v)]
            })
            .collect();
        let (pca, out) = pca_fit_apply(&pts).unwrap();
        let (a, b, c, m) = covariance(&out);
        assert!(b.abs() < 1e-8, "off-diagonal {b}");
        assert!(a >= c, "descending variance");
        assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10);
        let r = pca.rotation;
        let rtr = [
            [r[0][0] * r[0][0] + r[1][0] * r[1][0], r[0][0] * r[0][1] + r[1][0] * r[1][1]],
            [r[0][1] * r[0][0] + r[1][1] * r[1][0], r[0][1] * r[0][1] + r[1][1] * r[1][1]],
        ];
        assert!((rtr[0][0] - 1.0).abs() < 1e-10 && (rtr[1][1] - 1.0).abs() < 1e-10);
        assert!(rtr[0][1].abs() < 1e-10 && rtr[1][0].abs() < 1e-10);
        // Rotation preserves total variance (no rescaling).
        let (a0, _, c0, _) = covariance(&pts);
        assert!((a + c - a0 - c0).abs() < 1e-9 * (a0 + c0));
        for p in &pts {
            let back = pca.inverse(&pca.apply(p));
            assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn pca_round_trip(mx in -5.0..5.0f64, my in -5.0..5.0f64, theta in 0.0..3.14f64, z0 in -50.0..50.0f64, z1 in -50.0..50.0f64) {
        let (s, c) = theta.sin_cos();
        let pca = PcaTransform { mean: [mx, my], rotation: [[c, -s], [s, c]] };
        let z = [z0, z1];
        let back = pca.inverse(&pca.apply(&z));
        prop_assert!((back[0] - z0).abs() < 1e-12 && (back[1] - z1).abs() < 1e-12);
    }

    #[test]
    fn threshold_only_removes_clusters(sizes in prop::collection::vec(1usize..40, 1..8), threshold in 0usize..30) {
        let mut assignments = Vec::new();
        for (k, &s) in sizes.iter().enumerate() {
            assignments.extend(std::iter::repeat(k).take(s));
        }
        let raw = MeanShiftOutput {
            modes: (0..sizes.len()).map(|k| [k as f64, 0.0]).collect(),
            assignments: assignments.clone(),
            iterations: 1,
        };
        match apply_threshold(&raw, threshold) {
            Ok(r) => {
                let n = assignments.len();
                prop_assert_eq!(r.sizes.iter().sum::<usize>() + r.unclustered(), n);
                prop_assert!(r.sizes.iter().all(|&s| s >= threshold));
                prop_assert!(r.sizes.windows(2).all(|w| w[0] >= w[1]));
                // Survivors keep exactly their original members.
                for (new, center) in r.centers.iter().enumerate() {
                    let old = center[0] as usize;
                    for (i, a) in assignments.iter().enumerate() {
                        prop_assert_eq!(*a == old, r.assignments[i] == Some(new));
                    }
                    prop_assert_eq!(r.sizes[new], sizes[old]);
                }
            }
            Err(_) => prop_assert!(sizes.iter().all(|&s| s < threshold)),
        }
    }
}

/// NMI from the definition, working on expanded per-syllable label pairs.
fn brute_nmi(counts: &[Vec<u64>], variant: NmiVariant) -> f64 {
    let mut pairs = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            for _ in 0..c {
                pairs.push((i, j));
            }
        }
    }
    let n = pairs.len() as f64;
    let mut nc: HashMap<usize, u64> = HashMap::new();
    let mut nt: HashMap<usize, u64> = HashMap::new();
    let mut nj: HashMap<(usize, usize), u64> = HashMap::new();
    for &(c, t) in &pairs {
        *nc.entry(c).or_default() += 1;
        *nt.entry(t).or_default() += 1;
        *nj.entry((c, t)).or_default() += 1;
    }
    let pc: HashMap<usize, f64> = nc.into_iter().map(|(k, v)| (k, v as f64 / n)).collect();
    let pt: HashMap<usize, f64> = nt.into_iter().map(|(k, v)| (k, v as f64 / n)).collect();
    let pj: HashMap<(usize, usize), f64> = nj.into_iter().map(|(k, v)| (k, v as f64 / n)).collect();
    let h = |m: &HashMap<usize, f64>| -> f64 {
        let mut keys: Vec<_> = m.keys().copied().collect();
        keys.sort();
        keys.iter().map(|k| -m[k] * m[k].ln()).sum()
    };
    let (hc, ht) = (h(&pc), h(&pt));
    if hc < 1e-15 && ht < 1e-15 {
        return 1.0;
    }
    if hc < 1e-15 || ht < 1e-15 {
        return 0.0;
    }
    let mut keys: Vec<_> = pj.keys().copied().collect();
    keys.sort();
    let mi: f64 = keys.iter().map(|k| pj[k] * (pj[k] / (pc[&k.0] * pt[&k.1])).ln()).sum();
    let norm = match variant {
        NmiVariant::Arithmetic => (hc + ht) / 2.0,
        NmiVariant::Geometric => (hc * ht).sqrt(),
        NmiVariant::Min => hc.min(ht),
    };
    mi / norm
}

fn transpose(t: &[Vec<u64>]) -> Vec<Vec<u64>> {
    (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).collect()).collect()
}

#[test]
fn nmi_matches_brute_force_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(2021);
    let mut checked = 0;
    while checked < 1000 {
        let rows = rng.random_range(1..7);
        let cols = rng.random_range(1..7);
        let sparse = rng.random_bool(0.3);
        let table: Vec<Vec<u64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if sparse && rng.random_bool(0.5) { 0 } else { rng.random_range(0..40) })
                    .collect()
            })
            .collect();
        if table.iter().flatten().sum::<u64>() < 2 {
            continue;
        }
        checked += 1;
        for v in NmiVariant::ALL {
            let got = nmi_counts(&table, v).unwrap();
            assert!((got - brute_nmi(&table, v)).abs() < 1e-12, "{table:?} {v:?}");
            assert!((0.0..=1.0).contains(&got));
            assert!((got - nmi_counts(&transpose(&table), v).unwrap()).abs() < 1e-12, "symmetry");
            let mut rows_perm = table.clone();
            rows_perm.shuffle(&mut rng);
            let mut col_order: Vec<usize> = (0..cols).collect();
            col_order.shuffle(&mut rng);
            let relabeled: Vec<Vec<u64>> = rows_perm.iter().map(|r| col_order.iter().map(|&j| r[j]).collect()).collect();
            assert!((got - nmi_counts(&relabeled, v).unwrap()).abs() < 1e-12, "relabeling");
            let doubled: Vec<Vec<u64>> = table.iter().map(|r| r.iter().map(|c| 2 * c).collect()).collect();
            assert!((got - nmi_counts(&doubled, v).unwrap()).abs() < 1e-12, "doubling");
        }
    }
}

#[test]
fn nmi_two_by_two_oracle() {
    let got = nmi_counts(&[vec![5, 1], vec![1, 5]], NmiVariant::Arithmetic).unwrap();
    assert!((got - brute_nmi(&[vec![5, 1], vec![1, 5]], NmiVariant::Arithmetic)).abs() < 1e-12);
    assert!((got - 0.34997757835164583).abs() < 1e-12, "{got}");
}

