mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simmap::eigen::{top_k_dense, top_k_lanczos, EigenOptions, SymMatrix};
use simmap::eval::{
    self, knn_with_distances, label_similarity_table, residual_variance_curve, NeighborhoodRow,
    ResidualOptions,
};
use simmap::geodesic::{all_pairs, landmark_rows, sssp, GeodesicMatrix};
use simmap::ingest::{count_cooccurrences, LabelKind, LabelTable, ProfileStore};
use simmap::landmarks::{select_maxmin, LandmarkSet, LandmarkStrategy};
use simmap::mds::{classical_mds, isomap, l_isomap, Embedding, MdsOptions, Method, Provenance};

fn plain_provenance(d: usize) -> Provenance {
    Provenance {
        method: Method::Mds,
        dims: d,
        min_cooc: 0,
        eigen_seed: 0,
        clamped_dims: 0,
        landmarks: None,
    }
}

fn embedding_from(points: &[Vec<f64>]) -> Embedding {
    let d = points[0].len();
    Embedding::new(
        points.iter().flatten().copied().collect(),
        d,
        vec![1.0; d],
        ids(points.len()),
        plain_provenance(d),
    )
    .unwrap()
}

#[test]
fn sssp_equals_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let n = rng.random_range(2..120);
        let extra = rng.random_range(0..3 * n);
        let g = random_graph(&mut rng, n, extra);
        let fw = floyd_warshall(&g);
        for s in 0..n {
            assert_eq!(sssp(&g, s).unwrap(), fw[s * n..(s + 1) * n].to_vec());
        }
        let ap = all_pairs(&g, n).unwrap();
        assert_eq!(ap.data(), &fw[..]);
    }
}

#[test]
fn landmark_rows_equal_floyd_warshall_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_graph_continuous(&mut rng, 80, 150);
    let fw = floyd_warshall(&g);
    let lm = [5usize, 0, 79, 33];
    let rows = landmark_rows(&g, &lm).unwrap();
    for (r, &s) in lm.iter().enumerate() {
        for c in 0..80 {
            assert!((rows.get(r, c) - fw[s * 80 + c]).abs() < 1e-12);
        }
    }
}

#[test]
fn cooccurrence_equals_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let n_items = rng.random_range(2..40);
        let n_users = rng.random_range(1..60);
        let mut profiles = Vec::new();
        let mut records = Vec::new();
        for u in 0..n_users {
            let len = rng.random_range(1..12);
            let p: Vec<String> = (0..len)
                .map(|_| format!("i{}", rng.random_range(0..n_items)))
                .collect();
            for it in &p {
                records.push((format!("u{u}"), it.clone()));
            }
            profiles.push(p);
        }
        let store = ProfileStore::from_records(records).unwrap();
        let m = count_cooccurrences(&store).unwrap();
        let cat = store.catalog();
        let got: std::collections::BTreeMap<(String, String), u32> = m
            .entries()
            .iter()
            .map(|e| ((cat.id(e.a as usize).to_string(), cat.id(e.b as usize).to_string()), e.count))
            .collect();
        assert_eq!(got, brute_cooc(&profiles));
    }
}

fn dense_double_centered(n: usize, d: &[f64]) -> DMatrix<f64> {
    let sq = DMatrix::from_row_slice(n, n, d).map(|v| v * v);
    let j = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    -0.5 * &j * sq * &j
}

#[test]
fn mds_eigenvalues_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let n = rng.random_range(10..80);
        let pts = random_points(&mut rng, n, 4);
        let d = distance_matrix(&pts);
        let emb = classical_mds(&GeodesicMatrix::square(n, d.clone()).unwrap(), 3, &MdsOptions::default()).unwrap();
        let eig = SymmetricEigen::new(dense_double_centered(n, &d));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            assert!((emb.eigenvalues()[k] - ev[k]).abs() < 1e-8 * ev[0], "{k}");
        }
    }
}

#[test]
fn mds_recovers_euclidean_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for dim in 2..=5 {
        let n = 60;
        let pts = random_points(&mut rng, n, dim);
        let d = distance_matrix(&pts);
        let emb = classical_mds(&GeodesicMatrix::square(n, d.clone()).unwrap(), dim, &MdsOptions::default()).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((emb.distance(i, j, dim) - d[i * n + j]).abs() < 1e-8);
            }
        }
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        assert!(procrustes_rms(emb.coords(), &flat, n, dim) < 1e-8);
    }
}

#[test]
fn block_krylov_matches_dense_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let n = rng.random_range(30..150);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        // shift so the largest eigenvalues are the top of the spectrum
        for i in 0..n {
            a[i * n + i] += n as f64;
        }
        let m = SymMatrix::new(n, a).unwrap();
        let k = rng.random_range(1..8);
        let dense = top_k_dense(&m, k).unwrap();
        let kry = top_k_lanczos(&m, k, &EigenOptions::default()).unwrap();
        for i in 0..k {
            assert!((dense.values[i] - kry.values[i]).abs() < 1e-8 * dense.values[0]);
        }
    }
}

#[test]
fn landmark_isomap_with_all_nodes_equals_isomap() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let n = rng.random_range(30..150);
        let g = random_graph_continuous(&mut rng, n, 2 * n);
        let opts = MdsOptions::default();
        let full = isomap(&g, 3, &opts).unwrap();
        let set = LandmarkSet::new((0..n).collect(), LandmarkStrategy::Random, n, 0).unwrap();
        let lm = l_isomap(&g, &set, 3, &opts).unwrap();
        assert!(procrustes_rms(full.coords(), lm.coords(), n, 3) < 1e-6);
    }
}

#[test]
fn path_graph_isomap_recovers_positions() {
    let n = 12;
    let w = 0.25;
    let g = simmap::similarity::SimilarityGraph::from_edges(ids(n), (1..n).map(|i| (i - 1, i, w)), 1).unwrap();
    let emb = isomap(&g, 1, &MdsOptions::default()).unwrap();
    let pos: Vec<f64> = (0..n).map(|i| i as f64 * w).collect();
    let got: Vec<f64> = emb.coords().to_vec();
    assert!(procrustes_rms(&got, &pos, n, 1) < 1e-9);
}

#[test]
fn maxmin_steps_attain_brute_force_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..10 {
        let n = rng.random_range(10..150);
        let g = random_graph(&mut rng, n, n);
        let fw = floyd_warshall(&g);
        let l = rng.random_range(3..n.min(20));
        let s = rng.random_range(1..l);
        let set = select_maxmin(&g, s, l, rng.random()).unwrap();
        let chosen = set.indices();
        for step in s..l {
            let prev = &chosen[..step];
            let min_to = |v: usize| prev.iter().map(|&p| fw[p * n + v]).fold(f64::INFINITY, f64::min);
            let best = (0..n).map(min_to).fold(0.0, f64::max);
            assert_eq!(min_to(chosen[step]), best, "step {step}");
        }
    }
}

#[test]
fn knn_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let pts = random_points(&mut rng, 300, 5);
    let emb = embedding_from(&pts);
    for _ in 0..100 {
        let q = rng.random_range(0..300);
        let k = rng.random_range(1..30);
        let dims = rng.random_range(1..=5);
        let mut scan: Vec<(f64, usize)> = (0..300)
            .filter(|&j| j != q)
            .map(|j| (euclid(&pts[q][..dims], &pts[j][..dims]), j))
            .collect();
        scan.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = knn_with_distances(&emb, q, k, dims).unwrap();
        for (r, (j, dist)) in got.iter().enumerate() {
            assert_eq!(*j, scan[r].1);
            assert!((dist - scan[r].0).abs() < 1e-12);
        }
    }
}

#[test]
fn residual_variance_matches_direct_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 50;
    let pts = random_points(&mut rng, n, 4);
    let mut d = distance_matrix(&pts);
    // perturb the reference so it is no longer exactly Euclidean
    for i in 0..n {
        for j in i + 1..n {
            let v = d[i * n + j] * rng.random_range(0.8..1.2);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let reference = GeodesicMatrix::square(n, d.clone()).unwrap();
    let emb = embedding_from(&pts);
    let curve = residual_variance_curve(&reference, &emb, 4, &ResidualOptions::default()).unwrap();
    for k in 1..=4 {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for i in 0..n {
            for j in i + 1..n {
                x.push(d[i * n + j]);
                y.push(euclid(&pts[i][..k], &pts[j][..k]));
            }
        }
        let r = pearson(&x, &y);
        assert!((curve.values[k - 1] - (1.0 - r * r)).abs() < 1e-12);
    }
}

#[test]
fn label_cosine_matches_definition() {
    let records = [
        ("a", "rock"),
        ("a", "pop"),
        ("b", "rock"),
        ("c", "pop"),
        ("c", "jazz"),
        ("d", "rock"),
        ("d", "pop"),
        ("d", "jazz"),
    ];
    let labels = LabelTable::from_records(LabelKind::Genre, records);
    let table = label_similarity_table(&labels).unwrap();
    let items_with = |g: &str| -> Vec<&str> {
        records.iter().filter(|r| r.1 == g).map(|r| r.0).collect()
    };
    for ga in ["rock", "pop", "jazz"] {
        for gb in ["rock", "pop", "jazz"] {
            let (sa, sb) = (items_with(ga), items_with(gb));
            let both = sa.iter().filter(|i| sb.contains(i)).count() as f64;
            let expected = both / ((sa.len() * sb.len()) as f64).sqrt();
            let ia = (0..3).find(|&i| labels.label_name(i) == ga).unwrap();
            let ib = (0..3).find(|&i| labels.label_name(i) == gb).unwrap();
            assert!((table.get(ia, ib) - expected).abs() < 1e-15);
        }
    }
    // items "a" and "d": mean over the 2 x 3 label pairs
    let sim = eval::label_based_similarity("a", "d", &labels, &table).unwrap();
    let mut expected = 0.0;
    for ga in labels.labels_of("a").unwrap() {
        for gd in labels.labels_of("d").unwrap() {
            expected += table.get(*ga, *gd);
        }
    }
    assert!((sim - expected / 6.0).abs() < 1e-15);
}

#[test]
fn neighborhood_row_statistics_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples: Vec<f64> = (0..37).map(|_| rng.random()).collect();
    let row = NeighborhoodRow::from_samples(4, samples.clone());
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((row.mean - mean).abs() < 1e-12);
    assert!((row.median - quantile_type7(&samples, 0.5)).abs() < 1e-12);
    assert!((row.q1 - quantile_type7(&samples, 0.25)).abs() < 1e-12);
    assert!((row.q3 - quantile_type7(&samples, 0.75)).abs() < 1e-12);
    assert!((row.ci95 - 1.96 * sd / n.sqrt()).abs() < 1e-12);
}
