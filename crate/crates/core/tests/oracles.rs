//! Metrics checked against independent reference computations.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topicscan::corpus::{Document, Vocabulary};
use topicscan::metrics::{
    calinski_harabasz_score, d_spectral, perplexity, silhouette_score, singular_values, theta_labels,
};
use topicscan::{Corpus, Family, ModelSpec, TopicModel64};

fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>().powi(3));
    for mut c in m.columns_mut() {
        let s = c.sum();
        c.mapv_inplace(|x| x / s);
    }
    m
}

fn nalgebra_singular_values(m: &Array2<f64>) -> Vec<f64> {
    let (r, c) = m.dim();
    let dm = DMatrix::from_fn(r, c, |i, j| m[[i, j]]);
    let mut s: Vec<f64> = dm.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn corpus(rng: &mut ChaCha8Rng, words: usize, docs: usize) -> Corpus {
    let vocab = Arc::new(Vocabulary::new((0..words).map(|w| format!("w{w}")).collect()).unwrap());
    let docs = (0..docs)
        .map(|d| {
            let terms = (0..words)
                .filter_map(|w| {
                    let c = rng.random_range(0..4u32);
                    (c > 0 || w == d % words).then_some((w, c.max(1)))
                })
                .collect();
            Document::new(d, terms).unwrap()
        })
        .collect();
    Corpus::new(vocab, docs).unwrap()
}

fn model(phi: Array2<f64>, theta: Array2<f64>) -> TopicModel64 {
    TopicModel64 {
        spec: ModelSpec::new(Family::Plsa, phi.ncols()),
        n_wt: Array2::zeros(phi.raw_dim()),
        phi,
        theta,
        log_likelihood: 0.0,
        trajectory: vec![],
    }
}

#[test]
fn singular_values_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (rows, cols) in [(20, 5), (20, 5), (50, 8), (6, 6), (3, 5), (100, 2)] {
        let m = random_stochastic(&mut rng, rows, cols);
        let ours = singular_values(&m).unwrap();
        let reference = nalgebra_singular_values(&m);
        assert_eq!(ours.len(), reference.len(), "{rows}x{cols}");
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10, "{rows}x{cols}: {a} vs {b}");
        }
    }
}

fn reference_d_spectral(phi: &Array2<f64>, theta: &Array2<f64>, c: &Corpus) -> f64 {
    let t = phi.ncols();
    let mut s = nalgebra_singular_values(phi);
    s.resize(t, 0.0);
    let lengths = c.doc_lengths();
    let mut mass: Vec<f64> = (0..t)
        .map(|k| (0..theta.ncols()).map(|d| theta[[k, d]] * lengths[d] as f64).sum())
        .collect();
    mass.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let norm = |v: Vec<f64>| {
        let v: Vec<f64> = v.into_iter().map(|x| if x <= 0.0 { 1e-12 } else { x }).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (norm(s), norm(mass));
    let kl = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * (x / y).ln()).sum::<f64>();
    kl(&p, &q) + kl(&q, &p)
}

#[test]
fn d_spectral_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let c = corpus(&mut rng, 20, 15);
        let phi = random_stochastic(&mut rng, 20, 5);
        let theta = random_stochastic(&mut rng, 5, 15);
        let ours = d_spectral(&model(phi.clone(), theta.clone()), &c).unwrap().value;
        let reference = reference_d_spectral(&phi, &theta, &c);
        assert!((ours - reference).abs() < 1e-8, "{ours} vs {reference}");
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Textbook silhouette, recomputing every distance.
fn reference_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let clusters: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    let mut total = 0.0;
    for i in 0..n {
        let mates: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if mates.is_empty() {
            continue;
        }
        let a = mates.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / mates.len() as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                members.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

fn reference_chi(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let dims = points[0].len();
    let clusters: Vec<usize> = labels.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let k = clusters.len();
    let mean = |idx: &[usize]| -> Vec<f64> {
        (0..dims).map(|d| idx.iter().map(|&i| points[i][d]).sum::<f64>() / idx.len() as f64).collect()
    };
    let all: Vec<usize> = (0..n).collect();
    let overall = mean(&all);
    let (mut between, mut within) = (0.0, 0.0);
    for &c in &clusters {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let centroid = mean(&members);
        between += members.len() as f64 * dist(&centroid, &overall).powi(2);
        within += members.iter().map(|&i| dist(&points[i], &centroid).powi(2)).sum::<f64>();
    }
    (between / (k - 1) as f64) / (within / (n - k) as f64)
}

#[test]
fn clustering_indices_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for topics in [2usize, 3, 4, 6] {
        let theta = random_stochastic(&mut rng, topics, 30);
        let labels = theta_labels(&theta);
        let points: Vec<Vec<f64>> = theta.columns().into_iter().map(|c| c.to_vec()).collect();
        let sil = silhouette_score(theta.view(), &labels).unwrap().unwrap();
        let chi = calinski_harabasz_score(theta.view(), &labels).unwrap().unwrap();
        let (rs, rc) = (reference_silhouette(&points, &labels), reference_chi(&points, &labels));
        assert!((sil - rs).abs() < 1e-12, "silhouette {sil} vs {rs}");
        assert!(((chi - rc) / rc).abs() < 1e-12, "chi {chi} vs {rc}");
    }
}

#[test]
fn perplexity_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let c = corpus(&mut rng, 12, 9);
    let phi = random_stochastic(&mut rng, 12, 3);
    let theta = random_stochastic(&mut rng, 3, 9);
    let mut ll = 0.0;
    for (d, doc) in c.documents().iter().enumerate() {
        for &(w, n) in doc.terms() {
            let p: f64 = (0..3).map(|t| phi[[w, t]] * theta[[t, d]]).sum();
            ll += n as f64 * p.ln();
        }
    }
    let expected = (-ll / c.total_tokens() as f64).exp();
    let ours = perplexity(&model(phi, theta), &c).unwrap().value;
    assert!(((ours - expected) / expected).abs() < 1e-12);
}
