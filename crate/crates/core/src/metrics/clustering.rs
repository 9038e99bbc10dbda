//! Silhouette and Calinski-Harabasz indices over documents embedded as
//! theta columns, labeled by their most probable topic.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;
use crate::trainer::TopicModel;

use super::{MetricError, MetricId, MetricValue, Result};

/// Argmax topic of every theta column; ties go to the lowest topic index.
pub fn theta_labels<F: Scalar>(theta: &Array2<F>) -> Vec<usize> {
    theta
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((0, F::neg_infinity()), |best, (t, &v)| if v > best.1 { (t, v) } else { best })
                .0
        })
        .collect()
}

fn euclidean<F: Scalar>(a: ArrayView1<F>, b: ArrayView1<F>) -> F {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>().sqrt()
}

/// Compacts labels to `0..k` and returns `k`.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    let mapped = labels.iter().map(|l| seen.binary_search(l).unwrap()).collect();
    (mapped, seen.len())
}

fn check_points(points: ArrayView2<'_, impl Scalar>, labels: &[usize]) -> Result<()> {
    if points.ncols() != labels.len() {
        return Err(MetricError::DimensionMismatch(format!(
            "{} points, {} labels",
            points.ncols(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(MetricError::Degenerate("need at least two documents".into()));
    }
    Ok(())
}

/// Mean silhouette of points stored as columns of `points`.
///
/// Returns `None` when fewer than two clusters are present. Points in
/// singleton clusters score 0, as do points with `a = b = 0`.
pub fn silhouette_score<F: Scalar>(points: ArrayView2<F>, labels: &[usize]) -> Result<Option<F>> {
    check_points(points, labels)?;
    let (labels, k) = compact(labels);
    if k < 2 {
        return Ok(None);
    }
    let n = labels.len();
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);

    let mut total = F::zero();
    let mut sums = vec![F::zero(); k];
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = F::zero());
        for j in 0..n {
            if j != i {
                sums[labels[j]] = sums[labels[j]] + euclidean(points.column(i), points.column(j));
            }
        }
        let a = sums[own] / F::count((sizes[own] - 1) as u64);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / F::count(sizes[c] as u64))
            .fold(F::infinity(), F::min);
        let denom = a.max(b);
        if denom > F::zero() {
            total = total + (b - a) / denom;
        }
    }
    Ok(Some(total / F::count(n as u64)))
}

/// Calinski-Harabasz index `[B / (k - 1)] / [W / (D - k)]`.
///
/// Returns `None` for fewer than two clusters and `+inf` when the
/// within-cluster dispersion is zero.
pub fn calinski_harabasz_score<F: Scalar>(points: ArrayView2<F>, labels: &[usize]) -> Result<Option<F>> {
    check_points(points, labels)?;
    let (labels, k) = compact(labels);
    if k < 2 {
        return Ok(None);
    }
    let (dims, n) = points.dim();
    if k >= n {
        return Err(MetricError::Degenerate(format!(
            "{k} clusters for {n} documents leaves no within-cluster degrees of freedom"
        )));
    }
    let mut centroids = Array2::<F>::zeros((dims, k));
    let mut sizes = vec![0u64; k];
    for (col, &l) in points.columns().into_iter().zip(&labels) {
        sizes[l] += 1;
        let mut c = centroids.column_mut(l);
        c.zip_mut_with(&col, |a, &b| *a = *a + b);
    }
    for (mut c, &s) in centroids.columns_mut().into_iter().zip(&sizes) {
        let s = F::count(s);
        c.mapv_inplace(|x| x / s);
    }
    let nf = F::count(n as u64);
    let overall: Vec<F> = points.rows().into_iter().map(|r| r.sum() / nf).collect();

    let between: F = centroids
        .columns()
        .into_iter()
        .zip(&sizes)
        .map(|(c, &s)| {
            F::count(s)
                * c.iter()
                    .zip(&overall)
                    .map(|(&x, &m)| (x - m) * (x - m))
                    .sum::<F>()
        })
        .sum();
    let within: F = points
        .columns()
        .into_iter()
        .zip(&labels)
        .map(|(p, &l)| {
            let d = euclidean(p, centroids.column(l));
            d * d
        })
        .sum();
    if within <= F::zero() {
        return Ok(Some(F::infinity()));
    }
    let kf = F::count(k as u64);
    Ok(Some((between / (kf - F::one())) / (within / (nf - kf))))
}

pub fn silhouette<F: Scalar>(model: &TopicModel<F>) -> Result<MetricValue<F>> {
    let labels = theta_labels(&model.theta);
    Ok(match silhouette_score(model.theta.view(), &labels)? {
        Some(v) => MetricValue::new(MetricId::Silhc, v),
        None => MetricValue::undefined(MetricId::Silhc, "all documents share one argmax topic"),
    })
}

pub fn calinski_harabasz<F: Scalar>(model: &TopicModel<F>) -> Result<MetricValue<F>> {
    let labels = theta_labels(&model.theta);
    Ok(match calinski_harabasz_score(model.theta.view(), &labels)? {
        Some(v) if v.is_infinite() => {
            MetricValue::new(MetricId::Chi, v).with_note("zero within-cluster dispersion")
        }
        Some(v) => MetricValue::new(MetricId::Chi, v),
        None => MetricValue::undefined(MetricId::Chi, "all documents share one argmax topic"),
    })
}
