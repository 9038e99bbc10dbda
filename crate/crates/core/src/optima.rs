//! Optimum detection on metric curves.
//!
//! A curve's optimum is not a single point but the α-band: every scanned `T`
//! whose value lies within `α·(h − l)` of the best value, where `h` and `l`
//! are the curve's maximum and minimum. The band's shape decides how readable
//! the curve is.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Direction, MetricId};
use crate::scalar::Scalar;

pub const DEFAULT_ALPHA: f64 = 0.07;

#[derive(Debug, Error, PartialEq)]
pub enum OptimaError {
    #[error("curve needs at least 3 points, has {0}")]
    TooFewPoints(usize),
    #[error("topic counts must be strictly increasing (T={0} follows T={1})")]
    Unordered(usize, usize),
    #[error("non-finite value at T={0}")]
    NonFinite(usize),
    #[error("alpha {0} outside [0, 1]")]
    BadAlpha(f64),
}

pub type Result<T> = std::result::Result<T, OptimaError>;

/// One metric measured over a grid of topic counts for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve<F> {
    pub metric: MetricId,
    pub family: String,
    pub seed: u64,
    pub direction: Direction,
    points: Vec<(usize, F)>,
    /// Topic counts whose value was undefined and therefore left out.
    pub dropped: Vec<usize>,
}

impl<F: Scalar> Curve<F> {
    /// Builds a curve from defined points. `T` must be strictly increasing and
    /// every value finite.
    pub fn new(metric: MetricId, family: impl Into<String>, seed: u64, points: Vec<(usize, F)>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(OptimaError::Unordered(w[1].0, w[0].0));
            }
        }
        if let Some(&(t, _)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(OptimaError::NonFinite(t));
        }
        Ok(Self {
            metric,
            family: family.into(),
            seed,
            direction: metric.direction(),
            points,
            dropped: Vec::new(),
        })
    }

    /// Builds a curve from raw measurements, dropping undefined or non-finite
    /// ones into [`Curve::dropped`]. Measurements are sorted by `T` first.
    pub fn from_measurements(
        metric: MetricId,
        family: impl Into<String>,
        seed: u64,
        mut measurements: Vec<(usize, Option<F>)>,
    ) -> Result<Self> {
        measurements.sort_by_key(|m| m.0);
        let mut dropped = Vec::new();
        let mut points = Vec::new();
        for (t, v) in measurements {
            match v {
                Some(v) if v.is_finite() => points.push((t, v)),
                _ => dropped.push(t),
            }
        }
        let mut curve = Self::new(metric, family, seed, points)?;
        curve.dropped = dropped;
        Ok(curve)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn points(&self) -> &[(usize, F)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The α-band of a curve. `flat` marks a constant curve, whose band is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub topics: BTreeSet<usize>,
    pub flat: bool,
}

pub fn optimal_band<F: Scalar>(curve: &Curve<F>, alpha: f64) -> Result<Band> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(OptimaError::BadAlpha(alpha));
    }
    if curve.len() < 3 {
        return Err(OptimaError::TooFewPoints(curve.len()));
    }
    let values = curve.points.iter().map(|p| p.1);
    let h = values.clone().fold(F::neg_infinity(), F::max);
    let l = values.fold(F::infinity(), F::min);
    if h == l {
        return Ok(Band {
            topics: BTreeSet::new(),
            flat: true,
        });
    }
    let margin = F::of(alpha) * (h - l);
    let keep = |v: F| match curve.direction {
        Direction::Maximize => v >= h - margin,
        Direction::Minimize => v <= l + margin,
    };
    Ok(Band {
        topics: curve.points.iter().filter(|p| keep(p.1)).map(|p| p.0).collect(),
        flat: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SinglePronounced,
    Interval,
    AlternatingPeaks,
    /// Optimum on the scan edge. [`classify`] reports such curves as
    /// `Uninformative` with `boundary_hit` set; this variant is accepted when
    /// reading verdicts written elsewhere.
    Boundary,
    Uninformative,
}

impl Category {
    /// Whether a curve in this category points at a usable optimum.
    pub fn is_readable(self) -> bool {
        matches!(
            self,
            Category::SinglePronounced | Category::Interval | Category::AlternatingPeaks
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SinglePronounced => "single_pronounced",
            Category::Interval => "interval",
            Category::AlternatingPeaks => "alternating_peaks",
            Category::Boundary => "boundary",
            Category::Uninformative => "uninformative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimumVerdict {
    pub band: BTreeSet<usize>,
    pub category: Category,
    pub boundary_hit: bool,
}

impl OptimumVerdict {
    pub fn uninformative() -> Self {
        Self {
            band: BTreeSet::new(),
            category: Category::Uninformative,
            boundary_hit: false,
        }
    }
}

pub fn classify<F: Scalar>(curve: &Curve<F>, alpha: f64) -> Result<OptimumVerdict> {
    let band = optimal_band(curve, alpha)?;
    if band.flat {
        return Ok(OptimumVerdict::uninformative());
    }
    let t_min = curve.points[0].0;
    let t_max = curve.points[curve.len() - 1].0;
    let boundary_hit = band.topics.contains(&t_min) || band.topics.contains(&t_max);
    let category = if boundary_hit {
        Category::Uninformative
    } else if band.topics.len() == 1 {
        Category::SinglePronounced
    } else {
        let positions: Vec<usize> = curve
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| band.topics.contains(&p.0))
            .map(|(i, _)| i)
            .collect();
        if positions.windows(2).all(|w| w[1] == w[0] + 1) {
            Category::Interval
        } else {
            Category::AlternatingPeaks
        }
    };
    Ok(OptimumVerdict {
        band: band.topics,
        category,
        boundary_hit,
    })
}

/// Most frequent category; ties go to the category listed first in
/// [`Category`].
pub fn majority_category<'a>(verdicts: impl IntoIterator<Item = &'a OptimumVerdict>) -> Option<Category> {
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    for v in verdicts {
        *counts.entry(v.category).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, n)| n == best).map(|(c, _)| c)
}

/// A verdict tagged with the curve it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub dataset: String,
    pub metric: MetricId,
    pub family: String,
    pub seed: u64,
    pub band: BTreeSet<usize>,
    pub category: Category,
    pub boundary_hit: bool,
}

impl VerdictRecord {
    pub fn new<F>(dataset: impl Into<String>, curve: &Curve<F>, verdict: OptimumVerdict) -> Self {
        Self {
            dataset: dataset.into(),
            metric: curve.metric,
            family: curve.family.clone(),
            seed: curve.seed,
            band: verdict.band,
            category: verdict.category,
            boundary_hit: verdict.boundary_hit,
        }
    }

    pub fn verdict(&self) -> OptimumVerdict {
        OptimumVerdict {
            band: self.band.clone(),
            category: self.category,
            boundary_hit: self.boundary_hit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(metric: MetricId, values: &[f64]) -> Curve<f64> {
        let points = values.iter().enumerate().map(|(i, &v)| (i + 2, v)).collect();
        Curve::new(metric, "plsa", 0, points).unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn band_examples() {
        let peak = curve(MetricId::Coherence, &[1.0, 2.0, 10.0, 2.0, 1.0]);
        assert_eq!(optimal_band(&peak, DEFAULT_ALPHA).unwrap().topics, set(&[4]));
        let valley = curve(MetricId::Bic, &[10.0, 1.0, 1.0, 1.0, 10.0]);
        assert_eq!(optimal_band(&valley, DEFAULT_ALPHA).unwrap().topics, set(&[3, 4, 5]));
        let flat = curve(MetricId::Bic, &[3.0; 4]);
        let band = optimal_band(&flat, DEFAULT_ALPHA).unwrap();
        assert!(band.flat && band.topics.is_empty());
    }

    #[test]
    fn classify_examples() {
        let v = classify(&curve(MetricId::Coherence, &[1.0, 2.0, 3.0, 4.0, 5.0]), DEFAULT_ALPHA).unwrap();
        assert_eq!(v.band, set(&[6]));
        assert!(v.boundary_hit);
        assert_eq!(v.category, Category::Uninformative);

        let v = classify(&curve(MetricId::Coherence, &[1.0, 10.0, 1.0, 10.0, 1.0]), DEFAULT_ALPHA).unwrap();
        assert_eq!((v.band, v.category), (set(&[3, 5]), Category::AlternatingPeaks));

        let v = classify(&curve(MetricId::Coherence, &[1.0, 2.0, 10.0, 2.0, 1.0]), DEFAULT_ALPHA).unwrap();
        assert_eq!((v.band, v.category), (set(&[4]), Category::SinglePronounced));

        let v = classify(&curve(MetricId::Bic, &[10.0, 1.0, 1.0, 1.0, 10.0]), DEFAULT_ALPHA).unwrap();
        assert_eq!((v.band, v.category), (set(&[3, 4, 5]), Category::Interval));

        let v = classify(&curve(MetricId::Bic, &[2.0; 5]), DEFAULT_ALPHA).unwrap();
        assert_eq!(v, OptimumVerdict::uninformative());
    }

    #[test]
    fn adjacency_follows_the_scan_grid() {
        // T = 5, 10, 15, 20, 25: the band {10, 15} is adjacent on this grid
        let c = Curve::new(
            MetricId::Coherence,
            "plsa",
            0,
            vec![(5, 0.0), (10, 9.8), (15, 10.0), (20, 1.0), (25, 0.0)],
        )
        .unwrap();
        let v = classify(&c, DEFAULT_ALPHA).unwrap();
        assert_eq!((v.band, v.category), (set(&[10, 15]), Category::Interval));
    }

    #[test]
    fn undefined_points_are_dropped() {
        let c = Curve::from_measurements(
            MetricId::Renyi1,
            "plsa",
            1,
            vec![(4, Some(1.0)), (2, Some(3.0)), (3, None), (5, Some(f64::NAN)), (6, Some(2.0))],
        )
        .unwrap();
        assert_eq!(c.points(), &[(2, 3.0), (4, 1.0), (6, 2.0)]);
        assert_eq!(c.dropped, vec![3, 5]);
        let v = classify(&c, DEFAULT_ALPHA).unwrap();
        assert_eq!((v.band, v.category), (set(&[4]), Category::SinglePronounced));
    }

    #[test]
    fn bad_curves() {
        let short = curve(MetricId::Bic, &[1.0, 2.0]);
        assert_eq!(optimal_band(&short, DEFAULT_ALPHA), Err(OptimaError::TooFewPoints(2)));
        assert!(Curve::new(MetricId::Bic, "plsa", 0, vec![(3, 1.0), (3, 2.0)]).is_err());
        assert!(Curve::new(MetricId::Bic, "plsa", 0, vec![(3, f64::INFINITY)]).is_err());
        let c = curve(MetricId::Bic, &[1.0, 2.0, 3.0]);
        assert!(optimal_band(&c, 1.5).is_err());
    }

    #[test]
    fn majority() {
        let mk = |c| OptimumVerdict {
            category: c,
            ..OptimumVerdict::uninformative()
        };
        let vs = [mk(Category::Interval), mk(Category::Uninformative), mk(Category::Interval)];
        assert_eq!(majority_category(&vs), Some(Category::Interval));
        let tie = [mk(Category::Uninformative), mk(Category::SinglePronounced)];
        assert_eq!(majority_category(&tie), Some(Category::SinglePronounced));
        assert_eq!(majority_category(&[]), None);
    }

    #[test]
    fn verdict_json_shape() {
        let c = curve(MetricId::Bic, &[10.0, 1.0, 1.0, 1.0, 10.0]);
        let rec = VerdictRecord::new("synthetic", &c, classify(&c, DEFAULT_ALPHA).unwrap());
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["metric"], "bic");
        assert_eq!(json["category"], "interval");
        assert_eq!(json["band"], serde_json::json!([3, 4, 5]));
        let back: VerdictRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn works_in_f32() {
        let points = vec![(2, 1.0f32), (3, 2.0), (4, 10.0), (5, 2.0), (6, 1.0)];
        let c = Curve::new(MetricId::Coherence, "plsa", 0, points).unwrap();
        assert_eq!(classify(&c, DEFAULT_ALPHA).unwrap().category, Category::SinglePronounced);
    }

    fn values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 3..15)
    }

    proptest! {
        #[test]
        fn band_is_affine_invariant(vs in values(), a in 0.01..50.0f64, b in -1e3..1e3f64) {
            let c = curve(MetricId::Bic, &vs);
            let scaled: Vec<f64> = vs.iter().map(|v| a * v + b).collect();
            let s = curve(MetricId::Bic, &scaled);
            // rounding in a·v + b can move points sitting exactly on the band edge
            let edge = {
                let h = vs.iter().cloned().fold(f64::MIN, f64::max);
                let l = vs.iter().cloned().fold(f64::MAX, f64::min);
                let cut = l + DEFAULT_ALPHA * (h - l);
                vs.iter().any(|v| (v - cut).abs() < 1e-9 * (h - l).max(1.0))
            };
            prop_assume!(!edge);
            prop_assert_eq!(classify(&c, DEFAULT_ALPHA).unwrap(), classify(&s, DEFAULT_ALPHA).unwrap());
        }

        #[test]
        fn negation_swaps_direction(vs in values()) {
            let c = curve(MetricId::Bic, &vs);
            let neg: Vec<f64> = vs.iter().map(|v| -v).collect();
            let n = curve(MetricId::Bic, &neg).with_direction(Direction::Maximize);
            prop_assert_eq!(optimal_band(&c, DEFAULT_ALPHA).unwrap(), optimal_band(&n, DEFAULT_ALPHA).unwrap());
        }

        #[test]
        fn band_grows_with_alpha(vs in values(), a1 in 0.0..1.0f64, a2 in 0.0..1.0f64) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            for metric in [MetricId::Bic, MetricId::Coherence] {
                let c = curve(metric, &vs);
                let small = optimal_band(&c, lo).unwrap().topics;
                let large = optimal_band(&c, hi).unwrap().topics;
                prop_assert!(small.is_subset(&large));
            }
        }

        #[test]
        fn verdict_invariants(vs in values()) {
            let v = classify(&curve(MetricId::Coherence, &vs), DEFAULT_ALPHA).unwrap();
            match v.category {
                Category::SinglePronounced => prop_assert_eq!(v.band.len(), 1),
                Category::Interval | Category::AlternatingPeaks => prop_assert!(v.band.len() >= 2),
                Category::Uninformative => {}
                Category::Boundary => prop_assert!(false),
            }
            if v.category != Category::Uninformative {
                prop_assert!(!v.band.is_empty() && !v.boundary_hit);
            }
        }
    }
}
