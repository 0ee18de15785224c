//! Finite metric measure spaces: open balls, doubling profiles, ball bases,
//! the ball maximal operator, Vitali-type coverings, good-λ verification,
//! ρ-oscillation John–Nirenberg norms and the weak Gurov–Reshetnyak class.
//!
//! A finite space has finitely many distinct balls, so "for every ball"
//! quantifiers are checked by enumerating radius events: for a center `c`
//! and dilation scales `s_1..s_m`, the sets `B(c, s_j r)` only change when
//! `s_j r` crosses a distance from `c`. Each interval between consecutive
//! events is represented by its right endpoint, the largest radius with
//! that configuration.

mod cover;
mod doubling;
mod gr;
mod jn;
mod provider;

pub use cover::{ball_maximal, lambda0, vitali_cz_cover, BallBasis, CoverBall, CoverReport, Member};
pub use doubling::{doubling_constants, DoublingProfile, DoublingSweep, DEFAULT_D_GRID};
pub use gr::{verify_weak_gr_metric, weak_gr_epsilon, weak_gr_exponent, MetricGrReport, WeakGrEpsilon};
pub use jn::{
    a0_functional, dp_ball_norm, inf_oscillation, jn_candidates, jn_dp_identity, jn_ptr_norm, verify_fpw_metric,
    BallFunctional, Candidate, DpBallNorm, FpwMetricReport, IdentityReport, InfOscillation, JnPtrNorm, SearchOptions,
};
pub use provider::{
    metric_derive_constant, verify_good_lambda_metric, ConstantPolicy, MetricConstantChoice, MetricGoodLambdaReport,
    MetricHypothesisReport, MetricLevelPoint, MetricNormReport, MetricProvider, ProviderKind,
};

use crate::error::{invalid, Error, Result};
use crate::mwis::Bitset;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Open ball `{y : d(y, center) < radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Same center, radius scaled by `s`.
    pub fn dilate(&self, s: f64) -> Self {
        Self::new(self.center, self.radius * s)
    }
}

/// Relative slack in the triangle inequality check: a few ulps.
pub const TRIANGLE_SLACK: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Debug)]
pub struct MetricSpace {
    n: usize,
    dist: Vec<f64>,
    weights: Vec<f64>,
    labels: Vec<Value>,
    coords: Option<Vec<Vec<f64>>>,
    /// Per center: sites ordered by (distance, index).
    order: Vec<Vec<usize>>,
    sorted: Vec<Vec<f64>>,
    /// Per center: prefix sums of weights along `order`, length n + 1.
    mass: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    points: Option<Vec<Value>>,
    dist: Option<Vec<Vec<f64>>>,
    coords: Option<Vec<Vec<f64>>>,
    metric: Option<String>,
    weights: Option<Vec<f64>>,
}

impl MetricSpace {
    /// Validates a distance matrix and weights. Positivity and symmetry are
    /// checked exactly; the triangle inequality allows a relative slack of
    /// [`TRIANGLE_SLACK`] so that rounded Euclidean distances between
    /// collinear points are accepted.
    pub fn new(dist: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(Error::InvalidSpace("empty space".into()));
        }
        if weights.len() != n {
            return Err(Error::InvalidSpace(format!("{} weights for {n} points", weights.len())));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "weight of point {i} must be finite and positive"
                )));
            }
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpace(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                let d = flat[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidSpace(format!(
                        "d({i},{j}) = {d} is not a finite nonnegative number"
                    )));
                }
                if (i == j) != (d == 0.0) {
                    return Err(Error::InvalidSpace(format!(
                        "d({i},{j}) = {d} violates d(x,y) = 0 iff x = y"
                    )));
                }
                if d != flat[j * n + i] {
                    return Err(Error::InvalidSpace(format!(
                        "distance matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = flat[i * n + j];
                for k in 0..n {
                    if flat[i * n + k] > (dij + flat[j * n + k]) * (1.0 + TRIANGLE_SLACK) {
                        return Err(Error::InvalidSpace(format!(
                            "triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})"
                        )));
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() {
            return Err(Error::InvalidSpace("total measure is not finite".into()));
        }
        let mut order = Vec::with_capacity(n);
        let mut sorted = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        for c in 0..n {
            let row = &flat[c * n..(c + 1) * n];
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            sorted.push(idx.iter().map(|&i| row[i]).collect());
            let mut m = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            m.push(acc);
            for &i in &idx {
                acc += weights[i];
                m.push(acc);
            }
            mass.push(m);
            order.push(idx);
        }
        Ok(Self {
            n,
            dist: flat,
            labels: (0..n).map(|i| Value::from(i as u64)).collect(),
            weights,
            coords: None,
            order,
            sorted,
            mass,
        })
    }

    /// Euclidean distances between coordinate vectors.
    pub fn euclidean(coords: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if let Some(first) = coords.first() {
            if coords
                .iter()
                .any(|c| c.len() != first.len() || c.iter().any(|x| !x.is_finite()))
            {
                return Err(Error::InvalidSpace(
                    "coordinates must be finite vectors of one length".into(),
                ));
            }
        }
        let dist = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        coords[i]
                            .iter()
                            .zip(&coords[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let mut space = Self::new(dist, weights)?;
        space.coords = Some(coords);
        Ok(space)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(s)?;
        let n = match (&file.dist, &file.coords) {
            (Some(d), None) => d.len(),
            (None, Some(c)) => c.len(),
            (Some(_), Some(_)) => return Err(invalid("give either \"dist\" or \"coords\", not both")),
            (None, None) => return Err(invalid("space needs \"dist\" or \"coords\"")),
        };
        let weights = file.weights.unwrap_or_else(|| vec![1.0; n]);
        let mut space = match (file.dist, file.coords) {
            (Some(d), _) => Self::new(d, weights)?,
            (_, Some(c)) => {
                match file.metric.as_deref() {
                    None | Some("euclidean") => {}
                    Some(other) => return Err(invalid(format!("unsupported metric {other:?}"))),
                }
                Self::euclidean(c, weights)?
            }
            _ => unreachable!(),
        };
        if let Some(points) = file.points {
            if points.len() != n {
                return Err(Error::InvalidSpace(format!(
                    "{} point ids for {n} points",
                    points.len()
                )));
            }
            space.labels = points;
        }
        Ok(space)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("points".into(), Value::from(self.labels.clone()));
        match &self.coords {
            Some(c) => {
                obj.insert("coords".into(), serde_json::to_value(c).expect("finite coordinates"));
                obj.insert("metric".into(), Value::from("euclidean"));
            }
            None => {
                let rows: Vec<Vec<f64>> = (0..self.n)
                    .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
                    .collect();
                obj.insert("dist".into(), serde_json::to_value(rows).expect("finite distances"));
            }
        }
        obj.insert(
            "weights".into(),
            serde_json::to_value(&self.weights).expect("finite weights"),
        );
        Value::Object(obj)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[Value] {
        &self.labels
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn total_measure(&self) -> f64 {
        crate::norms::pairwise_sum(&self.weights)
    }

    pub fn check_ball(&self, b: &Ball) -> Result<()> {
        if b.center >= self.n {
            return Err(invalid(format!(
                "ball center {} out of range (N = {})",
                b.center, self.n
            )));
        }
        if !(b.radius > 0.0 && b.radius.is_finite()) {
            return Err(invalid(format!("ball radius {} must be finite and positive", b.radius)));
        }
        Ok(())
    }

    /// Number of sites `y` with `d(c, y) < r`.
    pub fn count(&self, c: usize, r: f64) -> usize {
        self.sorted[c].partition_point(|&d| d < r)
    }

    pub fn ball_count(&self, b: &Ball) -> usize {
        self.count(b.center, b.radius)
    }

    /// The `k` sites nearest to `c` (ties by index).
    pub fn prefix(&self, c: usize, k: usize) -> &[usize] {
        &self.order[c][..k]
    }

    pub fn ball_sites(&self, b: &Ball) -> &[usize] {
        self.prefix(b.center, self.ball_count(b))
    }

    pub fn prefix_measure(&self, c: usize, k: usize) -> f64 {
        self.mass[c][k]
    }

    pub fn measure(&self, b: &Ball) -> f64 {
        self.prefix_measure(b.center, self.ball_count(b))
    }

    pub fn prefix_set(&self, c: usize, k: usize) -> Bitset {
        Bitset::from_indices(self.n, self.prefix(c, k).iter().copied())
    }

    pub fn ball_set(&self, b: &Ball) -> Bitset {
        self.prefix_set(b.center, self.ball_count(b))
    }

    /// Distances from `c` in increasing order (the first is 0).
    pub fn sorted_distances(&self, c: usize) -> &[f64] {
        &self.sorted[c]
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Radius events at `c` for the given dilation scales, capped at `cap`:
    /// every `d / s ≤ cap` for positive distances `d` from `c`, plus the cap.
    /// An infinite cap is replaced by twice the largest event (or 1).
    pub(crate) fn radius_events(&self, c: usize, scales: &[f64], cap: f64) -> Vec<f64> {
        let mut ev: Vec<f64> = Vec::new();
        for &d in &self.sorted[c][1..] {
            for &s in scales {
                ev.push(d / s);
            }
        }
        let cap = if cap.is_finite() {
            cap
        } else {
            2.0 * ev.iter().copied().fold(0.5, f64::max)
        };
        ev.retain(|&e| e <= cap);
        ev.push(cap);
        ev.sort_by(f64::total_cmp);
        ev.dedup();
        ev
    }

    /// Weighted mean of `values` over a ball.
    pub fn ball_average(&self, values: &[f64], b: &Ball) -> f64 {
        let k = self.ball_count(b);
        self.prefix_average(values, b.center, k)
    }

    pub fn prefix_average(&self, values: &[f64], c: usize, k: usize) -> f64 {
        let s: f64 = self.prefix(c, k).iter().map(|&i| values[i] * self.weights[i]).sum();
        s / self.mass[c][k]
    }

    pub(crate) fn check_values(&self, values: &[f64], what: &str) -> Result<()> {
        if values.len() != self.n {
            return Err(invalid(format!(
                "{what} has {} values for {} points",
                values.len(),
                self.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(())
    }
}

/// Prefix sums of `values · μ` along each center's distance order, giving
/// ball averages in O(1). Averages of the same `(center, count)` are always
/// the same float, which keeps comparisons between derived quantities exact.
pub(crate) struct PrefixTable<'a> {
    space: &'a MetricSpace,
    sums: Vec<Vec<f64>>,
}

impl<'a> PrefixTable<'a> {
    pub(crate) fn new(space: &'a MetricSpace, values: &[f64]) -> Self {
        let sums = (0..space.n)
            .map(|c| {
                let mut acc = 0.0;
                let mut row = Vec::with_capacity(space.n + 1);
                row.push(0.0);
                for &i in &space.order[c] {
                    acc += values[i] * space.weights[i];
                    row.push(acc);
                }
                row
            })
            .collect();
        Self { space, sums }
    }

    pub(crate) fn average(&self, c: usize, k: usize) -> f64 {
        self.sums[c][k] / self.space.mass[c][k]
    }

    pub(crate) fn ball_average(&self, b: &Ball) -> f64 {
        self.average(b.center, self.space.ball_count(b))
    }
}

/// Normalized weak-L^p quasinorm of site values over a site subset.
pub(crate) fn weak_lp_sites(space: &MetricSpace, values: &[f64], sites: &[usize], p: f64) -> f64 {
    let total: f64 = sites.iter().map(|&i| space.weights[i]).sum();
    let mut pairs: Vec<(f64, f64)> = sites.iter().map(|&i| (values[i].abs(), space.weights[i])).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut acc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            acc += pairs[i].1;
            i += 1;
        }
        if v > 0.0 {
            best = best.max(v * (acc / total).powf(1.0 / p));
        }
    }
    best
}

/// Normalized L^p norm of site values over a site subset.
pub(crate) fn lp_sites(space: &MetricSpace, values: &[f64], sites: &[usize], p: f64) -> f64 {
    let total: f64 = sites.iter().map(|&i| space.weights[i]).sum();
    let s: f64 = sites.iter().map(|&i| values[i].abs().powf(p) * space.weights[i]).sum();
    (s / total).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line(xs: &[f64], w: &[f64]) -> MetricSpace {
        MetricSpace::euclidean(xs.iter().map(|&x| vec![x]).collect(), w.to_vec()).unwrap()
    }

    #[test]
    fn open_balls() {
        let s = line(&[0.0, 1.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(s.ball_sites(&Ball::new(0, 1.0)), &[0]);
        assert_eq!(s.ball_sites(&Ball::new(0, 1.5)), &[0, 1]);
        assert_eq!(s.measure(&Ball::new(1, 2.5)), 6.0);
        assert_eq!(s.ball_average(&[3.0, 0.0, 1.0], &Ball::new(0, 10.0)), 1.0);
    }

    #[test]
    fn rejects_bad_metrics() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(MetricSpace::new(asym, vec![1.0, 1.0]).is_err());
        let tri = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(MetricSpace::new(tri, vec![1.0; 3]).is_err());
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(MetricSpace::new(zero, vec![1.0; 2]).is_err());
        assert!(MetricSpace::new(vec![vec![0.0]], vec![0.0]).is_err());
        assert!(MetricSpace::new(vec![], vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = MetricSpace::from_json_str(r#"{"points":["a","b"],"dist":[[0,2],[2,0]],"weights":[1,3]}"#).unwrap();
        assert_eq!(s.dist(0, 1), 2.0);
        let back = MetricSpace::from_json_str(&s.to_json().to_string()).unwrap();
        assert_eq!(back.labels()[1], Value::from("b"));
        let e = MetricSpace::from_json_str(r#"{"coords":[[0,0],[3,4]],"metric":"euclidean"}"#).unwrap();
        assert_eq!(e.dist(0, 1), 5.0);
        assert_eq!(e.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn radius_events_cover_configurations() {
        let s = line(&[0.0, 1.0, 3.0], &[1.0; 3]);
        assert_eq!(s.radius_events(0, &[1.0], 10.0), vec![1.0, 3.0, 10.0]);
        assert_eq!(s.radius_events(0, &[1.0, 2.0], 2.0), vec![0.5, 1.0, 1.5, 2.0]);
    }
}
