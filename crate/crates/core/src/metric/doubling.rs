use super::MetricSpace;
use crate::error::{invalid, Result};
use crate::mwis::Bitset;
use serde::{Deserialize, Serialize};

pub const DEFAULT_D_GRID: [f64; 10] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0];

/// Relative inflation applied to computed constants so that the profile
/// remains a valid upper bound after rounding in the log-domain sweep.
const ROUND_UP: f64 = 1e-9;

/// `μ(B')/μ(B) ≤ c_mu · (r'/r)^D` for nested balls `B ⊂ B'`, `r ≤ r'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub c_mu: f64,
    #[serde(rename = "D")]
    pub dim: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingSweep {
    pub profile: DoublingProfile,
    /// `(D, minimal c_mu)` for every grid value.
    pub grid: Vec<(f64, f64)>,
    pub pairs: usize,
}

struct BallClass {
    set: Bitset,
    mass: f64,
    lo: f64,
    hi: f64,
}

/// Minimal `c_mu` for each `D` in `d_grid` over every pair of balls
/// `B ⊂ B'` (any centers) with `r_B ≤ r_B'`, and the pair minimizing
/// `c_mu · 2^D` (ties to the smaller `D`).
///
/// A ball with center `x` is the same set for all radii in an interval
/// `(lo, hi]`; for a pair of such classes the supremum of `r/r'` over
/// admissible radii is 1 when the intervals meet and `hi/lo'` otherwise.
pub fn doubling_constants(space: &MetricSpace, d_grid: &[f64]) -> Result<DoublingSweep> {
    if d_grid.is_empty() || d_grid.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(invalid("D grid must be nonempty with positive finite entries"));
    }
    let n = space.len();
    let mut classes = Vec::new();
    for c in 0..n {
        let sd = space.sorted_distances(c);
        for k in 1..=n {
            if k < n && sd[k - 1] == sd[k] {
                continue;
            }
            classes.push(BallClass {
                set: space.prefix_set(c, k),
                mass: space.prefix_measure(c, k),
                lo: sd[k - 1],
                hi: if k == n { f64::INFINITY } else { sd[k] },
            });
        }
    }
    // (ln μ'/μ, ln t) for every nested pair with μ' > μ.
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for a in &classes {
        for b in &classes {
            if b.mass <= a.mass || a.lo >= b.hi || !a.set.is_subset(&b.set) {
                continue;
            }
            let t = if a.hi > b.lo { 1.0 } else { a.hi / b.lo };
            terms.push(((b.mass / a.mass).ln(), t.ln()));
        }
    }
    let grid: Vec<(f64, f64)> = d_grid
        .iter()
        .map(|&d| {
            let m = terms.iter().map(|&(lr, lt)| lr + d * lt).fold(0.0f64, f64::max);
            (d, m.exp() * (1.0 + ROUND_UP))
        })
        .collect();
    let &(dim, c_mu) = grid
        .iter()
        .min_by(|a, b| (a.1 * 2f64.powf(a.0)).total_cmp(&(b.1 * 2f64.powf(b.0))))
        .expect("nonempty grid");
    Ok(DoublingSweep {
        profile: DoublingProfile { c_mu, dim },
        grid,
        pairs: terms.len(),
    })
}

impl DoublingProfile {
    /// Largest `μ(B')/μ(B) · (r/r')^D` over the radius-event balls of the
    /// space; a direct check that the profile holds, for testing.
    pub fn worst_ratio(&self, space: &MetricSpace) -> f64 {
        let n = space.len();
        let mut balls = Vec::new();
        for c in 0..n {
            for r in space.radius_events(c, &[1.0], f64::INFINITY) {
                balls.push(super::Ball::new(c, r));
                // just above the lower end of each interval as well
                let k = space.count(c, r);
                let lo = space.sorted_distances(c)[k - 1];
                balls.push(super::Ball::new(c, lo + (r - lo) * 1e-6));
            }
        }
        let mut worst = 0.0f64;
        for a in &balls {
            let sa = space.ball_set(a);
            for b in &balls {
                if a.radius <= b.radius && sa.is_subset(&space.ball_set(b)) {
                    let v = space.measure(b) / space.measure(a) * (a.radius / b.radius).powf(self.dim);
                    worst = worst.max(v);
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let s = MetricSpace::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let sw = doubling_constants(&s, &[1.0, 2.0]).unwrap();
        assert!(sw.grid.iter().all(|&(_, c)| (c - 1.0).abs() < 1e-8));
    }

    #[test]
    fn two_points_need_two() {
        let s = MetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let sw = doubling_constants(&s, &DEFAULT_D_GRID).unwrap();
        for &(_, c) in &sw.grid {
            assert!((c - 2.0).abs() < 1e-8, "{c}");
        }
        assert_eq!(sw.profile.dim, 0.5);
    }

    #[test]
    fn profile_bounds_sampled_pairs() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0]).collect();
        let s = MetricSpace::euclidean(xs, vec![1.0; 8]).unwrap();
        let sw = doubling_constants(&s, &DEFAULT_D_GRID).unwrap();
        for &(d, c) in &sw.grid {
            let p = DoublingProfile { c_mu: c, dim: d };
            assert!(p.worst_ratio(&s) <= c, "D={d}");
        }
    }
}
