//! Deterministic synthetic inputs.

use crate::dyadic::GridFunction;
use crate::error::{invalid, Result};
use crate::metric::MetricSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    RandomUniform,
    Spike,
    GrWeight,
    BmoLog,
    RandomPlanarSpace,
}

impl std::str::FromStr for GenKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random-uniform" => Self::RandomUniform,
            "spike" => Self::Spike,
            "gr-weight" => Self::GrWeight,
            "bmo-log" => Self::BmoLog,
            "random-planar-space" => Self::RandomPlanarSpace,
            other => return Err(invalid(format!("unknown generator kind {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenParams {
    pub dim: usize,
    pub depth: u32,
    /// Amplitude bound for `gr-weight`.
    pub epsilon: f64,
    /// Number of sites for `random-planar-space`.
    pub points: usize,
    /// Value range for `random-uniform`.
    pub low: f64,
    pub high: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            dim: 1,
            depth: 4,
            epsilon: 0.1,
            points: 50,
            low: 0.0,
            high: 1.0,
        }
    }
}

pub enum Generated {
    Grid(GridFunction),
    Space(MetricSpace),
}

impl Generated {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Self::Grid(g) => g.to_json(),
            Self::Space(s) => s.to_json(),
        }
    }
}

pub fn generate(kind: GenKind, params: &GenParams, seed: u64) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = || crate::dyadic::Tree::new(params.dim, params.depth).map(|t| t.leaf_count());
    Ok(match kind {
        GenKind::RandomUniform => {
            if !(params.low < params.high && params.low.is_finite() && params.high.is_finite()) {
                return Err(invalid("random-uniform needs finite low < high"));
            }
            let v = (0..leaves()?)
                .map(|_| rng.random_range(params.low..params.high))
                .collect();
            Generated::Grid(GridFunction::on_unit_cube(params.dim, params.depth, v)?)
        }
        GenKind::Spike => {
            let n = leaves()?;
            let mut v = vec![0.0; n];
            v[n - 1] = n as f64;
            Generated::Grid(GridFunction::on_unit_cube(params.dim, params.depth, v)?)
        }
        GenKind::GrWeight => Generated::Grid(gr_weight(params.dim, params.depth, params.epsilon, &mut rng)?),
        GenKind::BmoLog => {
            let tree = crate::dyadic::Tree::new(params.dim, params.depth)?;
            let h = 0.5f64.powi(params.depth as i32);
            let v = (0..tree.leaf_count())
                .map(|i| {
                    let r2: f64 = tree
                        .coords(params.depth, i)
                        .iter()
                        .map(|&c| ((c as f64 + 0.5) * h).powi(2))
                        .sum();
                    -0.5 * r2.ln()
                })
                .collect();
            Generated::Grid(GridFunction::on_unit_cube(params.dim, params.depth, v)?)
        }
        GenKind::RandomPlanarSpace => Generated::Space(random_planar_space(params.points, &mut rng)?),
    })
}

/// `w = 1 + a s` with random signs `s = ±1` and `a = ε0/(1+ε0)`. Every
/// cube then has `⨍|w - w_Q| ≤ a ≤ ε0 (1 - a) ≤ ε0 w_Q`.
pub fn gr_weight(dim: usize, depth: u32, eps0: f64, rng: &mut impl Rng) -> Result<GridFunction> {
    if !(eps0 >= 0.0 && eps0.is_finite()) {
        return Err(invalid(format!("epsilon must be finite and nonnegative, got {eps0}")));
    }
    let a = eps0 / (1.0 + eps0);
    let n = crate::dyadic::Tree::new(dim, depth)?.leaf_count();
    let v = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 + a } else { 1.0 - a })
        .collect();
    GridFunction::on_unit_cube(dim, depth, v)
}

#[derive(Clone, Copy)]
struct Cell {
    x: f64,
    y: f64,
    size: f64,
    mass: f64,
}

/// Sites of an adaptively refined quadtree on the unit square: cells are
/// split into quadrants, preferring a child of the latest split so the
/// space has many scales. Each leaf holds one jittered site weighted by its
/// area.
pub fn random_planar_space(n: usize, rng: &mut impl Rng) -> Result<MetricSpace> {
    if n == 0 {
        return Err(invalid("random-planar-space needs at least one point"));
    }
    let mut cells = vec![Cell {
        x: 0.0,
        y: 0.0,
        size: 1.0,
        mass: 1.0,
    }];
    let mut last: Vec<usize> = Vec::new();
    while cells.len() < n {
        let i = if !last.is_empty() && rng.random_bool(0.6) {
            last[rng.random_range(0..last.len())]
        } else {
            rng.random_range(0..cells.len())
        };
        let c = cells[i];
        let h = c.size / 2.0;
        let kids = [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)].map(|(dx, dy)| Cell {
            x: c.x + dx,
            y: c.y + dy,
            size: h,
            mass: c.mass / 4.0,
        });
        cells[i] = kids[0];
        last = vec![i];
        for k in &kids[1..] {
            last.push(cells.len());
            cells.push(*k);
        }
    }
    // the last split may overshoot; fold the surplus quadrants into the first
    while cells.len() > n {
        let extra = cells.pop().expect("nonempty");
        cells[last[0]].mass += extra.mass;
    }
    let coords: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| {
            vec![
                c.x + c.size * rng.random_range(0.25..0.75),
                c.y + c.size * rng.random_range(0.25..0.75),
            ]
        })
        .collect();
    let weights = cells.iter().map(|c| c.mass).collect();
    MetricSpace::euclidean(coords, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goodlambda::gr_epsilon;

    #[test]
    fn spike_template() {
        let p = GenParams {
            dim: 1,
            depth: 2,
            ..GenParams::default()
        };
        let Generated::Grid(g) = generate(GenKind::Spike, &p, 0).unwrap() else {
            panic!()
        };
        assert_eq!(g.values(), &[0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn gr_weight_respects_epsilon() {
        for seed in 0..20 {
            for (dim, depth) in [(1, 6), (2, 3)] {
                let p = GenParams {
                    dim,
                    depth,
                    epsilon: 0.1,
                    ..GenParams::default()
                };
                let Generated::Grid(w) = generate(GenKind::GrWeight, &p, seed).unwrap() else {
                    panic!()
                };
                assert!(gr_epsilon(&w, None).unwrap().epsilon <= 0.1);
            }
        }
    }

    #[test]
    fn deterministic() {
        let p = GenParams::default();
        let a = generate(GenKind::RandomUniform, &p, 7).unwrap().to_json();
        let b = generate(GenKind::RandomUniform, &p, 7).unwrap().to_json();
        assert_eq!(a, b);
        let s = generate(GenKind::RandomPlanarSpace, &p, 3).unwrap().to_json();
        assert_eq!(s, generate(GenKind::RandomPlanarSpace, &p, 3).unwrap().to_json());
    }

    #[test]
    fn planar_space_is_valid() {
        for seed in 0..10 {
            let s = random_planar_space(50, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(s.len(), 50);
            assert!((s.total_measure() - 1.0).abs() < 1e-12);
        }
        assert!("nope".parse::<GenKind>().is_err());
    }
}
