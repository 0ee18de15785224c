//! John–Nirenberg type norms, `D_p` functionals and dyadic BMO.
//!
//! Pairwise disjoint dyadic families inside a cube are exactly the antichains
//! of its subtree, so suprema over such families reduce to the recursion
//! `best(Q) = max(w(Q), Σ_children best(child))`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::czmax::sup_over_ancestors;
use crate::dyadic::{CubeMap, DyadicCube, GridFunction, Tree};
use crate::error::{invalid, Result};
use crate::goodlambda::derive_constant;
use crate::norms::{weak_lp_of, weak_lp_pow_of};
use crate::oscillations::{mean_oscillation_table, OscillationFamily};
use crate::scalar::Scalar;

/// Maximum-weight antichain values for every subtree.
#[derive(Clone, Debug)]
pub struct AntichainDp<T> {
    weight: CubeMap<T>,
    best: CubeMap<T>,
}

impl<T: Scalar> AntichainDp<T> {
    /// Weights must be nonnegative; the empty family contributes zero.
    pub fn new(weight: CubeMap<T>) -> Self {
        let tree = weight.tree();
        let mut levels: Vec<Vec<T>> = vec![Vec::new(); tree.depth() as usize + 1];
        levels[tree.depth() as usize] = weight.level(tree.depth()).to_vec();
        for j in (0..tree.depth()).rev() {
            let finer = &levels[j as usize + 1];
            let level = (0..tree.level_len(j))
                .map(|idx| {
                    let mut kids = tree.children(j, idx);
                    let first = kids.next().expect("nonempty");
                    let sum = kids.fold(finer[first].clone(), |acc, c| acc + finer[c].clone());
                    weight.get(j, idx).clone().max(sum)
                })
                .collect();
            levels[j as usize] = level;
        }
        Self {
            best: CubeMap::from_levels(tree, levels),
            weight,
        }
    }

    pub fn tree(&self) -> Tree {
        self.weight.tree()
    }

    pub fn best(&self, j: u32, idx: usize) -> &T {
        self.best.get(j, idx)
    }

    pub fn best_table(&self) -> &CubeMap<T> {
        &self.best
    }

    pub fn weight(&self, j: u32, idx: usize) -> &T {
        self.weight.get(j, idx)
    }

    /// An antichain under `(j, idx)` attaining `best(j, idx)`.
    pub fn optimal_family(&self, j: u32, idx: usize) -> Vec<(u32, usize)> {
        let tree = self.tree();
        let mut out = Vec::new();
        let mut stack = vec![(j, idx)];
        while let Some((j, idx)) = stack.pop() {
            if j == tree.depth() || self.weight(j, idx) >= self.best(j, idx) {
                if *self.weight(j, idx) > T::zero() {
                    out.push((j, idx));
                }
            } else {
                stack.extend(tree.children(j, idx).map(|c| (j + 1, c)));
            }
        }
        out.sort();
        out
    }
}

/// `2^{-n j}`, the volume of a level-`j` cube relative to the root.
pub fn relative_volume<T: Scalar>(tree: Tree, j: u32) -> T {
    T::one() / T::from_u64(tree.level_len(j) as u64)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent must be finite and > 1, got {p}")))
    }
}

/// DP over weights `osc(Q)^p |Q|/|Q0|`.
pub fn jn_dp(table: &CubeMap<f64>, p: f64) -> AntichainDp<f64> {
    let tree = table.tree();
    AntichainDp::new(table.map(|j, _, &o| o.powf(p) * relative_volume::<f64>(tree, j)))
}

/// Same DP for integer `p` in any scalar type.
pub fn jn_dp_exact<T: Scalar>(table: &CubeMap<T>, p: u32) -> AntichainDp<T> {
    let tree = table.tree();
    AntichainDp::new(table.map(|j, _, o| o.powi(p) * relative_volume::<T>(tree, j)))
}

/// `(best(Q)/|Q|)^{1/p}` for every cube, from a DP with root-relative volumes.
pub fn per_cube_norms(dp: &AntichainDp<f64>, p: f64) -> CubeMap<f64> {
    let tree = dp.tree();
    dp.best_table()
        .map(|j, _, &b| (b * tree.level_len(j) as f64).powf(1.0 / p))
}

/// `‖f‖_{JN_p, Q}` with oscillations `⨍_R |B_R f|`.
pub fn jn_norm(f: &GridFunction, p: f64, q: &DyadicCube, osc: &dyn OscillationFamily) -> Result<f64> {
    check_p(p)?;
    let g = f.restrict(q)?;
    let table = osc.oscillation_table(&g)?;
    Ok(jn_dp(&table, p).best(0, 0).powf(1.0 / p))
}

#[derive(Clone, Debug, Serialize)]
pub struct SupNorm {
    pub value: f64,
    /// A cube attaining the supremum.
    pub argmax: DyadicCube,
}

fn sup_of(table: &CubeMap<f64>) -> (f64, DyadicCube) {
    let tree = table.tree();
    let mut best = (f64::NEG_INFINITY, DyadicCube::root(tree.dim()));
    for (j, idx, &v) in table.iter() {
        if v > best.0 {
            best = (v, tree.cube(j, idx));
        }
    }
    best
}

/// `sup_{Q ⊂ Q0} ‖f‖_{JN_p, Q}`; the argmax is relative to the grid of `f`
/// when `q0` is the root.
pub fn jn_sup_norm(f: &GridFunction, p: f64, q0: &DyadicCube, osc: &dyn OscillationFamily) -> Result<SupNorm> {
    check_p(p)?;
    let g = f.restrict(q0)?;
    let table = osc.oscillation_table(&g)?;
    let (value, local) = sup_of(&per_cube_norms(&jn_dp(&table, p), p));
    Ok(SupNorm {
        value,
        argmax: to_absolute(q0, &local),
    })
}

fn to_absolute(q0: &DyadicCube, local: &DyadicCube) -> DyadicCube {
    DyadicCube {
        level: q0.level + local.level,
        coords: q0
            .coords
            .iter()
            .zip(&local.coords)
            .map(|(c, l)| (c << local.level) + l)
            .collect(),
    }
}

/// `sup_{Q' ⊂ Q} ⨍_{Q'} |f - f_{Q'}|`.
pub fn bmo_dyadic_norm(f: &GridFunction, q: &DyadicCube) -> Result<f64> {
    let g = f.restrict(q)?;
    let table = mean_oscillation_table(g.tree(), g.values());
    Ok(table.iter().fold(0.0, |m, (_, _, &v)| m.max(v)))
}

/// A nonnegative function on cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CubeFunctional {
    /// Explicit values; every cube of the tree must be listed.
    Table {
        entries: Vec<TableEntry>,
    },
    Constant {
        value: f64,
    },
    /// `coefficient · ℓ(Q)^exponent`.
    SidePower {
        coefficient: f64,
        exponent: f64,
    },
    /// `⨍_Q |B_Q f|`, the smallest functional the data satisfies.
    Tight,
    /// `ℓ(Q) (⨍_Q g^exponent)^{1/exponent}` for a density `g` on the same grid.
    Poincare {
        density: Vec<f64>,
        exponent: f64,
    },
    /// `epsilon · ⨍_Q f`.
    Gr {
        epsilon: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub level: u32,
    pub coords: Vec<u64>,
    pub value: f64,
}

impl CubeFunctional {
    /// Values on every cube of the grid of `f`.
    pub fn evaluate(&self, f: &GridFunction, osc: &dyn OscillationFamily) -> Result<CubeMap<f64>> {
        let tree = f.tree();
        let base = f.base();
        let table = match self {
            CubeFunctional::Table { entries } => {
                let mut map = HashMap::new();
                for e in entries {
                    let cube = DyadicCube::new(e.level, e.coords.clone())?;
                    let idx = tree.locate(&cube)?;
                    map.insert((e.level, idx), e.value);
                }
                let mut missing = None;
                let table = CubeMap::from_fn(tree, |j, idx| {
                    *map.get(&(j, idx)).unwrap_or_else(|| {
                        missing.get_or_insert((j, idx));
                        &f64::NAN
                    })
                });
                if let Some((j, idx)) = missing {
                    return Err(invalid(format!(
                        "functional table has no entry for cube {}",
                        tree.cube(j, idx)
                    )));
                }
                table
            }
            CubeFunctional::Constant { value } => CubeMap::from_fn(tree, |_, _| *value),
            CubeFunctional::SidePower { coefficient, exponent } => CubeMap::from_fn(tree, |j, idx| {
                coefficient * tree.cube(j, idx).side(base).powf(*exponent)
            }),
            CubeFunctional::Tight => osc.oscillation_table(f)?,
            CubeFunctional::Poincare { density, exponent } => {
                if !(*exponent > 0.0) {
                    return Err(invalid("Poincaré exponent must be positive"));
                }
                let g = f.with_values(density.iter().map(|v| v.abs().powf(*exponent)).collect())?;
                let avgs = g.averages();
                avgs.map(|j, idx, &m| tree.cube(j, idx).side(base) * m.powf(1.0 / exponent))
            }
            CubeFunctional::Gr { epsilon } => {
                let avgs = f.averages();
                avgs.map(|_, _, &m| epsilon * m)
            }
        };
        if let Some((j, idx, v)) = table.iter().find(|(_, _, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!(
                "functional value {v} on cube {} is not finite and nonnegative",
                tree.cube(j, idx)
            )));
        }
        Ok(table)
    }
}

/// DP over weights `a(Q)^p |Q|/|Q0|`.
pub fn dp_dp(a: &CubeMap<f64>, p: f64) -> AntichainDp<f64> {
    jn_dp(a, p)
}

fn dp_ratio(best_scaled: f64, a: f64, p: f64) -> f64 {
    if a > 0.0 {
        best_scaled.powf(1.0 / p) / a
    } else if best_scaled > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `‖a‖_{D_p, Q}` for the cube at `(level, coords)` of the tree of `a`.
pub fn dp_norm(a: &CubeMap<f64>, p: f64, q: &DyadicCube) -> Result<f64> {
    check_p(p)?;
    let tree = a.tree();
    let idx = tree.locate(q)?;
    let dp = dp_dp(a, p);
    let scaled = dp.best(q.level, idx) * tree.level_len(q.level) as f64;
    Ok(dp_ratio(scaled, *a.get(q.level, idx), p))
}

/// `‖a‖_{D_p, Q}` for every cube.
pub fn dp_profile(a: &CubeMap<f64>, p: f64) -> Result<CubeMap<f64>> {
    check_p(p)?;
    let tree = a.tree();
    let dp = dp_dp(a, p);
    Ok(dp
        .best_table()
        .map(|j, idx, &b| dp_ratio(b * tree.level_len(j) as f64, *a.get(j, idx), p)))
}

/// `‖a‖_{D_p(Q0)} = sup_Q ‖a‖_{D_p, Q}` over the whole tree.
pub fn dp_sup_norm(a: &CubeMap<f64>, p: f64) -> Result<SupNorm> {
    let (value, argmax) = sup_of(&dp_profile(a, p)?);
    Ok(SupNorm { value, argmax })
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub p: f64,
    pub theta: f64,
    /// `‖B_Q f‖_{L^{p,∞}, Q}`.
    pub weak_norm: f64,
    pub jn_norm: f64,
    pub ratio: f64,
    /// Proof-derived constant `2 C_{p, 2^n C_B, 0}`.
    pub constant: f64,
    pub pass: bool,
    /// `‖M^#_Q f‖_{L^{p,∞}, Q}`.
    pub sharp_weak_norm: f64,
    /// `‖M^# f‖_weak^p / ‖f‖_JN^p`; at most one up to rounding.
    pub chain_ratio: f64,
    pub chain_pass: bool,
}

/// Relative slack for float comparisons of quantities computed by different
/// summation orders. Exact comparisons run in rational arithmetic.
pub const FLOAT_SLACK: f64 = 1e-12;

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Weak-type embedding of `JN_p` on `q`, with the sharp-maximal chain.
pub fn verify_weak_embedding(
    f: &GridFunction,
    p: f64,
    q: &DyadicCube,
    osc: &dyn OscillationFamily,
) -> Result<EmbeddingReport> {
    check_p(p)?;
    let g = f.restrict(q)?;
    let table = osc.oscillation_table(&g)?;
    let dp = jn_dp(&table, p);
    let jn_pow = *dp.best(0, 0);
    let jn = jn_pow.powf(1.0 / p);
    let weak = weak_lp_of(&osc.residual(&g, &g.root())?, p)?;
    let theta = g.tree().arity() as f64 * osc.constant();
    let constant = 2.0 * derive_constant(p, theta, 0.0)?.constant;
    let sharp = sup_over_ancestors(&table, true);
    let sharp_pow = weak_lp_pow_of(&sharp, p)?;
    let chain_ratio = ratio(sharp_pow, jn_pow);
    let r = ratio(weak, jn);
    Ok(EmbeddingReport {
        p,
        theta,
        weak_norm: weak,
        jn_norm: jn,
        ratio: r,
        constant,
        pass: r <= constant,
        sharp_weak_norm: weak_lp_of(&sharp, p)?,
        chain_ratio,
        chain_pass: sharp_pow <= jn_pow * (1.0 + FLOAT_SLACK),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisViolation {
    pub cube: DyadicCube,
    pub oscillation: f64,
    pub functional: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FpwReport {
    pub p: f64,
    pub hypothesis_pass: bool,
    pub violations: Vec<HypothesisViolation>,
    pub dp_sup_norm: f64,
    pub constant: f64,
    /// Max over cubes of `‖B_Q f‖_weak / (‖a‖_{D_p} a(Q))`.
    pub worst_ratio: f64,
    pub worst_cube: Option<DyadicCube>,
    pub weak_pass: bool,
    /// `‖f‖_{JN_p,Q} ≤ ‖a‖_{D_p,Q} a(Q)` on every cube, compared exactly as
    /// antichain maxima.
    pub chain_pass: bool,
    pub cubes_checked: usize,
    pub pass: bool,
}

const MAX_LISTED_VIOLATIONS: usize = 32;

/// Self-improvement of `⨍_Q |B_Q f| ≤ a(Q)` to weak `L^p` on every cube.
/// `a` is indexed by the cubes of the grid of `f`.
pub fn verify_fpw(f: &GridFunction, a: &CubeMap<f64>, p: f64, osc: &dyn OscillationFamily) -> Result<FpwReport> {
    check_p(p)?;
    let tree = f.tree();
    if a.tree() != tree {
        return Err(invalid("functional and function live on different grids"));
    }
    let table = osc.oscillation_table(f)?;
    let mut violations = Vec::new();
    let mut violation_count = 0usize;
    for (j, idx, &o) in table.iter() {
        let av = *a.get(j, idx);
        if !(o <= av) {
            violation_count += 1;
            if violations.len() < MAX_LISTED_VIOLATIONS {
                violations.push(HypothesisViolation {
                    cube: tree.cube(j, idx),
                    oscillation: o,
                    functional: av,
                });
            }
        }
    }
    let dp_sup = dp_sup_norm(a, p)?.value;
    let theta = tree.arity() as f64 * osc.constant();
    let constant = 2.0 * derive_constant(p, theta, 0.0)?.constant;

    let f_dp = jn_dp(&table, p);
    let a_dp = dp_dp(a, p);
    let mut chain_pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_cube = None;
    let mut cubes_checked = 0;
    for j in 0..=tree.depth() {
        for idx in 0..tree.level_len(j) {
            cubes_checked += 1;
            if f_dp.best(j, idx) > a_dp.best(j, idx) {
                chain_pass = false;
            }
            let cube = tree.cube(j, idx);
            let weak = weak_lp_of(&osc.residual(f, &cube)?, p)?;
            let r = ratio(weak, dp_sup * a.get(j, idx));
            if r > worst_ratio {
                worst_ratio = r;
                worst_cube = Some(cube);
            }
        }
    }
    let hypothesis_pass = violation_count == 0;
    let weak_pass = worst_ratio <= constant;
    Ok(FpwReport {
        p,
        hypothesis_pass,
        violations,
        dp_sup_norm: dp_sup,
        constant,
        worst_ratio,
        worst_cube,
        weak_pass,
        chain_pass,
        cubes_checked,
        pass: hypothesis_pass && weak_pass && chain_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillations::MeanFamily;

    fn grid(depth: u32, v: &[f64]) -> GridFunction {
        GridFunction::on_unit_cube(1, depth, v.to_vec()).unwrap()
    }

    #[test]
    fn jn_examples() {
        let f = grid(1, &[0.0, 1.0]);
        for p in [1.5, 2.0, 4.0] {
            assert!((jn_norm(&f, p, &f.root(), &MeanFamily).unwrap() - 0.5).abs() < 1e-15);
        }
        let c = grid(3, &[2.0; 8]);
        assert_eq!(jn_norm(&c, 2.0, &c.root(), &MeanFamily).unwrap(), 0.0);
        let s = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        assert_eq!(jn_norm(&s, 2.0, &s.root(), &MeanFamily).unwrap(), 1.5);
        assert!(jn_norm(&s, 1.0, &s.root(), &MeanFamily).is_err());
    }

    #[test]
    fn jn_sup_examples() {
        let s = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let sup = jn_sup_norm(&s, 2.0, &s.root(), &MeanFamily).unwrap();
        // each cube is normalized by its own volume, so the right half
        // (oscillation 2) beats the root (oscillation 1.5).
        let right = DyadicCube::new(1, vec![1]).unwrap();
        assert_eq!(sup.value, 2.0);
        assert_eq!(sup.argmax, right);
        assert_eq!(jn_norm(&s, 2.0, &right, &MeanFamily).unwrap(), 2.0);
        let scaled = s.map(|v| -3.0 * v).unwrap();
        let sup3 = jn_sup_norm(&scaled, 2.0, &s.root(), &MeanFamily).unwrap();
        assert!((sup3.value - 6.0).abs() < 1e-14);
    }

    #[test]
    fn dp_examples() {
        let f = grid(1, &[0.0, 0.0]);
        let side = CubeFunctional::SidePower {
            coefficient: 1.0,
            exponent: 1.0,
        };
        let a = side.evaluate(&f, &MeanFamily).unwrap();
        assert_eq!(dp_norm(&a, 2.0, &f.root()).unwrap(), 1.0);
        let vol = CubeFunctional::SidePower {
            coefficient: 1.0,
            exponent: 1.0,
        };
        assert_eq!(
            dp_sup_norm(&vol.evaluate(&f, &MeanFamily).unwrap(), 2.0).unwrap().value,
            1.0
        );
        let g = grid(4, &[0.0; 16]);
        let c = CubeFunctional::Constant { value: 0.7 }
            .evaluate(&g, &MeanFamily)
            .unwrap();
        assert!((dp_norm(&c, 3.0, &g.root()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dp_zero_conventions() {
        let tree = Tree::new(1, 1).unwrap();
        let a = CubeMap::from_levels(tree, vec![vec![0.0], vec![1.0, 0.0]]);
        assert_eq!(dp_norm(&a, 2.0, &DyadicCube::root(1)).unwrap(), f64::INFINITY);
        let z = CubeMap::from_levels(tree, vec![vec![0.0], vec![0.0, 0.0]]);
        assert_eq!(dp_norm(&z, 2.0, &DyadicCube::root(1)).unwrap(), 0.0);
    }

    #[test]
    fn bmo_examples() {
        assert_eq!(
            bmo_dyadic_norm(&grid(1, &[0.0, 1.0]), &DyadicCube::root(1)).unwrap(),
            0.5
        );
        assert_eq!(bmo_dyadic_norm(&grid(2, &[5.0; 4]), &DyadicCube::root(1)).unwrap(), 0.0);
        assert_eq!(
            bmo_dyadic_norm(&grid(2, &[0.0, 0.0, 0.0, 4.0]), &DyadicCube::root(1)).unwrap(),
            2.0
        );
    }

    #[test]
    fn optimal_family_attains_best() {
        let s = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let table = MeanFamily.oscillation_table(&s).unwrap();
        let dp = jn_dp(&table, 2.0);
        assert_eq!(dp.optimal_family(0, 0), vec![(0, 0)]);
        assert_eq!(dp.optimal_family(1, 1), vec![(1, 1)]);
    }

    #[test]
    fn embedding_and_fpw_on_spike() {
        let s = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let e = verify_weak_embedding(&s, 2.0, &s.root(), &MeanFamily).unwrap();
        assert!(e.pass && e.chain_pass, "{e:?}");
        let a = CubeFunctional::Tight.evaluate(&s, &MeanFamily).unwrap();
        let r = verify_fpw(&s, &a, 2.0, &MeanFamily).unwrap();
        assert!(r.pass, "{r:?}");
        let c = grid(2, &[1.0; 4]);
        let e = verify_weak_embedding(&c, 2.0, &c.root(), &MeanFamily).unwrap();
        assert_eq!((e.weak_norm, e.jn_norm, e.ratio), (0.0, 0.0, 0.0));
        assert!(e.pass);
    }

    #[test]
    fn fpw_reports_violations() {
        let s = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let a = CubeFunctional::Constant { value: 0.5 }
            .evaluate(&s, &MeanFamily)
            .unwrap();
        let r = verify_fpw(&s, &a, 2.0, &MeanFamily).unwrap();
        assert!(!r.hypothesis_pass);
        assert!(!r.violations.is_empty());
    }
}
