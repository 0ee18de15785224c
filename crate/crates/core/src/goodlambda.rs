//! The abstract good-λ engine on dyadic cubes and its Gurov–Reshetnyak
//! application.
//!
//! A [`Decomposition`] packages a nonnegative `F` together with, for every
//! non-root cube `Q`, functions `G^Q, H^Q` on `Q` and a number `g^Q`, plus
//! constants `Θ ≥ 1` and `0 ≤ δ < 1/2`. When
//!
//! 1. `F ≤ G^Q + H^Q` on `Q`,
//! 2. `sup_Q H^Q ≤ Θ ⨍_{Q̂} F`,
//! 3. `⨍_Q G^Q ≤ δ ⨍_{Q̂} F + g^Q`,
//!
//! the level sets of the dyadic maximal function of `F` obey
//! `|{MF > Kλ, G* ≤ γλ}| ≤ (δ+γ)/(K−Θ) |{MF > λ}|`, which integrates to
//! weak and strong `L^p` bounds for `1 < p < 1 + log(1/(2δ))/log(2Θ)`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::czmax::{dyadic_maximal_values, sup_over_ancestors};
use crate::dyadic::{averages, local_mean, CubeMap, DyadicCube, GridFunction, Tree};
use crate::error::{invalid, Error, Result};
use crate::norms::{lp_of, weak_lp_of};
use crate::oscillations::{mean_oscillation_table, OscillationFamily};
use crate::scalar::Scalar;

/// Default relative slack for hypothesis checks in floating point.
pub const HYPOTHESIS_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PRange {
    pub lower: f64,
    /// `+∞` when `δ = 0`.
    pub upper: f64,
}

fn check_theta_delta(theta: f64, delta: f64) -> Result<()> {
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(invalid(format!("Θ must be finite and ≥ 1, got {theta}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(invalid(format!("δ must be finite and ≥ 0, got {delta}")));
    }
    if delta >= 0.5 {
        return Err(invalid(format!("δ = {delta} ≥ 1/2 leaves no admissible exponent")));
    }
    Ok(())
}

/// The open interval `(1, 1 + log(1/(2δ))/log(2Θ))`.
pub fn admissible_p_range(theta: f64, delta: f64) -> Result<PRange> {
    check_theta_delta(theta, delta)?;
    let upper = if delta == 0.0 {
        f64::INFINITY
    } else {
        1.0 + (1.0 / (2.0 * delta)).ln() / (2.0 * theta).ln()
    };
    Ok(PRange { lower: 1.0, upper })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantChoice {
    pub p: f64,
    pub theta: f64,
    pub delta: f64,
    /// `K = 2Θ`.
    pub k: f64,
    pub gamma: f64,
    /// Absorption ratio `(2Θ)^p (δ+γ)/Θ < 1`.
    pub r: f64,
    pub constant: f64,
}

/// Explicit constant for the weak and strong `L^p` bounds.
///
/// With `K = 2Θ`, `γ` at the midpoint of `(0, Θ(2Θ)^{-p} − δ)` and
/// `r = (2Θ)^p(δ+γ)/Θ`, the truncated integrals satisfy
/// `I ≤ r I + (2Θ)^p γ^{-p} ‖G*‖^p + (2Θ)^p F_{Q0}^p`, so
/// `C = 2Θ · max(1, 1/γ) · (1 − r)^{-1/p}`. `p = 1` is accepted; the same
/// argument goes through there.
pub fn derive_constant(p: f64, theta: f64, delta: f64) -> Result<ConstantChoice> {
    let range = admissible_p_range(theta, delta)?;
    if !(p.is_finite() && p >= 1.0 && p < range.upper) {
        return Err(invalid(format!(
            "p = {p} is outside [1, {}) for Θ = {theta}, δ = {delta}",
            range.upper
        )));
    }
    let k = 2.0 * theta;
    let gamma = (theta * k.powf(-p) - delta) / 2.0;
    if !(gamma > 0.0) {
        return Err(Error::Numerical(format!(
            "no room for γ at p = {p}, Θ = {theta}, δ = {delta}"
        )));
    }
    let r = k.powf(p) * (delta + gamma) / theta;
    let constant = k * (1.0f64).max(1.0 / gamma) * (1.0 - r).powf(-1.0 / p);
    Ok(ConstantChoice {
        p,
        theta,
        delta,
        k,
        gamma,
        r,
        constant,
    })
}

type LocalFn<T> = dyn Fn(u32, usize) -> Result<(Vec<T>, Vec<T>)> + Send + Sync;

/// `F`, the per-cube triples `(G^Q, H^Q, g^Q)` and the constants `(Θ, δ)`.
#[derive(Clone)]
pub struct Decomposition<T: Scalar> {
    name: String,
    tree: Tree,
    theta: T,
    delta: T,
    f: Vec<T>,
    g: CubeMap<T>,
    local: Arc<LocalFn<T>>,
}

impl<T: Scalar> std::fmt::Debug for Decomposition<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decomposition")
            .field("name", &self.name)
            .field("tree", &self.tree)
            .field("theta", &self.theta)
            .field("delta", &self.delta)
            .finish()
    }
}

impl<T: Scalar> Decomposition<T> {
    /// `local(j, idx)` returns `(G^Q, H^Q)` on the leaves of the cube, in
    /// local order. `g` is indexed by cube; its root entry is ignored.
    pub fn new(
        name: impl Into<String>,
        tree: Tree,
        theta: T,
        delta: T,
        f: Vec<T>,
        g: CubeMap<T>,
        local: impl Fn(u32, usize) -> Result<(Vec<T>, Vec<T>)> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_theta_delta(theta.to_f64(), delta.to_f64())?;
        if f.len() != tree.leaf_count() || g.tree() != tree {
            return Err(invalid("decomposition data does not match the grid"));
        }
        if let Some(i) = f.iter().position(|v| *v < T::zero()) {
            return Err(invalid(format!("F must be nonnegative; leaf {i} is negative")));
        }
        Ok(Self {
            name: name.into(),
            tree,
            theta,
            delta,
            f,
            g,
            local: Arc::new(local),
        })
    }

    /// Mean oscillations: `F = |f − f_{Q0}|`, `G^Q = |f − f_Q|`,
    /// `H^Q = |f_Q − f_{Q0}|`, `g^Q = ⨍_Q |f − f_Q|`, `Θ = 2^n`, `δ = 0`.
    pub fn jn(tree: Tree, values: &[T]) -> Result<Self> {
        let avgs = Arc::new(averages(tree, values));
        let root = avgs.root().clone();
        let f: Vec<T> = values.iter().map(|v| (v.clone() - root.clone()).abs()).collect();
        let g = mean_oscillation_table(tree, values);
        let vals: Arc<Vec<T>> = Arc::new(values.to_vec());
        let theta = T::from_u64(tree.arity() as u64);
        Self::new("jn", tree, theta, T::zero(), f, g, move |j, idx| {
            let a = avgs.get(j, idx).clone();
            let leaves = tree.leaves(j, idx);
            let gq = leaves.iter().map(|&l| (vals[l].clone() - a.clone()).abs()).collect();
            let h = (a - root.clone()).abs();
            Ok((gq, vec![h; leaves.len()]))
        })
    }

    /// Gurov–Reshetnyak weights: `F = |w − w_{Q0}|`, `G^Q = |w − w_Q|`,
    /// `H^Q = |w_Q − w_{Q0}|`, `g^Q = ε w_{Q0}`, `Θ = 2^n`, `δ = 2^n ε`.
    pub fn gr(tree: Tree, values: &[T], epsilon: T) -> Result<Self> {
        let mut d = Self::jn(tree, values)?;
        let w0 = averages(tree, values).root().clone();
        let delta = T::from_u64(tree.arity() as u64) * epsilon.clone();
        check_theta_delta(d.theta.to_f64(), delta.to_f64())?;
        d.name = "gr".into();
        d.delta = delta;
        d.g = CubeMap::from_fn(tree, |_, _| epsilon.clone() * w0.clone());
        Ok(d)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn theta(&self) -> &T {
        &self.theta
    }

    pub fn delta(&self) -> &T {
        &self.delta
    }

    pub fn f(&self) -> &[T] {
        &self.f
    }

    pub fn g_table(&self) -> &CubeMap<T> {
        &self.g
    }

    pub fn local(&self, j: u32, idx: usize) -> Result<(Vec<T>, Vec<T>)> {
        let (gq, hq) = (self.local)(j, idx)?;
        let n = self.tree.leaves_per_cube(j);
        if gq.len() != n || hq.len() != n {
            return Err(invalid(format!(
                "provider returned {} / {} values on a cube with {n} leaves",
                gq.len(),
                hq.len()
            )));
        }
        Ok((gq, hq))
    }

    /// `M F` at every leaf.
    pub fn maximal(&self) -> Vec<T> {
        dyadic_maximal_values(self.tree, &self.f)
    }

    /// `G*(x) = sup of g^Q over non-root cubes Q ∋ x`.
    pub fn g_star(&self) -> Vec<T> {
        sup_over_ancestors(&self.g, false)
    }

    pub fn f_average(&self) -> T {
        averages(self.tree, &self.f).root().clone()
    }
}

impl Decomposition<f64> {
    /// Local-oscillation version of [`Decomposition::jn`]: `F = |B_{Q0} f|`,
    /// `G^Q = |B_Q f|`, `H^Q = |A_Q f − A_{Q0} f|`, `g^Q = ⨍_Q |B_Q f|`,
    /// `Θ = 2^n C_B`, `δ = 0`.
    pub fn jn_oscillation(f: &GridFunction, osc: Arc<dyn OscillationFamily>) -> Result<Self> {
        let tree = f.tree();
        let root = f.root();
        let a0 = osc.project(f, &root)?;
        let big_f: Vec<f64> = f.values().iter().zip(&a0).map(|(v, a)| (v - a).abs()).collect();
        let g = osc.oscillation_table(f)?;
        let theta = tree.arity() as f64 * osc.constant();
        let func = f.clone();
        Self::new(
            format!("jn-{}", osc.kind()),
            tree,
            theta,
            0.0,
            big_f,
            g,
            move |j, idx| oscillation_triple(&func, osc.as_ref(), &a0, j, idx),
        )
    }

    /// Local-oscillation Gurov–Reshetnyak: as [`Decomposition::jn_oscillation`]
    /// but `g^Q = ε(1+ε) C_B² ⨍_{Q0} |A_{Q0} w|` and `δ = 2^n ε C_B`.
    pub fn gr_oscillation(w: &GridFunction, osc: Arc<dyn OscillationFamily>, epsilon: f64) -> Result<Self> {
        let cb = osc.constant();
        let tree = w.tree();
        let a0 = osc.project(w, &w.root())?;
        let m0 = local_mean(tree.dim(), &a0.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let mut d = Self::jn_oscillation(w, osc.clone())?;
        d.name = format!("gr-{}", osc.kind());
        d.delta = tree.arity() as f64 * epsilon * cb;
        check_theta_delta(d.theta, d.delta)?;
        let gq = epsilon * (1.0 + epsilon) * cb * cb * m0;
        d.g = CubeMap::from_fn(tree, |_, _| gq);
        Ok(d)
    }

    /// Provider read from JSON (see [`ProviderTable`]).
    pub fn from_table(table: ProviderTable) -> Result<Self> {
        let tree = Tree::new(table.dim, table.depth)?;
        let mut entries = HashMap::new();
        for c in table.cubes {
            let cube = DyadicCube::new(c.level, c.coords.clone())?;
            let idx = tree.locate(&cube)?;
            if cube.is_root() {
                continue;
            }
            let n = tree.leaves_per_cube(c.level);
            if c.big_g.len() != n || c.h.len() != n {
                return Err(invalid(format!("cube {cube} needs {n} G and H values")));
            }
            entries.insert((c.level, idx), (c.big_g, c.h, c.g));
        }
        let mut g_levels = Vec::new();
        for j in 0..=tree.depth() {
            let mut level = Vec::new();
            for idx in 0..tree.level_len(j) {
                if j == 0 {
                    level.push(0.0);
                    continue;
                }
                let (_, _, g) = entries
                    .get(&(j, idx))
                    .ok_or_else(|| invalid(format!("provider table has no entry for cube {}", tree.cube(j, idx))))?;
                level.push(*g);
            }
            g_levels.push(level);
        }
        let g = CubeMap::from_levels(tree, g_levels);
        let entries = Arc::new(entries);
        Self::new(
            table.name.unwrap_or_else(|| "table".into()),
            tree,
            table.theta,
            table.delta,
            table.f,
            g,
            move |j, idx| {
                let (gq, hq, _) = entries
                    .get(&(j, idx))
                    .ok_or_else(|| invalid("no entry for the root cube"))?;
                Ok((gq.clone(), hq.clone()))
            },
        )
    }
}

fn oscillation_triple(
    f: &GridFunction,
    osc: &dyn OscillationFamily,
    a0: &[f64],
    j: u32,
    idx: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tree = f.tree();
    let cube = tree.cube(j, idx);
    let a = osc.project(f, &cube)?;
    let leaves = tree.leaves(j, idx);
    let gq = leaves.iter().zip(&a).map(|(&l, a)| (f.values()[l] - a).abs()).collect();
    let hq = leaves.iter().zip(&a).map(|(&l, a)| (a - a0[l]).abs()).collect();
    Ok((gq, hq))
}

/// JSON form of a user-supplied decomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProviderTable {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub depth: u32,
    pub theta: f64,
    pub delta: f64,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    pub cubes: Vec<ProviderCube>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProviderCube {
    pub level: u32,
    pub coords: Vec<u64>,
    #[serde(rename = "G")]
    pub big_g: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    #[serde(rename = "F<=G+H")]
    Split,
    #[serde(rename = "H<=theta*F(parent)")]
    HBound,
    #[serde(rename = "G<=delta*F(parent)+g")]
    GBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionViolation {
    pub cube: DyadicCube,
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub provider: String,
    pub theta: f64,
    pub delta: f64,
    pub exact: bool,
    pub tolerance: f64,
    pub cubes_checked: usize,
    pub violation_count: usize,
    pub violations: Vec<ConditionViolation>,
    /// Smallest `rhs − lhs` seen for each of the three conditions.
    pub min_slack: [f64; 3],
    pub pass: bool,
}

const MAX_LISTED: usize = 32;

/// Checks the three hypotheses on every non-root cube. In floating point a
/// relative slack of `tolerance` absorbs rounding; rational checks are exact.
pub fn check_hypotheses<T: Scalar>(d: &Decomposition<T>, tolerance: f64) -> Result<HypothesisReport> {
    let tree = d.tree;
    let f_avgs = averages(tree, &d.f);
    let mut violations = Vec::new();
    let mut count = 0usize;
    let mut min_slack = [f64::INFINITY; 3];
    let mut cubes_checked = 0;
    let mut note = |cube: &dyn Fn() -> DyadicCube, cond: Condition, lhs: &T, rhs: &T, scale: &T, slot: usize| {
        let slack = (rhs.clone() - lhs.clone()).to_f64();
        min_slack[slot] = min_slack[slot].min(slack);
        if !T::le_within(lhs, rhs, scale, tolerance) {
            count += 1;
            if violations.len() < MAX_LISTED {
                violations.push(ConditionViolation {
                    cube: cube(),
                    condition: cond,
                    lhs: lhs.to_f64(),
                    rhs: rhs.to_f64(),
                });
            }
        }
    };
    for j in 1..=tree.depth() {
        for idx in 0..tree.level_len(j) {
            cubes_checked += 1;
            let cube = || tree.cube(j, idx);
            let (gq, hq) = d.local(j, idx)?;
            let leaves = tree.leaves(j, idx);
            for ((l, gv), hv) in leaves.iter().zip(&gq).zip(&hq) {
                let rhs = gv.clone() + hv.clone();
                note(&cube, Condition::Split, &d.f[*l], &rhs, &rhs, 0);
            }
            let parent_avg = f_avgs.get(j - 1, tree.parent(j, idx)).clone();
            let hmax = hq.iter().cloned().fold(T::zero(), |m, v| m.max(v));
            let rhs = d.theta.clone() * parent_avg.clone();
            note(&cube, Condition::HBound, &hmax, &rhs, &rhs.clone().max(hmax.clone()), 1);
            let gmean = local_mean(tree.dim(), &gq);
            let rhs = d.delta.clone() * parent_avg + d.g.get(j, idx).clone();
            note(
                &cube,
                Condition::GBound,
                &gmean,
                &rhs,
                &rhs.clone().max(gmean.clone()),
                2,
            );
        }
    }
    Ok(HypothesisReport {
        provider: d.name.clone(),
        theta: d.theta.to_f64(),
        delta: d.delta.to_f64(),
        exact: T::is_exact(),
        tolerance: if T::is_exact() { 0.0 } else { tolerance },
        cubes_checked,
        violation_count: count,
        violations,
        min_slack,
        pass: count == 0,
    })
}

/// `G*` for a provider, as a grid function on the base cube of `like`.
pub fn g_star(d: &Decomposition<f64>, like: &GridFunction) -> Result<GridFunction> {
    like.with_values(d.g_star())
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetPoint {
    pub k: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Leaf counts of `E = {MF > Kλ, G* ≤ γλ}` and `Ω = {MF > λ}`.
    pub e_count: usize,
    pub omega_count: usize,
    pub e_fraction: f64,
    pub omega_fraction: f64,
    /// `(δ+γ)/(K−Θ) |Ω|/|Q0|`.
    pub bound_fraction: f64,
    /// `|E|(K−Θ) / ((δ+γ)|Ω|)`; the inequality asks for at most 1.
    pub ratio: f64,
    pub pass: bool,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodLambdaReport {
    pub provider: String,
    pub theta: f64,
    pub delta: f64,
    pub exact: bool,
    pub f_average: f64,
    pub points: Vec<LevelSetPoint>,
    pub evaluated: usize,
    pub skipped: usize,
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Evaluates the level-set inequality on the `(K, γ, λ)` grid. The leaf
/// counts are exact; the comparison is exact whenever `T` is.
pub fn verify_levelset_inequality<T: Scalar>(
    d: &Decomposition<T>,
    ks: &[T],
    gammas: &[T],
    lambdas: &[T],
) -> GoodLambdaReport {
    let mf = d.maximal();
    let gs = d.g_star();
    let favg = d.f_average();
    let n = mf.len();
    let mut points = Vec::new();
    let (mut evaluated, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
    let mut pass = true;
    for k in ks {
        for gamma in gammas {
            for lambda in lambdas {
                let mut point = LevelSetPoint {
                    k: k.to_f64(),
                    gamma: gamma.to_f64(),
                    lambda: lambda.to_f64(),
                    e_count: 0,
                    omega_count: 0,
                    e_fraction: 0.0,
                    omega_fraction: 0.0,
                    bound_fraction: 0.0,
                    ratio: 0.0,
                    pass: true,
                    skipped: None,
                };
                let reason = if *lambda < favg {
                    Some("λ below the average of F")
                } else if *k <= d.theta {
                    Some("K not above Θ")
                } else if !(*gamma > T::zero() && *gamma < T::one()) {
                    Some("γ outside (0, 1)")
                } else {
                    None
                };
                if let Some(r) = reason {
                    point.skipped = Some(r.to_string());
                    skipped += 1;
                    points.push(point);
                    continue;
                }
                evaluated += 1;
                let kl = k.clone() * lambda.clone();
                let gl = gamma.clone() * lambda.clone();
                let omega = mf.iter().filter(|m| **m > *lambda).count();
                let e = mf.iter().zip(&gs).filter(|(m, g)| **m > kl && **g <= gl).count();
                let lhs = T::from_u64(e as u64) * (k.clone() - d.theta.clone());
                let rhs = (d.delta.clone() + gamma.clone()) * T::from_u64(omega as u64);
                point.pass = lhs <= rhs;
                point.e_count = e;
                point.omega_count = omega;
                point.e_fraction = e as f64 / n as f64;
                point.omega_fraction = omega as f64 / n as f64;
                let factor = (d.delta.clone() + gamma.clone()) / (k.clone() - d.theta.clone());
                point.bound_fraction = factor.to_f64() * point.omega_fraction;
                point.ratio = if e == 0 { 0.0 } else { (lhs / rhs).to_f64() };
                worst = worst.max(point.ratio);
                pass &= point.pass;
                points.push(point);
            }
        }
    }
    GoodLambdaReport {
        provider: d.name.clone(),
        theta: d.theta.to_f64(),
        delta: d.delta.to_f64(),
        exact: T::is_exact(),
        f_average: favg.to_f64(),
        points,
        evaluated,
        skipped,
        worst_ratio: worst,
        pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormSides {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub provider: String,
    pub p: f64,
    pub choice: ConstantChoice,
    pub f_average: f64,
    /// `‖MF‖_{L^{p,∞}} ≤ C‖G*‖_{L^{p,∞}} + C F_{Q0}`.
    pub weak: NormSides,
    /// `‖MF‖_{L^p} ≤ C‖G*‖_{L^p} + C F_{Q0}`.
    pub strong: NormSides,
    /// `‖F‖_{L^p} ≤ ‖MF‖_{L^p}`, exact because `F ≤ MF` leafwise.
    pub f_below_maximal: NormSides,
    pub pass: bool,
}

pub fn verify_norm_inequalities(d: &Decomposition<f64>, p: f64) -> Result<NormReport> {
    let choice = derive_constant(p, d.theta, d.delta)?;
    let c = choice.constant;
    let mf = d.maximal();
    let gs = d.g_star();
    let favg = d.f_average();
    let sides = |lhs: f64, rhs: f64| NormSides {
        lhs,
        rhs,
        pass: lhs <= rhs,
    };
    let weak = sides(weak_lp_of(&mf, p)?, c * weak_lp_of(&gs, p)? + c * favg);
    let strong = sides(lp_of(&mf, p)?, c * lp_of(&gs, p)? + c * favg);
    let dim = d.tree.dim();
    let powered = |v: &[f64]| local_mean(dim, &v.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>());
    let f_below = sides(powered(&d.f).powf(1.0 / p), powered(&mf).powf(1.0 / p));
    let pass = weak.pass && strong.pass && f_below.pass;
    Ok(NormReport {
        provider: d.name.clone(),
        p,
        choice,
        f_average: favg,
        weak,
        strong,
        f_below_maximal: f_below,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrEpsilon {
    /// `+∞` when some cube has zero denominator and nonzero oscillation.
    pub epsilon: f64,
    pub witness: Option<DyadicCube>,
}

/// Smallest `ε` with `⨍_Q |B_Q w| ≤ ε D_Q` on every cube, where `D_Q = w_Q`
/// (no family given) or `⨍_Q |A_Q w|`. Cubes with `0/0` impose nothing.
pub fn gr_epsilon(w: &GridFunction, osc: Option<&dyn OscillationFamily>) -> Result<GrEpsilon> {
    let (num, den) = match osc {
        None => {
            if let Some(i) = w.values().iter().position(|v| *v < 0.0) {
                return Err(invalid(format!("weight must be nonnegative; leaf {i} is negative")));
            }
            (mean_oscillation_table(w.tree(), w.values()), w.averages())
        }
        Some(o) => (o.oscillation_table(w)?, o.projection_mass_table(w)?),
    };
    let tree = w.tree();
    let mut eps = 0.0f64;
    let mut witness = None;
    for (j, idx, &n) in num.iter() {
        let dq = *den.get(j, idx);
        let r = if dq > 0.0 {
            n / dq
        } else if n > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if r > eps {
            eps = r;
            witness = Some(tree.cube(j, idx));
        }
    }
    Ok(GrEpsilon { epsilon: eps, witness })
}

/// Smallest `ε` with `⨍_Q |w - w_Q| ≤ ε w_{Q̂}` on every non-root cube,
/// comparing with the parent average. No smallness threshold is attached.
pub fn weak_gr_epsilon_dyadic(w: &GridFunction) -> Result<GrEpsilon> {
    if let Some(i) = w.values().iter().position(|v| *v < 0.0) {
        return Err(invalid(format!("weight must be nonnegative; leaf {i} is negative")));
    }
    let tree = w.tree();
    let num = mean_oscillation_table(tree, w.values());
    let avg = w.averages();
    let mut eps = 0.0f64;
    let mut witness = None;
    for (j, idx, &n) in num.iter() {
        if j == 0 {
            continue;
        }
        let parent = *avg.get(j - 1, tree.parent(j, idx));
        let r = if parent > 0.0 {
            n / parent
        } else if n > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if r > eps {
            eps = r;
            witness = Some(tree.cube(j, idx));
        }
    }
    Ok(GrEpsilon { epsilon: eps, witness })
}

/// Exact `ε` for the mean family; `None` means `+∞`.
pub fn gr_epsilon_exact<T: Scalar>(tree: Tree, values: &[T]) -> Option<T> {
    let num = mean_oscillation_table(tree, values);
    let den = averages(tree, values);
    let mut eps = T::zero();
    for (j, idx, n) in num.iter() {
        let dq = den.get(j, idx);
        if *dq > T::zero() {
            eps = eps.max(n.clone() / dq.clone());
        } else if *n > T::zero() {
            return None;
        }
    }
    Some(eps)
}

/// `(1/(n+1)) log2(1/ε)`.
pub fn gr_exponent_classical(dim: usize, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return f64::INFINITY;
    }
    (1.0 / epsilon).log2() / (dim as f64 + 1.0)
}

/// `log(1/ε)/log(2^{n+1} C_B)`.
pub fn gr_exponent_oscillation(dim: usize, cb: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return f64::INFINITY;
    }
    (1.0 / epsilon).ln() / (2f64.powi(dim as i32 + 1) * cb).ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct GrReport {
    pub family: String,
    pub epsilon: f64,
    pub epsilon_witness: Option<DyadicCube>,
    pub threshold: f64,
    pub applicable: bool,
    pub p_of_eps: f64,
    pub p: f64,
    /// Constant in the `L^p` oscillation bound.
    pub oscillation_constant: f64,
    /// Constant in the reverse Hölder bound.
    pub reverse_holder_constant: f64,
    /// Max over cubes of `(⨍|B_Q w|^p)^{1/p} / (ε D_Q)`.
    pub worst_oscillation_ratio: f64,
    /// Max over cubes of `(⨍ w^p)^{1/p} / w_Q`.
    pub worst_reverse_holder_ratio: f64,
    pub oscillation_pass: bool,
    pub reverse_holder_pass: bool,
    pub pass: bool,
}

/// Higher integrability of a Gurov–Reshetnyak weight on every cube.
///
/// Reports `applicable = false` (and claims nothing) when `ε` is not below
/// the smallness threshold. Errors if `p` is outside `[1, p(ε))`.
pub fn gr_self_improve(w: &GridFunction, osc: Option<&dyn OscillationFamily>, p: f64) -> Result<GrReport> {
    let eps = gr_epsilon(w, osc)?;
    let n = w.dim();
    let arity = w.tree().arity() as f64;
    let cb = osc.map_or(1.0, |o| o.constant());
    let (threshold, p_eps) = match osc {
        None => (2f64.powi(-(n as i32 + 1)), gr_exponent_classical(n, eps.epsilon)),
        Some(_) => (
            2f64.powi(-(n as i32 + 2)) / cb,
            gr_exponent_oscillation(n, cb, eps.epsilon),
        ),
    };
    let family = osc.map_or("classical".to_string(), |o| o.kind().to_string());
    let mut report = GrReport {
        family,
        epsilon: eps.epsilon,
        epsilon_witness: eps.witness.clone(),
        threshold,
        applicable: eps.epsilon < threshold,
        p_of_eps: p_eps,
        p,
        oscillation_constant: f64::NAN,
        reverse_holder_constant: f64::NAN,
        worst_oscillation_ratio: 0.0,
        worst_reverse_holder_ratio: 0.0,
        oscillation_pass: true,
        reverse_holder_pass: true,
        pass: true,
    };
    if !report.applicable {
        return Ok(report);
    }
    if !(p >= 1.0 && p < p_eps) {
        return Err(invalid(format!("p = {p} must lie in [1, {p_eps})")));
    }
    let e = eps.epsilon;
    let (c_osc, c_rh) = match osc {
        None => {
            let c = 2.0 * derive_constant(p, arity, arity * e)?.constant;
            (c, 1.0 + c * e)
        }
        Some(_) => {
            let c = derive_constant(p, arity * cb, arity * e * cb)?.constant * ((1.0 + e) * cb * cb + 1.0);
            (c, (1.0 + c * e) * cb)
        }
    };
    report.oscillation_constant = c_osc;
    report.reverse_holder_constant = c_rh;
    let tree = w.tree();
    let dim = tree.dim();
    let plp = |v: &[f64]| local_mean(dim, &v.iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>()).powf(1.0 / p);
    for j in 0..=tree.depth() {
        for idx in 0..tree.level_len(j) {
            let cube = tree.cube(j, idx);
            let local = w.local_values(&cube)?;
            let (resid, denom) = match osc {
                None => {
                    let m = local_mean(dim, &local);
                    (local.iter().map(|v| v - m).collect::<Vec<_>>(), m)
                }
                Some(o) => {
                    let a = o.project(w, &cube)?;
                    let mass = local_mean(dim, &a.iter().map(|v| v.abs()).collect::<Vec<_>>());
                    (local.iter().zip(&a).map(|(v, a)| v - a).collect(), mass)
                }
            };
            let lhs = plp(&resid);
            let r = ratio(lhs, e * denom);
            report.worst_oscillation_ratio = report.worst_oscillation_ratio.max(r);
            let wq = local_mean(dim, &local);
            let rh = ratio(plp(&local), wq);
            report.worst_reverse_holder_ratio = report.worst_reverse_holder_ratio.max(rh);
        }
    }
    report.oscillation_pass = report.worst_oscillation_ratio <= c_osc;
    report.reverse_holder_pass = report.worst_reverse_holder_ratio <= c_rh;
    report.pass = report.oscillation_pass && report.reverse_holder_pass;
    Ok(report)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {

    #[test]
    fn dyadic_weak_gr_uses_parent_average() {
        // the right half [1, 3] has oscillation 1 and the root average is 1
        let w = GridFunction::on_unit_cube(1, 2, vec![0.0, 0.0, 1.0, 3.0]).unwrap();
        let e = weak_gr_epsilon_dyadic(&w).unwrap();
        assert_eq!(e.epsilon, 1.0);
        assert_eq!(e.witness.unwrap().level, 1);
        let flat = GridFunction::on_unit_cube(1, 2, vec![2.0; 4]).unwrap();
        assert_eq!(weak_gr_epsilon_dyadic(&flat).unwrap().epsilon, 0.0);
    }
    use super::*;
    use crate::oscillations::{MeanFamily, PolynomialFamily};
    use crate::scalar::Rational;

    fn grid(depth: u32, v: &[f64]) -> GridFunction {
        GridFunction::on_unit_cube(1, depth, v.to_vec()).unwrap()
    }

    #[test]
    fn p_range_examples() {
        assert_eq!(admissible_p_range(3.0, 0.0).unwrap().upper, f64::INFINITY);
        assert!((admissible_p_range(2.0, 0.125).unwrap().upper - 2.0).abs() < 1e-15);
        for n in 1..=3 {
            let eps = 2f64.powi(-9);
            let t = 2f64.powi(n);
            let via_range = admissible_p_range(t, t * eps).unwrap().upper;
            assert!((via_range - gr_exponent_classical(n as usize, eps)).abs() < 1e-12);
        }
        assert!(admissible_p_range(2.0, 0.5).is_err());
    }

    #[test]
    fn constant_examples() {
        let c = derive_constant(2.0, 1.0, 0.0).unwrap();
        assert_eq!(c.gamma, 0.125);
        assert_eq!(c.r, 0.5);
        assert!((c.constant - 16.0 * 2f64.sqrt()).abs() < 1e-12);
        let mut prev = 0.0;
        for p in [1.1, 1.3, 1.5, 2.0, 3.0] {
            let c = derive_constant(p, 2.0, 0.0).unwrap().constant;
            assert!(c.is_finite() && c > prev);
            prev = c;
        }
        assert!(derive_constant(2.5, 2.0, 0.125).is_err());
        let near = derive_constant(1.999, 2.0, 0.125).unwrap().constant;
        assert!(near > derive_constant(1.5, 2.0, 0.125).unwrap().constant * 100.0);
    }

    #[test]
    fn g_star_matches_sharp_maximal_off_the_root() {
        let f = grid(3, &[0.0, 1.0, 5.0, 2.0, 2.0, 3.0, -1.0, 0.5]);
        let d = Decomposition::jn(f.tree(), f.values()).unwrap();
        let table = MeanFamily.oscillation_table(&f).unwrap();
        assert_eq!(d.g_star(), sup_over_ancestors(&table, false));
        let flat = Decomposition::gr(f.tree(), &[1.0; 8], 0.0).unwrap();
        assert!(flat.g_star().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jn_and_gr_providers_satisfy_hypotheses() {
        let f = grid(3, &[0.0, 1.0, 5.0, 2.0, 2.0, 3.0, -1.0, 0.5]);
        let d = Decomposition::jn(f.tree(), f.values()).unwrap();
        assert!(check_hypotheses(&d, HYPOTHESIS_SLACK).unwrap().pass);
        let w = grid(2, &[0.9, 1.1, 0.9, 1.1]);
        let eps = gr_epsilon(&w, None).unwrap().epsilon;
        assert!((eps - 0.1).abs() < 1e-15);
        let d = Decomposition::gr(w.tree(), w.values(), eps).unwrap();
        assert!(check_hypotheses(&d, HYPOTHESIS_SLACK).unwrap().pass);
        let r = verify_norm_inequalities(&d, 1.5).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn exact_providers_pass_without_slack() {
        let vals: Vec<Rational> = [0.3, 1.7, 0.0, 4.0, 2.5, 2.5, 0.1, 9.0]
            .iter()
            .map(|&v| Rational::from_f64(v))
            .collect();
        let tree = Tree::new(1, 3).unwrap();
        let d = Decomposition::jn(tree, &vals).unwrap();
        let h = check_hypotheses(&d, 0.0).unwrap();
        assert!(h.pass && h.exact);
        let fav = d.f_average();
        let lambdas: Vec<Rational> = [1u64, 2, 4]
            .iter()
            .map(|&m| fav.clone() * Rational::from_u64(m))
            .collect();
        let ks = vec![Rational::from_f64(2.2), Rational::from_u64(4)];
        let gammas = vec![Rational::from_f64(0.1), Rational::from_f64(0.5)];
        let report = verify_levelset_inequality(&d, &ks, &gammas, &lambdas);
        assert!(report.pass && report.skipped == 0);
    }

    #[test]
    fn inflated_h_is_reported() {
        let f = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let base = Decomposition::jn(f.tree(), f.values()).unwrap();
        let inner = base.clone();
        let d = Decomposition::new(
            "inflated",
            f.tree(),
            1.0,
            0.0,
            base.f().to_vec(),
            base.g_table().clone(),
            move |j, idx| {
                let (g, h) = inner.local(j, idx)?;
                Ok((g, h.into_iter().map(|v| v * 10.0 + 1.0).collect()))
            },
        )
        .unwrap();
        let r = check_hypotheses(&d, HYPOTHESIS_SLACK).unwrap();
        assert!(!r.pass);
        assert!(r.violations.iter().any(|v| v.condition == Condition::HBound));
    }

    #[test]
    fn levelset_spike_example() {
        let f = grid(2, &[0.0, 0.0, 0.0, 4.0]);
        let d = Decomposition::jn(f.tree(), f.values()).unwrap();
        // F = |f − 1| = [1,1,1,3]; MF = [1.5,1.5,2,3]; G* = [0,0,2,2].
        assert_eq!(d.maximal(), vec![1.5, 1.5, 2.0, 3.0]);
        assert_eq!(d.g_star(), vec![0.0, 0.0, 2.0, 2.0]);
        let r = verify_levelset_inequality(&d, &[4.0], &[0.5], &[1.5]);
        assert!(r.pass);
        assert_eq!(r.points[0].omega_count, 2);
        assert_eq!(r.points[0].e_count, 0);
        let skipped = verify_levelset_inequality(&d, &[1.0], &[0.5], &[1.0]);
        assert_eq!(skipped.skipped, 1);
    }

    #[test]
    fn gr_examples() {
        let w = grid(2, &[0.9, 1.1, 0.9, 1.1]);
        assert!((gr_epsilon(&w, None).unwrap().epsilon - 0.1).abs() < 1e-15);
        assert_eq!(gr_epsilon(&grid(2, &[3.0; 4]), None).unwrap().epsilon, 0.0);
        assert_eq!(gr_epsilon(&grid(1, &[0.0, 4.0]), None).unwrap().epsilon, 1.0);
        assert_eq!(gr_exponent_classical(1, 2f64.powi(-8)), 4.0);
        let c = gr_self_improve(&grid(2, &[3.0; 4]), None, 2.0).unwrap();
        assert!(c.applicable && c.pass && c.p_of_eps.is_infinite());
        assert_eq!(c.worst_oscillation_ratio, 0.0);
    }

    #[test]
    fn gr_self_improvement_small_epsilon() {
        let w = grid(3, &[1.01, 0.99, 1.0, 1.0, 0.995, 1.005, 1.0, 1.0]);
        let r = gr_self_improve(&w, None, 1.5).unwrap();
        assert!(r.applicable && r.pass, "{r:?}");
        let fam = PolynomialFamily::new(1, 3, 1).unwrap();
        let r = gr_self_improve(&w, Some(&fam), 1.2).unwrap();
        assert!(r.pass, "{r:?}");
        let big = grid(1, &[0.0, 4.0]);
        assert!(!gr_self_improve(&big, None, 2.0).unwrap().applicable);
    }
}
