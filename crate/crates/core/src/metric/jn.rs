use super::{weak_lp_sites, Ball, MetricSpace};
use crate::error::{invalid, Result};
use crate::mwis::{max_weight_disjoint, Bitset, MwisResult};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InfOscillation {
    /// Minimizing constant; the smallest data value among ties.
    pub c: f64,
    pub value: f64,
}

fn rho_pow(x: f64, rho: f64) -> f64 {
    if rho == 1.0 {
        x
    } else {
        x.powf(rho)
    }
}

/// `min_c ⨍ |f - c|^ρ` over a site subset. For `ρ ≤ 1` each term is
/// concave between data values, so scanning the data values is exact.
pub(crate) fn inf_osc_sites(space: &MetricSpace, f: &[f64], rho: f64, sites: &[usize]) -> InfOscillation {
    let w = space.weights();
    let total: f64 = sites.iter().map(|&i| w[i]).sum();
    let mut values: Vec<f64> = sites.iter().map(|&i| f[i]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut best = InfOscillation {
        c: values[0],
        value: f64::INFINITY,
    };
    for &c in &values {
        let s: f64 = sites.iter().map(|&i| rho_pow((f[i] - c).abs(), rho) * w[i]).sum();
        let v = s / total;
        if v < best.value {
            best = InfOscillation { c, value: v };
        }
    }
    best
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    Ok(())
}

pub fn inf_oscillation(space: &MetricSpace, f: &[f64], rho: f64, b: &Ball) -> Result<InfOscillation> {
    space.check_values(f, "f")?;
    space.check_ball(b)?;
    check_rho(rho)?;
    Ok(inf_osc_sites(space, f, rho, space.ball_sites(b)))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Up to this many candidates the search runs without a node budget.
    pub exact_limit: usize,
    /// Node budget above `exact_limit`.
    pub node_budget: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            exact_limit: 25,
            node_budget: 2_000_000,
        }
    }
}

/// A weighted candidate: the set whose disjointness matters and its weight.
#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    /// The ball contributing the set (for JN candidates, the τ-dilate).
    pub ball: Ball,
    #[serde(skip)]
    pub set: Bitset,
    pub weight: f64,
}

fn dedup_by_set(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    let mut index: HashMap<Bitset, usize> = HashMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    for c in cands.drain(..) {
        if !(c.weight > 0.0) {
            continue;
        }
        match index.get(&c.set) {
            Some(&i) => {
                if c.weight > out[i].weight {
                    out[i] = c;
                }
            }
            None => {
                index.insert(c.set.clone(), out.len());
                out.push(c);
            }
        }
    }
    out
}

fn search(space: &MetricSpace, cands: &[Candidate], opts: &SearchOptions) -> MwisResult {
    let sets: Vec<Bitset> = cands.iter().map(|c| c.set.clone()).collect();
    let weights: Vec<f64> = cands.iter().map(|c| c.weight).collect();
    // dual-feasible bound: every site charged its measure times the largest
    // weight-per-measure ratio
    let mut union = Bitset::new(space.len());
    let mut ratio = 0.0f64;
    for c in cands {
        union.union_with(&c.set);
        let m: f64 = c.set.iter().map(|i| space.weights()[i]).sum();
        ratio = ratio.max(c.weight / m);
    }
    let lp: f64 = union.iter().map(|i| space.weights()[i]).sum::<f64>() * ratio;
    let budget = (cands.len() > opts.exact_limit).then_some(opts.node_budget);
    max_weight_disjoint(&sets, &weights, budget, Some(lp))
}

/// Candidates for the JN supremum inside `outer`: balls `B_i` with
/// `τB_i ⊂ outer`, weighted by `(inf_c ⨍_{B_i}|f-c|^ρ)^{p/ρ} μ(τB_i)` and
/// keyed by the site set of `τB_i`. Zero weights are dropped and equal
/// dilate sets keep the largest weight.
pub fn jn_candidates(space: &MetricSpace, f: &[f64], p: f64, rho: f64, tau: f64, outer: &Ball) -> Vec<Candidate> {
    let outer_set = space.ball_set(outer);
    let mut osc_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut cands = Vec::new();
    for &c in space.ball_sites(outer) {
        for r in space.radius_events(c, &[1.0, tau], f64::INFINITY) {
            let dil = Ball::new(c, tau * r);
            let set = space.ball_set(&dil);
            if !set.is_subset(&outer_set) {
                continue;
            }
            let k = space.count(c, r);
            let osc = *osc_cache
                .entry((c, k))
                .or_insert_with(|| inf_osc_sites(space, f, rho, space.prefix(c, k)).value);
            let weight = osc.powf(p / rho) * space.measure(&dil);
            cands.push(Candidate {
                ball: Ball::new(c, r),
                set,
                weight,
            });
        }
    }
    dedup_by_set(cands)
}

#[derive(Clone, Debug, Serialize)]
pub struct JnPtrNorm {
    pub value: f64,
    /// Upper bound on the norm; equals `value` when `exact`.
    pub upper: f64,
    pub exact: bool,
    /// Optimal `Σ osc^{p/ρ} μ(τB_i)` before normalization.
    pub best_sum: f64,
    pub candidates: usize,
    /// The balls `B_i` of the optimal family.
    pub family: Vec<Ball>,
    pub nodes: u64,
}

fn check_common(space: &MetricSpace, f: &[f64], p: f64, tau: f64, b: &Ball) -> Result<()> {
    space.check_values(f, "f")?;
    space.check_ball(b)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("p must be positive and finite, got {p}")));
    }
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be >= 1, got {tau}")));
    }
    Ok(())
}

/// `sup (1/μ(B) Σ_i (inf_c ⨍_{B_i}|f-c|^ρ)^{p/ρ} μ(τB_i))^{1/p}` over
/// families of pairwise disjoint `τB_i ⊂ B`.
pub fn jn_ptr_norm(
    space: &MetricSpace,
    f: &[f64],
    p: f64,
    rho: f64,
    tau: f64,
    b: &Ball,
    opts: &SearchOptions,
) -> Result<JnPtrNorm> {
    check_common(space, f, p, tau, b)?;
    check_rho(rho)?;
    let cands = jn_candidates(space, f, p, rho, tau, b);
    let r = search(space, &cands, opts);
    let mb = space.measure(b);
    Ok(JnPtrNorm {
        value: (r.value / mb).powf(1.0 / p),
        upper: (r.upper_bound / mb).powf(1.0 / p),
        exact: r.exact,
        best_sum: r.value,
        candidates: cands.len(),
        family: r.chosen.iter().map(|&i| cands[i].ball).collect(),
        nodes: r.nodes,
    })
}

/// A nonnegative functional on balls.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BallFunctional {
    Constant {
        value: f64,
    },
    /// `coefficient · r^exponent`, with `exponent ≥ 0`.
    RadiusPower {
        coefficient: f64,
        exponent: f64,
    },
    /// `a0(B) = (inf_c ⨍_{τ^{-1}B} |f - c|^ρ)^{1/ρ}`, the smallest
    /// functional satisfying the ρ-Poincaré hypothesis.
    Oscillation {
        rho: f64,
        tau: f64,
    },
}

pub fn a0_functional(rho: f64, tau: f64) -> BallFunctional {
    BallFunctional::Oscillation { rho, tau }
}

impl BallFunctional {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { value } => value >= 0.0 && value.is_finite(),
            Self::RadiusPower { coefficient, exponent } => {
                coefficient >= 0.0 && coefficient.is_finite() && exponent >= 0.0 && exponent.is_finite()
            }
            Self::Oscillation { rho, tau } => rho > 0.0 && rho <= 1.0 && tau >= 1.0 && tau.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid ball functional {self:?}")))
        }
    }

    /// Radius scales at which the functional's value can change.
    fn scales(&self) -> Vec<f64> {
        match *self {
            Self::Oscillation { tau, .. } => vec![1.0, 1.0 / tau],
            _ => vec![1.0],
        }
    }

    pub fn eval(&self, space: &MetricSpace, f: &[f64], b: &Ball) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::RadiusPower { coefficient, exponent } => coefficient * b.radius.powf(exponent),
            Self::Oscillation { rho, tau } => {
                let inner = b.dilate(1.0 / tau);
                let k = space.ball_count(&inner);
                if k == 0 {
                    return 0.0;
                }
                inf_osc_sites(space, f, rho, space.prefix(b.center, k))
                    .value
                    .powf(1.0 / rho)
            }
        }
    }

    /// Infimum over radii in `(lo, hi]` at center `c`, an interval on which
    /// the ball sets relevant to this functional do not change.
    fn infimum(&self, space: &MetricSpace, f: &[f64], c: usize, lo: f64, hi: f64) -> f64 {
        match self {
            Self::RadiusPower { .. } => self.eval(space, f, &Ball::new(c, lo)),
            _ => self.eval(space, f, &Ball::new(c, hi)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DpBallNorm {
    /// `‖a‖_{D_p, B}`.
    pub value: f64,
    pub upper: f64,
    pub exact: bool,
    /// Optimal `Σ a(B_i)^p μ(B_i)` over disjoint `B_i ⊂ B`.
    pub best_sum: f64,
    pub a_outer: f64,
    pub candidates: usize,
    pub family: Vec<Ball>,
}

/// `‖a‖_{D_p,B} = a(B)^{-1} sup (1/μ(B) Σ_i a(B_i)^p μ(B_i))^{1/p}` over
/// pairwise disjoint balls `B_i ⊂ B`. Each ball configuration is evaluated
/// at its largest radius, which is exact for functionals nondecreasing in
/// the radius. `0/0 = 0` and `x/0 = ∞`.
pub fn dp_ball_norm(
    space: &MetricSpace,
    f: &[f64],
    a: &BallFunctional,
    p: f64,
    b: &Ball,
    opts: &SearchOptions,
) -> Result<DpBallNorm> {
    check_common(space, f, p, 1.0, b)?;
    a.validate()?;
    let outer_set = space.ball_set(b);
    let mut cands = Vec::new();
    for &c in space.ball_sites(b) {
        for r in space.radius_events(c, &a.scales(), f64::INFINITY) {
            let ball = Ball::new(c, r);
            let set = space.ball_set(&ball);
            if !set.is_subset(&outer_set) {
                continue;
            }
            let weight = a.eval(space, f, &ball).powf(p) * space.measure(&ball);
            cands.push(Candidate { ball, set, weight });
        }
    }
    let cands = dedup_by_set(cands);
    let r = search(space, &cands, opts);
    let mb = space.measure(b);
    let a_outer = a.eval(space, f, b);
    let norm = |s: f64| {
        let top = (s / mb).powf(1.0 / p);
        if top == 0.0 {
            0.0
        } else {
            top / a_outer
        }
    };
    Ok(DpBallNorm {
        value: norm(r.value),
        upper: norm(r.upper_bound),
        exact: r.exact,
        best_sum: r.value,
        a_outer,
        candidates: cands.len(),
        family: r.chosen.iter().map(|&i| cands[i].ball).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub jn: f64,
    pub dp_times_a0: f64,
    pub relative_gap: f64,
    pub exact: bool,
}

/// Compares `‖f‖_{JN_{p,τ}^ρ, B}` with `‖a0‖_{D_p,B} · a0(B)`; the two
/// suprema range over the same ball configurations with equal weights.
pub fn jn_dp_identity(
    space: &MetricSpace,
    f: &[f64],
    p: f64,
    rho: f64,
    tau: f64,
    b: &Ball,
    opts: &SearchOptions,
) -> Result<IdentityReport> {
    let jn = jn_ptr_norm(space, f, p, rho, tau, b, opts)?;
    let dp = dp_ball_norm(space, f, &a0_functional(rho, tau), p, b, opts)?;
    let rhs = if dp.best_sum == 0.0 { 0.0 } else { dp.value * dp.a_outer };
    let scale = jn.value.abs().max(rhs.abs());
    Ok(IdentityReport {
        jn: jn.value,
        dp_times_a0: rhs,
        relative_gap: if scale == 0.0 {
            0.0
        } else {
            (jn.value - rhs).abs() / scale
        },
        exact: jn.exact && dp.exact,
    })
}

/// Relative slack allowed between the two maximum-weight searches in the
/// norm chain, whose sums differ only in summation order.
const CHAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct FpwMetricReport {
    pub outer: Ball,
    pub hypothesis_pass: bool,
    /// Largest `osc(B)^{1/ρ} - a(τB)` over candidate balls.
    pub hypothesis_max_excess: f64,
    pub hypothesis_witness: Option<Ball>,
    pub jn: JnPtrNorm,
    pub dp: DpBallNorm,
    /// `‖f‖_{JN} ≤ ‖a‖_{D_p} · a(outer)`.
    pub chain_pass: bool,
    pub chain_lhs: f64,
    pub chain_rhs: f64,
    /// `‖f - f_{B0}‖_{L^{p,∞},B0} / (‖a‖_{D_p} · a(outer))`.
    pub weak_norm: f64,
    pub weak_ratio: f64,
    pub exact: bool,
    pub pass: bool,
}

/// Checks the Poincaré-type hypothesis `osc(B)^{1/ρ} ≤ a(τB)` on every ball
/// with `τB ⊂ τB̂0`, then the chain `‖f‖_{JN_{p,τ}^ρ,τB̂0} ≤ ‖a‖_{D_p,τB̂0} a(τB̂0)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_fpw_metric(
    space: &MetricSpace,
    f: &[f64],
    a: &BallFunctional,
    p: f64,
    rho: f64,
    tau: f64,
    b0: &Ball,
    eta: f64,
    opts: &SearchOptions,
) -> Result<FpwMetricReport> {
    check_common(space, f, p, tau, b0)?;
    check_rho(rho)?;
    a.validate()?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("eta must be positive and finite, got {eta}")));
    }
    let outer = b0.dilate(tau * (1.0 + eta));
    let outer_set = space.ball_set(&outer);
    let mut max_excess = f64::NEG_INFINITY;
    let mut witness = None;
    let mut scales = vec![1.0, tau];
    scales.extend(a.scales().iter().map(|s| s * tau));
    for &c in space.ball_sites(&outer) {
        let mut lo = 0.0;
        for r in space.radius_events(c, &scales, f64::INFINITY) {
            let dil = Ball::new(c, tau * r);
            if space.ball_set(&dil).is_subset(&outer_set) {
                let osc = inf_osc_sites(space, f, rho, space.prefix(c, space.count(c, r)))
                    .value
                    .powf(1.0 / rho);
                let excess = osc - a.infimum(space, f, c, tau * lo, tau * r);
                if excess > max_excess {
                    max_excess = excess;
                    witness = Some(Ball::new(c, r));
                }
            }
            lo = r;
        }
    }
    let jn = jn_ptr_norm(space, f, p, rho, tau, &outer, opts)?;
    let dp = dp_ball_norm(space, f, a, p, &outer, opts)?;
    let chain_lhs = jn.value;
    let chain_rhs = if dp.best_sum == 0.0 { 0.0 } else { dp.value * dp.a_outer };
    let chain_pass = jn.best_sum <= dp.best_sum * (1.0 + CHAIN_SLACK);
    let sites = space.ball_sites(b0);
    let mean = space.ball_average(f, b0);
    let dev: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let weak_norm = weak_lp_sites(space, &dev, sites, p);
    let weak_ratio = if chain_rhs > 0.0 {
        weak_norm / chain_rhs
    } else if weak_norm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let hypothesis_pass = max_excess <= 0.0;
    Ok(FpwMetricReport {
        outer,
        hypothesis_pass,
        hypothesis_max_excess: max_excess.max(0.0),
        hypothesis_witness: witness.filter(|_| !hypothesis_pass),
        exact: jn.exact && dp.exact,
        jn,
        dp,
        chain_pass,
        chain_lhs,
        chain_rhs,
        weak_norm,
        weak_ratio,
        pass: !hypothesis_pass || chain_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::tests::line;
    use crate::mwis::brute_force_disjoint;

    #[test]
    fn inf_oscillation_examples() {
        let s = line(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let b = Ball::new(1, 5.0);
        let r = inf_oscillation(&s, &[0.0, 0.0, 4.0], 1.0, &b).unwrap();
        assert_eq!((r.c, r.value), (0.0, 4.0 / 3.0));
        let r = inf_oscillation(&s, &[7.0, 0.0, 4.0], 1.0, &Ball::new(0, 0.5)).unwrap();
        assert_eq!((r.c, r.value), (7.0, 0.0));
        let two = line(&[0.0, 1.0], &[1.0; 2]);
        let r = inf_oscillation(&two, &[0.0, 1.0], 0.5, &Ball::new(0, 5.0)).unwrap();
        assert_eq!((r.c, r.value), (0.0, 0.5));
    }

    #[test]
    fn inf_scan_beats_dense_grid() {
        let s = line(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 0.5, 1.5]);
        let f = [0.3, -1.2, 2.5, 0.9];
        for rho in [0.25, 0.5, 1.0] {
            let r = inf_osc_sites(&s, &f, rho, &[0, 1, 2, 3]);
            for i in 0..=4000 {
                let c = -2.0 + i as f64 * 1e-3;
                let v: f64 = (0..4).map(|j| (f[j] - c).abs().powf(rho) * s.weights()[j]).sum::<f64>() / 5.0;
                assert!(r.value <= v + 1e-12);
            }
        }
    }

    #[test]
    fn constant_f_is_zero() {
        let s = line(&[0.0, 1.0, 2.0, 4.0], &[1.0; 4]);
        let r = jn_ptr_norm(
            &s,
            &[3.0; 4],
            2.0,
            1.0,
            1.0,
            &Ball::new(0, 10.0),
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.exact);
    }

    #[test]
    fn matches_brute_force() {
        let s = line(&[0.0, 1.0, 2.5, 4.0, 7.0], &[1.0, 0.5, 2.0, 1.0, 1.5]);
        let f = [1.0, -2.0, 0.5, 3.0, 0.0];
        for (rho, tau) in [(1.0, 1.0), (0.5, 1.0), (1.0, 2.0), (0.5, 2.0)] {
            let b = Ball::new(2, 6.0);
            let cands = jn_candidates(&s, &f, 2.0, rho, tau, &b);
            let sets: Vec<Bitset> = cands.iter().map(|c| c.set.clone()).collect();
            let w: Vec<f64> = cands.iter().map(|c| c.weight).collect();
            if cands.len() <= 20 {
                let (best, _) = brute_force_disjoint(&sets, &w);
                let r = jn_ptr_norm(&s, &f, 2.0, rho, tau, &b, &SearchOptions::default()).unwrap();
                assert_eq!(r.best_sum, best);
            }
        }
    }

    #[test]
    fn candidates_match_dense_radius_sampling() {
        let s = line(&[0.0, 1.0, 2.5, 4.0], &[1.0; 4]);
        let f = [1.0, -2.0, 0.5, 3.0];
        let b = Ball::new(1, 3.2);
        let tau = 2.0;
        let cands = jn_candidates(&s, &f, 2.0, 1.0, tau, &b);
        let outer = s.ball_set(&b);
        let mut sampled: HashMap<Bitset, f64> = HashMap::new();
        for &c in s.ball_sites(&b) {
            for i in 1..20000 {
                let r = i as f64 * 5e-4;
                let dil = s.ball_set(&Ball::new(c, tau * r));
                if dil.is_subset(&outer) {
                    let k = s.count(c, r);
                    let osc = inf_osc_sites(&s, &f, 1.0, s.prefix(c, k)).value;
                    let w = osc.powf(2.0) * s.measure(&Ball::new(c, tau * r));
                    let e = sampled.entry(dil).or_insert(0.0);
                    *e = e.max(w);
                }
            }
        }
        sampled.retain(|_, w| *w > 0.0);
        assert_eq!(sampled.len(), cands.len());
        for c in &cands {
            assert_eq!(sampled[&c.set], c.weight);
        }
    }

    #[test]
    fn identity_for_a0() {
        let s = line(&[0.0, 1.0, 2.5, 4.0, 7.0, 7.5], &[1.0, 0.5, 2.0, 1.0, 1.5, 0.25]);
        let f = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        for (rho, tau) in [(1.0, 1.0), (0.5, 2.0), (1.0, 1.5)] {
            let r = jn_dp_identity(&s, &f, 2.0, rho, tau, &Ball::new(2, 6.0), &SearchOptions::default()).unwrap();
            assert!(r.exact);
            assert!(r.relative_gap <= 1e-9, "{r:?}");
        }
    }

    #[test]
    fn fpw_chain_with_a0_and_power() {
        let s = line(&[0.0, 1.0, 2.5, 4.0, 7.0], &[1.0; 5]);
        let f = [1.0, -2.0, 0.5, 3.0, 0.0];
        let r = verify_fpw_metric(
            &s,
            &f,
            &a0_functional(1.0, 1.0),
            2.0,
            1.0,
            1.0,
            &Ball::new(2, 2.0),
            1.0,
            &SearchOptions::default(),
        )
        .unwrap();
        assert!(r.hypothesis_pass && r.chain_pass && r.pass);
        let big = BallFunctional::RadiusPower {
            coefficient: 10.0,
            exponent: 0.0,
        };
        let r = verify_fpw_metric(
            &s,
            &f,
            &big,
            2.0,
            1.0,
            1.0,
            &Ball::new(2, 2.0),
            1.0,
            &SearchOptions::default(),
        )
        .unwrap();
        assert!(r.hypothesis_pass && r.chain_pass);
        let small = BallFunctional::Constant { value: 0.1 };
        let r = verify_fpw_metric(
            &s,
            &f,
            &small,
            2.0,
            1.0,
            1.0,
            &Ball::new(2, 2.0),
            1.0,
            &SearchOptions::default(),
        )
        .unwrap();
        assert!(!r.hypothesis_pass && r.hypothesis_witness.is_some());
    }

    #[test]
    fn homogeneous_in_f() {
        let s = line(&[0.0, 1.0, 2.5, 4.0], &[1.0; 4]);
        let f = [1.0, -2.0, 0.5, 3.0];
        let g: Vec<f64> = f.iter().map(|v| v * 4.0).collect();
        let b = Ball::new(1, 4.0);
        let o = SearchOptions::default();
        let a = jn_ptr_norm(&s, &f, 2.0, 1.0, 1.0, &b, &o).unwrap().value;
        let c = jn_ptr_norm(&s, &g, 2.0, 1.0, 1.0, &b, &o).unwrap().value;
        assert!((c - 4.0 * a).abs() <= 1e-12 * c);
    }
}
