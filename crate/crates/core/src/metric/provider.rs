use super::cover::maximal_with;
use super::jn::inf_osc_sites;
use super::{lambda0, lp_sites, weak_lp_sites, Ball, BallBasis, DoublingProfile, MetricSpace, PrefixTable};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Slack for the floating-point hypothesis checks, relative to the
/// magnitude of the compared quantities.
pub const HYPOTHESIS_SLACK: f64 = 1e-10;

/// Source of the constant `C_μ` in the level-set inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum ConstantPolicy {
    /// `c_μ² 45^D`: the weak-(1,1) bound `c_μ 3^D` of the ball maximal
    /// operator times the doubling bound `c_μ 15^D` for `μ(15B)/μ(B)`.
    Derived,
    /// A user-supplied value, e.g. the maximum observed over a sweep.
    Calibrated { value: f64 },
}

impl ConstantPolicy {
    pub fn value(&self, profile: &DoublingProfile) -> f64 {
        match *self {
            Self::Derived => profile.c_mu * profile.c_mu * 45f64.powf(profile.dim),
            Self::Calibrated { value } => value,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ProviderKind {
    /// `F = |w - w_{B0}|`, `G = |w - w_B|`, `H = |w_B - w_{B0}|`, `g = ε w_{B0}`.
    WeakGr { w: Vec<f64>, epsilon: f64, anchor: f64 },
    /// `F = |f - c_{B̂0}|^ρ`, `G = |f - c_B|^ρ`, `H = |c_B - c_{B̂0}|^ρ`,
    /// `g = ⨍_B |f - c_B|^ρ`, with `c_B` minimizing `⨍_B |f - c|^ρ`.
    JnRho { f: Vec<f64>, rho: f64, anchor: f64 },
}

/// Per-ball decomposition data `F ≤ G^B + H^B` with constants `(Θ, δ, τ)`.
#[derive(Clone, Debug)]
pub struct MetricProvider {
    pub name: String,
    pub theta: f64,
    pub delta: f64,
    pub tau: f64,
    pub f: Vec<f64>,
    pub kind: ProviderKind,
}

/// `G` on the sites of a ball, the constant `H`, and `g`.
struct Local {
    g_values: Vec<f64>,
    h: f64,
    g: f64,
}

impl MetricProvider {
    /// Weak Gurov–Reshetnyak provider on `basis`: `Θ = c_μ τ^D`, `δ = ε`.
    pub fn weak_gr(
        space: &MetricSpace,
        basis: &BallBasis,
        w: &[f64],
        epsilon: f64,
        tau: f64,
        profile: &DoublingProfile,
    ) -> Result<Self> {
        space.check_values(w, "w")?;
        if w.iter().any(|&v| v < 0.0) {
            return Err(invalid("weight w must be nonnegative"));
        }
        check_tau(tau)?;
        let anchor = space.ball_average(w, &basis.b0);
        Ok(Self {
            name: "weak-gr".into(),
            theta: profile.c_mu * tau.powf(profile.dim),
            delta: epsilon,
            tau,
            f: w.iter().map(|v| (v - anchor).abs()).collect(),
            kind: ProviderKind::WeakGr {
                w: w.to_vec(),
                epsilon,
                anchor,
            },
        })
    }

    /// ρ-oscillation provider on `basis`: `Θ = 2 c_μ τ^D`, `δ = 0`.
    pub fn jn_rho(
        space: &MetricSpace,
        basis: &BallBasis,
        f: &[f64],
        rho: f64,
        tau: f64,
        profile: &DoublingProfile,
    ) -> Result<Self> {
        space.check_values(f, "f")?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(invalid(format!("rho must lie in (0, 1], got {rho}")));
        }
        check_tau(tau)?;
        let anchor = inf_osc_sites(space, f, rho, space.ball_sites(&basis.hat)).c;
        Ok(Self {
            name: "jn-rho".into(),
            theta: 2.0 * profile.c_mu * tau.powf(profile.dim),
            delta: 0.0,
            tau,
            f: f.iter().map(|v| (v - anchor).abs().powf(rho)).collect(),
            kind: ProviderKind::JnRho {
                f: f.to_vec(),
                rho,
                anchor,
            },
        })
    }

    fn local(&self, space: &MetricSpace, sites: &[usize]) -> Local {
        match &self.kind {
            ProviderKind::WeakGr { w, epsilon, anchor } => {
                let total: f64 = sites.iter().map(|&i| space.weights()[i]).sum();
                let wb = sites.iter().map(|&i| w[i] * space.weights()[i]).sum::<f64>() / total;
                Local {
                    g_values: sites.iter().map(|&i| (w[i] - wb).abs()).collect(),
                    h: (wb - anchor).abs(),
                    g: epsilon * anchor,
                }
            }
            ProviderKind::JnRho { f, rho, anchor } => {
                let o = inf_osc_sites(space, f, *rho, sites);
                Local {
                    g_values: sites.iter().map(|&i| (f[i] - o.c).abs().powf(*rho)).collect(),
                    h: (o.c - anchor).abs().powf(*rho),
                    g: o.value,
                }
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be >= 1, got {tau}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricHypothesisReport {
    pub pass: bool,
    pub balls_checked: usize,
    /// Smallest slack of conditions (i), (ii), (iii); negative means violated.
    pub min_slack: [f64; 3],
    pub violations: Vec<(usize, Ball)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricLevelPoint {
    pub k: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub skipped: Option<String>,
    pub measure_e: f64,
    pub measure_omega: f64,
    /// `μ(E)(K - Θ) / ((δ + γ) μ(Ω))`, zero when `E` is empty.
    pub observed_constant: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricConstantChoice {
    pub p: f64,
    pub k: f64,
    pub gamma: f64,
    pub r: f64,
    pub constant: f64,
    pub p_max: f64,
}

/// Constant of the norm inequalities: with `K = 2 max{Θ, c_μ 3^D}` and
/// `γ` half of `Θ/(C_μ K^p) - δ`, `r = K^p C_μ (δ+γ)/Θ < 1` and
/// `C = K (1 - r)^{-1/p} max{1/γ, λ0}` bounds `‖MF‖` by
/// `C (‖G*‖ + F_{B̂0})` in both `L^p` and weak `L^p`.
pub fn metric_derive_constant(
    p: f64,
    theta: f64,
    delta: f64,
    c_const: f64,
    profile: &DoublingProfile,
    lambda0: f64,
) -> Result<MetricConstantChoice> {
    let k = 2.0 * theta.max(profile.c_mu * 3f64.powf(profile.dim));
    let p_max = if delta == 0.0 {
        f64::INFINITY
    } else {
        (theta / (c_const * delta)).ln() / k.ln()
    };
    if !(p >= 1.0 && p < p_max) {
        return Err(invalid(format!("p = {p} outside the admissible range [1, {p_max})")));
    }
    let gap = theta / (c_const * k.powf(p)) - delta;
    let gamma = gap / 2.0;
    let r = k.powf(p) * c_const * (delta + gamma) / theta;
    let constant = k * (1.0 - r).powf(-1.0 / p) * (1.0 / gamma).max(lambda0);
    Ok(MetricConstantChoice {
        p,
        k,
        gamma,
        r,
        constant,
        p_max,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricNormReport {
    pub choice: MetricConstantChoice,
    pub weak_f: f64,
    pub weak_mf: f64,
    pub weak_gstar: f64,
    pub strong_f: f64,
    pub strong_mf: f64,
    pub strong_gstar: f64,
    pub hat_average: f64,
    /// `‖F‖_{L^{p,∞},B0} ≤ (μ(B̂0)/μ(B0))^{1/p} ‖MF‖_{L^{p,∞},B̂0}`.
    pub weak_f_pass: bool,
    pub weak_pass: bool,
    /// `‖F‖_{L^p,B0} ≤ (μ(B̂0)/μ(B0))^{1/p} ‖MF‖_{L^p,B̂0}`.
    pub strong_f_pass: bool,
    pub strong_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricGoodLambdaReport {
    pub provider: String,
    pub theta: f64,
    pub delta: f64,
    pub tau: f64,
    pub profile: DoublingProfile,
    pub constant_policy: ConstantPolicy,
    pub c_const: f64,
    pub lambda0: f64,
    pub lambda_threshold: f64,
    pub k_min: f64,
    pub hypotheses: MetricHypothesisReport,
    pub points: Vec<MetricLevelPoint>,
    pub max_observed_constant: f64,
    pub norms: Option<MetricNormReport>,
    pub pass: bool,
}

fn check_hypotheses(
    space: &MetricSpace,
    basis: &BallBasis,
    prov: &MetricProvider,
    ftab: &PrefixTable,
) -> MetricHypothesisReport {
    let mut min_slack = [f64::INFINITY; 3];
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut seen = std::collections::HashSet::new();
    for &c in &basis.centers {
        for r in space.radius_events(c, &[1.0, prov.tau], basis.cap) {
            let kb = space.count(c, r);
            let kt = space.count(c, prov.tau * r);
            if !seen.insert((c, kb, kt)) {
                continue;
            }
            checked += 1;
            let sites = space.prefix(c, kb);
            let loc = prov.local(space, sites);
            let f_tau = ftab.average(c, kt);
            let mut s1 = f64::INFINITY;
            for (j, &y) in sites.iter().enumerate() {
                let rhs = loc.g_values[j] + loc.h;
                s1 = s1.min(rhs - prov.f[y] + HYPOTHESIS_SLACK * rhs.max(prov.f[y]));
            }
            let rhs2 = prov.theta * f_tau;
            let s2 = rhs2 - loc.h + HYPOTHESIS_SLACK * rhs2.max(loc.h);
            let total: f64 = sites.iter().map(|&i| space.weights()[i]).sum();
            let g_avg = sites
                .iter()
                .zip(&loc.g_values)
                .map(|(&i, g)| g * space.weights()[i])
                .sum::<f64>()
                / total;
            let rhs3 = prov.delta * f_tau + loc.g;
            let s3 = rhs3 - g_avg + HYPOTHESIS_SLACK * rhs3.max(g_avg);
            for (i, s) in [s1, s2, s3].into_iter().enumerate() {
                min_slack[i] = min_slack[i].min(s);
                if s < 0.0 && violations.len() < 32 {
                    violations.push((i + 1, Ball::new(c, r)));
                }
            }
        }
    }
    MetricHypothesisReport {
        pass: min_slack.iter().all(|&s| s >= 0.0),
        balls_checked: checked,
        min_slack,
        violations,
    }
}

/// Checks the level-set inequality
/// `μ{MF > Kλ, G* ≤ γλ} ≤ C_μ (δ+γ)/(K-Θ) μ{MF > λ}` on a grid, after
/// verifying the provider hypotheses on every member ball, and, when `p`
/// is given, the norm inequalities with [`metric_derive_constant`].
#[allow(clippy::too_many_arguments)]
pub fn verify_good_lambda_metric(
    space: &MetricSpace,
    basis: &BallBasis,
    prov: &MetricProvider,
    profile: &DoublingProfile,
    policy: ConstantPolicy,
    ks: &[f64],
    gammas: &[f64],
    lambdas: &[f64],
    p: Option<f64>,
) -> Result<MetricGoodLambdaReport> {
    space.check_values(&prov.f, "F")?;
    let c_const = policy.value(profile);
    if !(c_const >= 1.0 && c_const.is_finite()) {
        return Err(invalid(format!("constant C_mu must be finite and >= 1, got {c_const}")));
    }
    let ftab = PrefixTable::new(space, &prov.f);
    let hypotheses = check_hypotheses(space, basis, prov, &ftab);
    let mf = maximal_with(space, basis, &ftab);
    let mut gstar = vec![0.0f64; space.len()];
    for m in &basis.members {
        let g = prov.local(space, space.prefix(m.center, m.count)).g;
        for &y in space.prefix(m.center, m.count) {
            gstar[y] = gstar[y].max(g);
        }
    }
    let l0 = lambda0(prov.tau, basis.eta, profile);
    let hat_average = ftab.ball_average(&basis.hat);
    let threshold = l0 * hat_average;
    let k_min = prov.theta.max(profile.c_mu * 3f64.powf(profile.dim));
    let w = space.weights();
    let mut points = Vec::new();
    let mut max_obs = 0.0f64;
    for &k in ks {
        for &gamma in gammas {
            for &lambda in lambdas {
                let skipped = if !(k > k_min) {
                    Some(format!("K must exceed {k_min}"))
                } else if !(gamma > 0.0 && gamma < 1.0) {
                    Some("gamma must lie in (0, 1)".to_string())
                } else if !(lambda >= threshold) {
                    Some(format!("lambda below lambda0 * F_hat = {threshold}"))
                } else {
                    None
                };
                let mut me = 0.0;
                let mut mo = 0.0;
                for x in 0..space.len() {
                    if mf[x] > lambda {
                        mo += w[x];
                    }
                    if mf[x] > k * lambda && gstar[x] <= gamma * lambda {
                        me += w[x];
                    }
                }
                let lhs = me * (k - prov.theta);
                let rhs = c_const * (prov.delta + gamma) * mo;
                let observed = if me == 0.0 {
                    0.0
                } else {
                    lhs / ((prov.delta + gamma) * mo)
                };
                if skipped.is_none() {
                    max_obs = max_obs.max(observed);
                }
                points.push(MetricLevelPoint {
                    k,
                    gamma,
                    lambda,
                    pass: skipped.is_some() || lhs <= rhs,
                    skipped,
                    measure_e: me,
                    measure_omega: mo,
                    observed_constant: observed,
                });
            }
        }
    }
    let norms = match p {
        None => None,
        Some(p) => {
            let choice = metric_derive_constant(p, prov.theta, prov.delta, c_const, profile, l0)?;
            let hat_sites = space.ball_sites(&basis.hat);
            let b0_sites = space.ball_sites(&basis.b0);
            let ratio = (space.measure(&basis.hat) / space.measure(&basis.b0)).powf(1.0 / p);
            let weak_f = weak_lp_sites(space, &prov.f, b0_sites, p);
            let weak_mf = weak_lp_sites(space, &mf, hat_sites, p);
            let weak_gstar = weak_lp_sites(space, &gstar, hat_sites, p);
            let strong_f = lp_sites(space, &prov.f, b0_sites, p);
            let strong_mf = lp_sites(space, &mf, hat_sites, p);
            let strong_gstar = lp_sites(space, &gstar, hat_sites, p);
            let slack = 1.0 + HYPOTHESIS_SLACK;
            Some(MetricNormReport {
                choice,
                weak_f_pass: weak_f <= ratio * weak_mf * slack,
                weak_pass: weak_mf <= choice.constant * (weak_gstar + hat_average) * slack,
                strong_f_pass: strong_f <= ratio * strong_mf * slack,
                strong_pass: strong_mf <= choice.constant * (strong_gstar + hat_average) * slack,
                weak_f,
                weak_mf,
                weak_gstar,
                strong_f,
                strong_mf,
                strong_gstar,
                hat_average,
            })
        }
    };
    let norms_pass = norms
        .as_ref()
        .is_none_or(|n| n.weak_f_pass && n.weak_pass && n.strong_f_pass && n.strong_pass);
    let pass = !hypotheses.pass || (points.iter().all(|p| p.pass) && norms_pass);
    Ok(MetricGoodLambdaReport {
        provider: prov.name.clone(),
        theta: prov.theta,
        delta: prov.delta,
        tau: prov.tau,
        profile: *profile,
        constant_policy: policy,
        c_const,
        lambda0: l0,
        lambda_threshold: threshold,
        k_min,
        hypotheses,
        points,
        max_observed_constant: max_obs,
        norms,
        pass,
    })
}
