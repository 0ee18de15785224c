use super::provider::{metric_derive_constant, ConstantPolicy, MetricConstantChoice, HYPOTHESIS_SLACK};
use super::{lambda0, Ball, DoublingProfile, MetricSpace};
use crate::error::{invalid, Result};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct WeakGrEpsilon {
    /// Smallest `ε` with `⨍_B |w - w_B| ≤ ε w_{τB}` on every ball with
    /// `τB ⊂ τB̂0`; infinite when some `w_{τB} = 0` with nonzero oscillation.
    pub epsilon: f64,
    pub witness: Option<Ball>,
    pub balls_checked: usize,
}

fn check_weight(space: &MetricSpace, w: &[f64], tau: f64, b0: &Ball, eta: f64) -> Result<()> {
    space.check_values(w, "w")?;
    space.check_ball(b0)?;
    if w.iter().any(|&v| v < 0.0) {
        return Err(invalid("weight w must be nonnegative"));
    }
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be >= 1, got {tau}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("eta must be positive and finite, got {eta}")));
    }
    Ok(())
}

fn mean_and_osc(space: &MetricSpace, w: &[f64], sites: &[usize]) -> (f64, f64) {
    let mu = space.weights();
    let total: f64 = sites.iter().map(|&i| mu[i]).sum();
    let mean = sites.iter().map(|&i| w[i] * mu[i]).sum::<f64>() / total;
    let osc = sites.iter().map(|&i| (w[i] - mean).abs() * mu[i]).sum::<f64>() / total;
    (mean, osc)
}

pub fn weak_gr_epsilon(space: &MetricSpace, w: &[f64], tau: f64, b0: &Ball, eta: f64) -> Result<WeakGrEpsilon> {
    check_weight(space, w, tau, b0, eta)?;
    let outer = b0.dilate(tau * (1.0 + eta));
    let outer_set = space.ball_set(&outer);
    let mut best = WeakGrEpsilon {
        epsilon: 0.0,
        witness: None,
        balls_checked: 0,
    };
    for &c in space.ball_sites(&outer) {
        for r in space.radius_events(c, &[1.0, tau], f64::INFINITY) {
            let dil = Ball::new(c, tau * r);
            if !space.ball_set(&dil).is_subset(&outer_set) {
                continue;
            }
            best.balls_checked += 1;
            let (_, osc) = mean_and_osc(space, w, space.prefix(c, space.count(c, r)));
            if osc == 0.0 {
                continue;
            }
            let wt = space.ball_average(w, &dil);
            let e = if wt == 0.0 { f64::INFINITY } else { osc / wt };
            if e > best.epsilon {
                best.epsilon = e;
                best.witness = Some(Ball::new(c, r));
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricGrReport {
    pub epsilon: WeakGrEpsilon,
    pub profile: DoublingProfile,
    pub constant_policy: ConstantPolicy,
    pub c_const: f64,
    pub threshold: f64,
    pub p_of_eps: f64,
    pub applicable: bool,
    pub p: f64,
    pub choice: Option<MetricConstantChoice>,
    /// Constant of `(⨍_B |w - w_B|^p)^{1/p} ≤ C ε w_{τB̂}`.
    pub oscillation_constant: f64,
    /// Constant of `(⨍_B w^p)^{1/p} ≤ C w_{τB̂}`.
    pub reverse_holder_constant: f64,
    pub balls_checked: usize,
    /// Largest observed `lhs / (ε w_{τB̂})` and `lhs / w_{τB̂}`.
    pub worst_oscillation_ratio: f64,
    pub worst_reverse_holder_ratio: f64,
    pub oscillation_pass: bool,
    pub reverse_holder_pass: bool,
    pub pass: bool,
}

/// `p(ε) = ln(c_μ τ^D / (C_μ ε)) / ln(2 c_μ max{τ,3}^D)`.
pub fn weak_gr_exponent(epsilon: f64, tau: f64, profile: &DoublingProfile, c_const: f64) -> f64 {
    if epsilon == 0.0 {
        return f64::INFINITY;
    }
    let num = (profile.c_mu * tau.powf(profile.dim) / (c_const * epsilon)).ln();
    let den = (2.0 * profile.c_mu * tau.max(3.0).powf(profile.dim)).ln();
    num / den
}

/// Higher integrability of weak Gurov–Reshetnyak weights: measures `ε`,
/// and when `ε` is below the smallness threshold asserts
/// `(⨍_B |w - w_B|^p)^{1/p} ≤ C ε w_{τB̂}` and `(⨍_B w^p)^{1/p} ≤ C' w_{τB̂}`
/// on every ball with `τB̂ ⊂ τB̂0`, the balls for which the argument
/// applies the good-λ theorem on `B` itself.
#[allow(clippy::too_many_arguments)]
pub fn verify_weak_gr_metric(
    space: &MetricSpace,
    w: &[f64],
    tau: f64,
    b0: &Ball,
    eta: f64,
    p: f64,
    profile: &DoublingProfile,
    policy: ConstantPolicy,
) -> Result<MetricGrReport> {
    let epsilon = weak_gr_epsilon(space, w, tau, b0, eta)?;
    let c_const = policy.value(profile);
    let d = profile.dim;
    let threshold = (1.0 / (2.0 * c_const)) * (tau / 3.0).min(1.0).powf(d);
    let eps = epsilon.epsilon;
    let p_of_eps = weak_gr_exponent(eps, tau, profile, c_const);
    let applicable = eps < threshold;
    let mut report = MetricGrReport {
        epsilon,
        profile: *profile,
        constant_policy: policy,
        c_const,
        threshold,
        p_of_eps,
        applicable,
        p,
        choice: None,
        oscillation_constant: f64::NAN,
        reverse_holder_constant: f64::NAN,
        balls_checked: 0,
        worst_oscillation_ratio: 0.0,
        worst_reverse_holder_ratio: 0.0,
        oscillation_pass: true,
        reverse_holder_pass: true,
        pass: true,
    };
    if !applicable {
        return Ok(report);
    }
    if !(p >= 1.0 && p < p_of_eps) {
        return Err(invalid(format!("p = {p} outside [1, p(eps) = {p_of_eps})")));
    }
    let theta = profile.c_mu * tau.powf(d);
    let l0 = lambda0(tau, eta, profile);
    let choice = metric_derive_constant(p, theta, eps, c_const, profile, l0)?;
    let hat_ratio = profile.c_mu * (1.0 + eta).powf(d);
    let outer_ratio = profile.c_mu * (tau * (1.0 + eta)).powf(d);
    let c_osc = hat_ratio.powf(1.0 / p) * choice.constant * (outer_ratio + 1.0 + hat_ratio);
    let c_rh = c_osc * eps + outer_ratio;
    report.choice = Some(choice);
    report.oscillation_constant = c_osc;
    report.reverse_holder_constant = c_rh;

    let scale = tau * (1.0 + eta);
    let outer = b0.dilate(scale);
    let outer_set = space.ball_set(&outer);
    let mu = space.weights();
    for &c in space.ball_sites(&outer) {
        for r in space.radius_events(c, &[1.0, 1.0 + eta, scale], f64::INFINITY) {
            let big = Ball::new(c, scale * r);
            if !space.ball_set(&big).is_subset(&outer_set) {
                continue;
            }
            report.balls_checked += 1;
            let sites = space.prefix(c, space.count(c, r));
            let total: f64 = sites.iter().map(|&i| mu[i]).sum();
            let (mean, _) = mean_and_osc(space, w, sites);
            let osc_p = (sites.iter().map(|&i| (w[i] - mean).abs().powf(p) * mu[i]).sum::<f64>() / total).powf(1.0 / p);
            let rh = (sites.iter().map(|&i| w[i].powf(p) * mu[i]).sum::<f64>() / total).powf(1.0 / p);
            let wt = space.ball_average(w, &big);
            let rhs_osc = c_osc * eps * wt;
            let rhs_rh = c_rh * wt;
            report.oscillation_pass &= osc_p <= rhs_osc * (1.0 + HYPOTHESIS_SLACK);
            report.reverse_holder_pass &= rh <= rhs_rh * (1.0 + HYPOTHESIS_SLACK);
            if osc_p > 0.0 {
                let denom = eps * wt;
                report.worst_oscillation_ratio =
                    report
                        .worst_oscillation_ratio
                        .max(if denom > 0.0 { osc_p / denom } else { f64::INFINITY });
            }
            if rh > 0.0 {
                report.worst_reverse_holder_ratio =
                    report
                        .worst_reverse_holder_ratio
                        .max(if wt > 0.0 { rh / wt } else { f64::INFINITY });
            }
        }
    }
    report.pass = report.oscillation_pass && report.reverse_holder_pass;
    Ok(report)
}
