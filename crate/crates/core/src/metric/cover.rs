use super::{Ball, DoublingProfile, MetricSpace, PrefixTable};
use crate::error::{invalid, Error, Result};
use crate::mwis::Bitset;
use serde::Serialize;

/// The ball family `{B(x, r) : x ∈ B0, 0 < r ≤ η r0}`.
#[derive(Clone, Debug, Serialize)]
pub struct BallBasis {
    pub b0: Ball,
    pub eta: f64,
    /// `B̂0 = (1 + η) B0`.
    pub hat: Ball,
    /// Largest member radius, `η r0`.
    pub cap: f64,
    /// Sites of `B0`, the admissible centers.
    pub centers: Vec<usize>,
    pub members: Vec<Member>,
}

/// A distinct member set: the `count` sites nearest to `center`, reached by
/// every radius in `(inner, radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Member {
    pub center: usize,
    pub count: usize,
    pub inner: f64,
    pub radius: f64,
}

impl Member {
    pub fn ball(&self) -> Ball {
        Ball::new(self.center, self.radius)
    }
}

impl BallBasis {
    pub fn new(space: &MetricSpace, b0: Ball, eta: f64) -> Result<Self> {
        space.check_ball(&b0)?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be positive and finite, got {eta}")));
        }
        let cap = eta * b0.radius;
        let centers: Vec<usize> = space.ball_sites(&b0).to_vec();
        let mut sorted_centers = centers.clone();
        sorted_centers.sort_unstable();
        let n = space.len();
        let mut members = Vec::new();
        for &c in &sorted_centers {
            let sd = space.sorted_distances(c);
            for k in 1..=n {
                if k < n && sd[k - 1] == sd[k] {
                    continue;
                }
                let inner = sd[k - 1];
                if inner >= cap {
                    break;
                }
                let hi = if k == n { f64::INFINITY } else { sd[k] };
                members.push(Member {
                    center: c,
                    count: k,
                    inner,
                    radius: hi.min(cap),
                });
            }
        }
        Ok(Self {
            b0,
            eta,
            hat: b0.dilate(1.0 + eta),
            cap,
            centers: sorted_centers,
            members,
        })
    }

    pub fn is_center(&self, space: &MetricSpace, c: usize) -> bool {
        space.dist(c, self.b0.center) < self.b0.radius
    }

    pub fn contains(&self, space: &MetricSpace, b: &Ball) -> bool {
        b.radius > 0.0 && b.radius <= self.cap && self.is_center(space, b.center)
    }

    /// Whether `τB ⊂ τB̂0` (as site sets) for every member radius event.
    pub fn dilates_inside(&self, space: &MetricSpace, tau: f64) -> bool {
        let outer = space.ball_set(&self.hat.dilate(tau));
        self.centers.iter().all(|&c| {
            space.radius_events(c, &[1.0, tau], self.cap).into_iter().all(|r| {
                space.ball_set(&Ball::new(c, r)).is_subset(&outer)
                    && space.ball_set(&Ball::new(c, tau * r)).is_subset(&outer)
            })
        })
    }
}

/// `M F(x) = max { ⨍_B |F| : x ∈ B ∈ basis }`, zero where no member contains `x`.
pub fn ball_maximal(space: &MetricSpace, basis: &BallBasis, f: &[f64]) -> Result<Vec<f64>> {
    space.check_values(f, "F")?;
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    Ok(maximal_with(space, basis, &PrefixTable::new(space, &abs)))
}

pub(crate) fn maximal_with(space: &MetricSpace, basis: &BallBasis, table: &PrefixTable) -> Vec<f64> {
    let mut out = vec![0.0f64; space.len()];
    for m in &basis.members {
        let a = table.average(m.center, m.count);
        for &y in space.prefix(m.center, m.count) {
            out[y] = out[y].max(a);
        }
    }
    out
}

/// `λ0 = (15τ)^D c_mu (1 + 1/η)^D`.
pub fn lambda0(tau: f64, eta: f64, profile: &DoublingProfile) -> f64 {
    (15.0 * tau).powf(profile.dim) * profile.c_mu * (1.0 + 1.0 / eta).powf(profile.dim)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverBall {
    pub center: usize,
    pub radius: f64,
    pub count: usize,
    pub average: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub lambda: f64,
    pub lambda0: f64,
    pub hat_average: f64,
    pub omega: Vec<usize>,
    pub balls: Vec<CoverBall>,
    pub disjoint: bool,
    /// (a) every selected ball lies in Ω_λ.
    pub inside_omega: bool,
    /// (a) Ω_λ ⊂ ∪ 5B_i.
    pub five_cover: bool,
    /// (b) 15τ B_i is a member.
    pub dilate_member: bool,
    /// (c) F_{B_i} > λ.
    pub above_lambda: bool,
    /// (d) F_{σB_i} ≤ λ for every σ ≥ 2 with σB_i a member.
    pub dilates_below: bool,
    /// r_i ≤ η r0 / (15τ).
    pub radius_bound: bool,
    pub pass: bool,
}

/// Disjoint member balls covering the level set `Ω_λ = {M F > λ}`.
///
/// Each point of Ω_λ gets the largest-radius member containing it with
/// average above λ (that radius is the supremum, so the witness condition
/// `r_x/2 < r ≤ r_x` holds with equality on the right); witnesses are then
/// selected greedily by decreasing radius among those disjoint from the
/// ones already chosen. Every property is checked on the result.
pub fn vitali_cz_cover(
    space: &MetricSpace,
    basis: &BallBasis,
    f: &[f64],
    lambda: f64,
    tau: f64,
    profile: &DoublingProfile,
) -> Result<CoverReport> {
    space.check_values(f, "F")?;
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be >= 1, got {tau}")));
    }
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let table = PrefixTable::new(space, &abs);
    let l0 = lambda0(tau, basis.eta, profile);
    let hat_average = table.ball_average(&basis.hat);
    if !(lambda >= l0 * hat_average) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} is below lambda0 * F_hat = {}",
            l0 * hat_average
        )));
    }
    let mf = maximal_with(space, basis, &table);
    let omega: Vec<usize> = (0..space.len()).filter(|&x| mf[x] > lambda).collect();

    // witness per point: largest radius, then smallest center, then count
    let mut witness: Vec<Option<Member>> = vec![None; space.len()];
    for m in &basis.members {
        if table.average(m.center, m.count) <= lambda {
            continue;
        }
        for &y in space.prefix(m.center, m.count) {
            let better = match &witness[y] {
                None => true,
                Some(w) => m.radius > w.radius,
            };
            if better {
                witness[y] = Some(*m);
            }
        }
    }
    let mut candidates: Vec<Member> = omega.iter().filter_map(|&x| witness[x]).collect();
    candidates.sort_by(|a, b| {
        b.radius
            .total_cmp(&a.radius)
            .then(a.center.cmp(&b.center))
            .then(a.count.cmp(&b.count))
    });
    candidates.dedup();

    let mut used = Bitset::new(space.len());
    let mut chosen: Vec<Member> = Vec::new();
    for m in candidates {
        let set = space.prefix_set(m.center, m.count);
        if !set.intersects(&used) {
            used.union_with(&set);
            chosen.push(m);
        }
    }

    let omega_set = Bitset::from_indices(space.len(), omega.iter().copied());
    let mut disjoint = true;
    let mut seen = Bitset::new(space.len());
    for m in &chosen {
        let s = space.prefix_set(m.center, m.count);
        disjoint &= !s.intersects(&seen);
        seen.union_with(&s);
    }
    let inside_omega = seen.is_subset(&omega_set);
    let five_cover = omega
        .iter()
        .all(|&x| chosen.iter().any(|m| space.dist(x, m.center) < 5.0 * m.radius));
    let dilate_member = chosen
        .iter()
        .all(|m| basis.contains(space, &Ball::new(m.center, 15.0 * tau * m.radius)));
    let above_lambda = chosen.iter().all(|m| table.average(m.center, m.count) > lambda);
    let dilates_below = chosen.iter().all(|m| {
        let c = m.center;
        let two = 2.0 * m.radius;
        if two > basis.cap {
            return true;
        }
        // σ = 2, then σ just above d / r for every distance d in [2r, cap)
        let sd = space.sorted_distances(c);
        let mut ok = table.average(c, space.count(c, two)) <= lambda;
        for (k, &d) in sd.iter().enumerate() {
            if d >= two && d < basis.cap && (k + 1 == sd.len() || sd[k + 1] > d) {
                ok &= table.average(c, k + 1) <= lambda;
            }
        }
        ok
    });
    let radius_bound = chosen
        .iter()
        .all(|m| m.radius <= basis.eta * basis.b0.radius / (15.0 * tau));
    let pass = disjoint && inside_omega && five_cover && dilate_member && above_lambda && dilates_below && radius_bound;
    Ok(CoverReport {
        lambda,
        lambda0: l0,
        hat_average,
        omega,
        balls: chosen
            .iter()
            .map(|m| CoverBall {
                center: m.center,
                radius: m.radius,
                count: m.count,
                average: table.average(m.center, m.count),
            })
            .collect(),
        disjoint,
        inside_omega,
        five_cover,
        dilate_member,
        above_lambda,
        dilates_below,
        radius_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::tests::line;

    #[test]
    fn singleton_only_basis() {
        let s = line(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let b = BallBasis::new(&s, Ball::new(1, 1.5), 0.5).unwrap();
        assert!(b.members.iter().all(|m| m.count == 1));
        assert_eq!(b.members.len(), 3);
        assert!(b.dilates_inside(&s, 1.0) && b.dilates_inside(&s, 3.0));
    }

    #[test]
    fn two_point_basis() {
        let s = line(&[0.0, 1.0], &[1.0; 2]);
        let b = BallBasis::new(&s, Ball::new(0, 2.0), 1.0).unwrap();
        let got: Vec<(usize, usize, f64)> = b.members.iter().map(|m| (m.center, m.count, m.radius)).collect();
        assert_eq!(got, vec![(0, 1, 1.0), (0, 2, 2.0), (1, 1, 1.0), (1, 2, 2.0)]);
    }

    #[test]
    fn maximal_matches_brute_force_on_three_points() {
        let s = line(&[0.0, 1.0, 3.0], &[1.0, 2.0, 0.5]);
        let f = [4.0, 1.0, 8.0];
        let basis = BallBasis::new(&s, Ball::new(0, 1.5), 2.0).unwrap();
        let m = ball_maximal(&s, &basis, &f).unwrap();
        // brute force over a fine radius grid
        let mut want = [0.0f64; 3];
        for c in [0usize, 1] {
            for i in 1..=3000 {
                let b = Ball::new(c, i as f64 * 1e-3);
                let a = s.ball_average(&f, &b);
                for &y in s.ball_sites(&b) {
                    want[y] = want[y].max(a);
                }
            }
        }
        assert_eq!(m, want.to_vec());
    }

    #[test]
    fn maximal_vanishes_outside_hat() {
        let s = line(&[0.0, 1.0, 10.0], &[1.0; 3]);
        let basis = BallBasis::new(&s, Ball::new(0, 1.5), 1.0).unwrap();
        let m = ball_maximal(&s, &basis, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn lambda0_values() {
        let p = DoublingProfile { c_mu: 1.0, dim: 1.0 };
        assert_eq!(lambda0(1.0, 1.0, &p), 30.0);
        let q = DoublingProfile { c_mu: 3.0, dim: 2.0 };
        assert!((lambda0(2.0, 0.5, &q) / lambda0(1.0, 0.5, &q) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spike_gives_one_ball() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let s = line(&xs, &[1.0; 64]);
        let mut f = vec![0.0; 64];
        f[20] = 1.0e6;
        let basis = BallBasis::new(&s, Ball::new(32, 40.0), 10.0).unwrap();
        let profile = crate::metric::doubling_constants(&s, &[1.0]).unwrap().profile;
        let hat = s.ball_average(&f, &basis.hat);
        let lambda = lambda0(1.0, 10.0, &profile) * hat;
        assert!(lambda < 1.0e6);
        let r = vitali_cz_cover(&s, &basis, &f, lambda, 1.0, &profile).unwrap();
        assert_eq!(r.balls.len(), 1);
        assert!(r.pass, "{r:?}");
        assert!(r.omega.contains(&20));
        let err = vitali_cz_cover(&s, &basis, &f, lambda * 0.5, 1.0, &profile);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_level_set() {
        let s = line(&[0.0, 1.0, 2.0], &[1.0; 3]);
        let basis = BallBasis::new(&s, Ball::new(1, 2.0), 1.0).unwrap();
        let profile = DoublingProfile { c_mu: 2.0, dim: 1.0 };
        let r = vitali_cz_cover(&s, &basis, &[1.0; 3], 1e3, 1.0, &profile).unwrap();
        assert!(r.omega.is_empty() && r.balls.is_empty() && r.pass);
    }
}
