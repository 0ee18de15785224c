//! L^p and weak L^p quasinorms with respect to the normalized measure
//! `dx/|Q|`. Leaves are equally weighted, so every norm on a cube is a
//! function of the multiset of leaf values under it.

use crate::dyadic::{local_mean, DyadicCube, GridFunction};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("exponent must be positive and finite, got {p}")))
    }
}

/// Pairwise sum; keeps rounding at O(log n) for long slices.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `(mean |v|^p)^{1/p}` over equally weighted values.
pub fn lp_of(values: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if values.is_empty() {
        return Ok(0.0);
    }
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    Ok((pairwise_sum(&powered) / values.len() as f64).powf(1.0 / p))
}

/// Sorted absolute values, largest first, paired with the fraction of values
/// at least as large. One entry per distinct positive value.
fn tail_fractions(values: &[f64]) -> Vec<(f64, f64)> {
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let n = abs.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < abs.len() {
        let v = abs[i];
        let mut k = i;
        while k < abs.len() && abs[k] == v {
            k += 1;
        }
        if v > 0.0 {
            out.push((v, k as f64 / n));
        }
        i = k;
    }
    out
}

/// `sup_λ λ·frac(|v| > λ)^{1/p}`, attained at a data value.
pub fn weak_lp_of(values: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(tail_fractions(values)
        .into_iter()
        .map(|(v, frac)| v * frac.powf(1.0 / p))
        .fold(0.0, f64::max))
}

/// p-th power of the weak norm, `max_v v^p·frac(|f| ≥ v)`. Avoids the
/// `1/p` root, which matters when comparing against other p-th powers.
pub fn weak_lp_pow_of(values: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(tail_fractions(values)
        .into_iter()
        .map(|(v, frac)| v.powf(p) * frac)
        .fold(0.0, f64::max))
}

/// Fraction of values with `|v| > λ`.
pub fn distribution_fraction_of(values: &[f64], lambda: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| v.abs() > lambda).count() as f64 / values.len() as f64
}

pub fn lp_norm(f: &GridFunction, p: f64, q: &DyadicCube) -> Result<f64> {
    check_exponent(p)?;
    let powered: Vec<f64> = f.local_values(q)?.iter().map(|v| v.abs().powf(p)).collect();
    Ok(local_mean(f.dim(), &powered).powf(1.0 / p))
}

pub fn weak_lp_norm(f: &GridFunction, p: f64, q: &DyadicCube) -> Result<f64> {
    weak_lp_of(&f.local_values(q)?, p)
}

pub fn distribution_fraction(f: &GridFunction, lambda: f64, q: &DyadicCube) -> Result<f64> {
    Ok(distribution_fraction_of(&f.local_values(q)?, lambda))
}

/// `mean |v|^p` for integer `p`, exact in rational arithmetic.
pub fn lp_pow_exact<T: Scalar>(values: &[T], p: u32) -> T {
    let n = T::from_u64(values.len() as u64);
    values.iter().fold(T::zero(), |acc, v| acc + v.abs().powi(p)) / n
}

/// `max_v v^p·frac(|f| ≥ v)` for integer `p`, exact in rational arithmetic.
pub fn weak_lp_pow_exact<T: Scalar>(values: &[T], p: u32) -> T {
    let n = values.len() as u64;
    let mut abs: Vec<T> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.partial_cmp(a).expect("ordered scalars"));
    let mut best = T::zero();
    let mut i = 0;
    while i < abs.len() {
        let mut k = i;
        while k < abs.len() && abs[k] == abs[i] {
            k += 1;
        }
        let cand = abs[i].powi(p) * T::from_u64(k as u64) / T::from_u64(n);
        best = best.max(cand);
        i = k;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn f(dim: usize, depth: u32, v: &[f64]) -> GridFunction {
        GridFunction::on_unit_cube(dim, depth, v.to_vec()).unwrap()
    }

    #[test]
    fn lp_examples() {
        let s = f(1, 2, &[0.0, 0.0, 0.0, 4.0]);
        assert_eq!(lp_norm(&s, 1.0, &s.root()).unwrap(), 1.0);
        let c = f(1, 2, &[-3.0; 4]);
        for p in [0.5, 1.0, 2.0, 7.0] {
            assert!((lp_norm(&c, p, &c.root()).unwrap() - 3.0).abs() < 1e-14);
        }
        let g = f(1, 1, &[3.0, 4.0]);
        assert_eq!(lp_norm(&g, 2.0, &g.root()).unwrap(), 12.5f64.sqrt());
        assert!(lp_norm(&g, 0.0, &g.root()).is_err());
        assert!(lp_norm(&g, -1.0, &g.root()).is_err());
    }

    #[test]
    fn weak_examples() {
        let s = f(1, 2, &[0.0, 0.0, 0.0, 4.0]);
        assert_eq!(weak_lp_norm(&s, 2.0, &s.root()).unwrap(), 2.0);
        let c = f(1, 2, &[2.5; 4]);
        assert_eq!(weak_lp_norm(&c, 3.0, &c.root()).unwrap(), 2.5);
        let g = f(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        let w = weak_lp_norm(&g, 2.0, &g.root()).unwrap();
        assert!((w - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(weak_lp_norm(&g, 0.0, &g.root()).is_err());
    }

    #[test]
    fn distribution_examples() {
        let s = f(1, 2, &[0.0, 0.0, 0.0, 4.0]);
        assert_eq!(distribution_fraction(&s, 1.0, &s.root()).unwrap(), 0.25);
        assert_eq!(distribution_fraction(&s, -0.5, &s.root()).unwrap(), 1.0);
        assert_eq!(distribution_fraction(&s, 4.0, &s.root()).unwrap(), 0.0);
    }

    #[test]
    fn weak_by_brute_force_threshold_scan() {
        let vals = [0.3, -1.2, 0.3, 2.0, 0.0, 1.2, 5.0, -0.1];
        let p = 1.7;
        let direct = weak_lp_of(&vals, p).unwrap();
        // the supremum over λ is approached from below each data value.
        let mut best: f64 = 0.0;
        for &v in &vals {
            let lam = v.abs() * (1.0 - 1e-12);
            best = best.max(lam * distribution_fraction_of(&vals, lam).powf(1.0 / p));
        }
        assert!((direct - best).abs() <= 1e-10 * direct);
        assert!(best <= direct);
    }

    #[test]
    fn exact_powers() {
        let vals: Vec<Rational> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| Rational::from_f64(v)).collect();
        assert_eq!(
            weak_lp_pow_exact(&vals, 2),
            Rational::from_u64(9) / Rational::from_u64(2)
        );
        assert_eq!(lp_pow_exact(&vals, 2), Rational::from_u64(30) / Rational::from_u64(4));
    }
}
