//! Local oscillation families: operators `A_Q` with `B_Q = I - A_Q`, a
//! uniform bound `‖A_Q f‖_∞ ≤ C_B ⨍_Q |f|`, and the nesting identity
//! `B_{Q1} A_{Q2} f = 0` on `Q1 ⊂ Q2`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::dyadic::{averages, local_mean, CubeMap, DyadicCube, GridFunction, Tree};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    Mean,
    Polynomial { degree: u32 },
    Custom { name: String },
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Mean => write!(f, "mean"),
            FamilyKind::Polynomial { degree } => write!(f, "polynomial({degree})"),
            FamilyKind::Custom { name } => write!(f, "custom({name})"),
        }
    }
}

pub trait OscillationFamily: Send + Sync {
    fn kind(&self) -> FamilyKind;

    /// The constant `C_B`.
    fn constant(&self) -> f64;

    /// `A_Q f` on the leaves of `q`, in local row-major order.
    fn project(&self, f: &GridFunction, q: &DyadicCube) -> Result<Vec<f64>>;

    /// `B_Q f = f - A_Q f` on the leaves of `q`.
    fn residual(&self, f: &GridFunction, q: &DyadicCube) -> Result<Vec<f64>> {
        let a = self.project(f, q)?;
        Ok(f.local_values(q)?.into_iter().zip(a).map(|(v, a)| v - a).collect())
    }

    /// `⨍_Q |B_Q f|` for every cube of the tree.
    fn oscillation_table(&self, f: &GridFunction) -> Result<CubeMap<f64>> {
        let tree = f.tree();
        let mut levels = Vec::with_capacity(tree.depth() as usize + 1);
        for j in 0..=tree.depth() {
            let mut level = Vec::with_capacity(tree.level_len(j));
            for idx in 0..tree.level_len(j) {
                let r = self.residual(f, &tree.cube(j, idx))?;
                let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
                level.push(local_mean(tree.dim(), &abs));
            }
            levels.push(level);
        }
        Ok(CubeMap::from_levels(tree, levels))
    }

    /// `⨍_Q |A_Q f|` for every cube.
    fn projection_mass_table(&self, f: &GridFunction) -> Result<CubeMap<f64>> {
        let tree = f.tree();
        let mut levels = Vec::with_capacity(tree.depth() as usize + 1);
        for j in 0..=tree.depth() {
            let mut level = Vec::with_capacity(tree.level_len(j));
            for idx in 0..tree.level_len(j) {
                let a = self.project(f, &tree.cube(j, idx))?;
                let abs: Vec<f64> = a.iter().map(|v| v.abs()).collect();
                level.push(local_mean(tree.dim(), &abs));
            }
            levels.push(level);
        }
        Ok(CubeMap::from_levels(tree, levels))
    }
}

/// `⨍_Q |f - f_Q|` for every cube, in any scalar type.
pub fn mean_oscillation_table<T: Scalar>(tree: Tree, values: &[T]) -> CubeMap<T> {
    let avgs = averages(tree, values);
    CubeMap::from_fn(tree, |j, idx| {
        let a = avgs.get(j, idx);
        let dev: Vec<T> = tree
            .leaves(j, idx)
            .into_iter()
            .map(|l| (values[l].clone() - a.clone()).abs())
            .collect();
        local_mean(tree.dim(), &dev)
    })
}

/// `A_Q f = (⨍_Q f) χ_Q`, `C_B = 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanFamily;

impl OscillationFamily for MeanFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Mean
    }

    fn constant(&self) -> f64 {
        1.0
    }

    fn project(&self, f: &GridFunction, q: &DyadicCube) -> Result<Vec<f64>> {
        let local = f.local_values(q)?;
        let avg = local_mean(f.dim(), &local);
        Ok(vec![avg; local.len()])
    }

    fn oscillation_table(&self, f: &GridFunction) -> Result<CubeMap<f64>> {
        Ok(mean_oscillation_table(f.tree(), f.values()))
    }
}

pub fn mean_oscillation_family() -> MeanFamily {
    MeanFamily
}

/// Orthonormal cell-averaged polynomials on a cube with `2^s` cells per axis.
#[derive(Clone, Debug)]
pub struct PolynomialBasis {
    pub resolution: u32,
    /// Exponent of each input monomial, graded order.
    pub exponents: Vec<Vec<u32>>,
    /// Orthonormal vectors, each of length `2^{n s}` in row-major cell order.
    pub vectors: Vec<Vec<f64>>,
    /// Number of monomials dropped as numerically dependent.
    pub dropped: usize,
}

impl PolynomialBasis {
    /// `max_x Σ_α φ_α(x)²`, which is the exact `max |K(x,y)|` of the
    /// projection kernel by Cauchy–Schwarz.
    pub fn kernel_max(&self) -> f64 {
        let cells = self.vectors.first().map_or(0, Vec::len);
        (0..cells)
            .map(|x| self.vectors.iter().map(|v| v[x] * v[x]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Multi-indices with total degree ≤ m, by degree then lexicographically.
pub fn monomial_exponents(dim: usize, m: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(dim, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=m {
        rec(dim, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Average of `x^e` over the `k`-th of `cells` equal cells of `[-1/2, 1/2)`.
fn cell_moment(e: u32, k: usize, cells: usize) -> f64 {
    if e == 0 {
        return 1.0;
    }
    let h = 1.0 / cells as f64;
    let a = -0.5 + k as f64 * h;
    let b = a + h;
    (b.powi(e as i32 + 1) - a.powi(e as i32 + 1)) / ((e as f64 + 1.0) * h)
}

fn inner(dim: usize, u: &[f64], v: &[f64]) -> f64 {
    let prod: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    local_mean(dim, &prod)
}

impl PolynomialBasis {
    pub fn build(dim: usize, resolution: u32, m: u32) -> Self {
        let per_axis = 1usize << resolution;
        let cells = 1usize << (dim as u32 * resolution);
        let exponents = monomial_exponents(dim, m);
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut dropped = 0;
        for alpha in &exponents {
            let mono: Vec<f64> = (0..cells)
                .map(|cell| {
                    (0..dim)
                        .map(|i| {
                            let k = (cell >> (resolution as usize * (dim - 1 - i))) & (per_axis - 1);
                            cell_moment(alpha[i], k, per_axis)
                        })
                        .product()
                })
                .collect();
            let original = inner(dim, &mono, &mono).sqrt();
            let mut u = mono;
            for _pass in 0..2 {
                for e in &vectors {
                    let c = inner(dim, &u, e);
                    if c != 0.0 {
                        for (ui, ei) in u.iter_mut().zip(e) {
                            *ui -= c * ei;
                        }
                    }
                }
            }
            let norm = inner(dim, &u, &u).sqrt();
            if original == 0.0 || norm <= PIVOT_TOLERANCE * original {
                dropped += 1;
                continue;
            }
            vectors.push(u.into_iter().map(|x| x / norm).collect());
        }
        Self {
            resolution,
            exponents,
            vectors,
            dropped,
        }
    }

    /// Orthogonal projection of local values onto the span.
    pub fn project(&self, dim: usize, values: &[f64]) -> Vec<f64> {
        let mut out: Option<Vec<f64>> = None;
        for phi in &self.vectors {
            let c = inner(dim, values, phi);
            match out.as_mut() {
                None => out = Some(phi.iter().map(|p| c * p).collect()),
                Some(acc) => {
                    for (a, p) in acc.iter_mut().zip(phi) {
                        *a += c * p;
                    }
                }
            }
        }
        out.unwrap_or_else(|| vec![0.0; values.len()])
    }
}

/// Projection onto cell-averaged polynomials of degree ≤ m.
///
/// Every cube at the same number of levels above the leaves sees the same
/// reference grid after the affine map onto `[-1/2, 1/2)^n`, so one basis per
/// resolution serves all cubes. Where the cells of a cube cannot separate
/// all monomials (for instance on a single leaf) the projection is onto the
/// span of the ones that remain.
pub struct PolynomialFamily {
    dim: usize,
    depth: u32,
    degree: u32,
    bases: Vec<OnceLock<PolynomialBasis>>,
    constant: OnceLock<f64>,
}

impl fmt::Debug for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolynomialFamily")
            .field("dim", &self.dim)
            .field("depth", &self.depth)
            .field("degree", &self.degree)
            .finish()
    }
}

impl PolynomialFamily {
    pub fn new(dim: usize, depth: u32, degree: u32) -> Result<Self> {
        Tree::new(dim, depth)?;
        if degree > 16 {
            return Err(invalid(format!("polynomial degree {degree} is too large")));
        }
        Ok(Self {
            dim,
            depth,
            degree,
            bases: (0..=depth).map(|_| OnceLock::new()).collect(),
            constant: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Basis for cubes with `2^resolution` leaves per axis.
    pub fn basis(&self, resolution: u32) -> Result<&PolynomialBasis> {
        let slot = self.bases.get(resolution as usize).ok_or_else(|| {
            invalid(format!(
                "resolution {resolution} exceeds the family depth {}",
                self.depth
            ))
        })?;
        Ok(slot.get_or_init(|| PolynomialBasis::build(self.dim, resolution, self.degree)))
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if f.dim() != self.dim || f.depth() > self.depth {
            return Err(invalid(format!(
                "family built for dim {} depth ≤ {}, function has dim {} depth {}",
                self.dim,
                self.depth,
                f.dim(),
                f.depth()
            )));
        }
        Ok(())
    }
}

impl OscillationFamily for PolynomialFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Polynomial { degree: self.degree }
    }

    fn constant(&self) -> f64 {
        *self.constant.get_or_init(|| {
            (0..=self.depth)
                .map(|s| self.basis(s).expect("resolution in range").kernel_max())
                .fold(1.0, f64::max)
        })
    }

    fn project(&self, f: &GridFunction, q: &DyadicCube) -> Result<Vec<f64>> {
        self.check_grid(f)?;
        let local = f.local_values(q)?;
        let basis = self.basis(f.depth() - q.level)?;
        Ok(basis.project(self.dim, &local))
    }
}

pub fn polynomial_oscillation_family(dim: usize, depth: u32, degree: u32) -> Result<PolynomialFamily> {
    PolynomialFamily::new(dim, depth, degree)
}

type ProjectFn = dyn Fn(&GridFunction, &DyadicCube) -> Result<Vec<f64>> + Send + Sync;

/// A user-supplied `A_Q` with a declared `C_B`. Nothing is assumed about it;
/// run [`verify_oscillation_axioms`] before relying on it.
#[derive(Clone)]
pub struct CustomFamily {
    name: String,
    constant: f64,
    project: Arc<ProjectFn>,
}

impl CustomFamily {
    pub fn new(
        name: impl Into<String>,
        constant: f64,
        project: impl Fn(&GridFunction, &DyadicCube) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            constant,
            project: Arc::new(project),
        }
    }
}

impl OscillationFamily for CustomFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Custom {
            name: self.name.clone(),
        }
    }

    fn constant(&self) -> f64 {
        self.constant
    }

    fn project(&self, f: &GridFunction, q: &DyadicCube) -> Result<Vec<f64>> {
        let out = (self.project)(f, q)?;
        let expected = f.tree().leaves_per_cube(q.level);
        if out.len() != expected {
            return Err(invalid(format!(
                "custom projection returned {} values on a cube with {expected} leaves",
                out.len()
            )));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub family: FamilyKind,
    pub tolerance: f64,
    /// Max of `‖A(af+bg) - aAf - bAg‖_∞` relative to `|a|‖Af‖_∞ + |b|‖Ag‖_∞`.
    pub linearity_residual: f64,
    pub linearity_pass: bool,
    pub declared_constant: f64,
    /// Largest observed `‖A_Q f‖_∞ / ⨍_Q |f|`.
    pub empirical_constant: f64,
    pub empirical_constant_witness: Option<DyadicCube>,
    pub bound_pass: bool,
    /// Max of `‖B_{Q1} A_{Q2} f‖_∞ / ‖A_{Q2} f‖_∞` over nested `Q1 ⊊ Q2`.
    pub nesting_residual: f64,
    pub nesting_witness: Option<(DyadicCube, DyadicCube)>,
    pub nesting_pass: bool,
    /// Max change of `A_Q f` on `Q` when `f` is altered outside `Q`.
    pub locality_residual: f64,
    pub locality_pass: bool,
    pub pass: bool,
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Copy of `f` with the leaves of `q` replaced by `local`.
fn splice(f: &GridFunction, q: &DyadicCube, local: &[f64]) -> Result<GridFunction> {
    let tree = f.tree();
    let idx = tree.locate(q)?;
    let mut values = f.values().to_vec();
    for (leaf, v) in tree.leaves(q.level, idx).into_iter().zip(local) {
        values[leaf] = *v;
    }
    f.with_values(values)
}

/// Numerical check of the three axioms plus locality on the given probes.
pub fn verify_oscillation_axioms(
    osc: &dyn OscillationFamily,
    probes: &[GridFunction],
    tolerance: f64,
) -> Result<AxiomReport> {
    if probes.is_empty() {
        return Err(invalid("at least one probe function is required"));
    }
    let tree = probes[0].tree();
    if probes.iter().any(|p| p.tree() != tree) {
        return Err(invalid("all probes must share one grid"));
    }
    let cubes: Vec<DyadicCube> = (0..=tree.depth())
        .flat_map(|j| (0..tree.level_len(j)).map(move |idx| tree.cube(j, idx)))
        .collect();

    let (a, b) = (1.5, -0.75);
    let mut linearity_residual: f64 = 0.0;
    for (k, f) in probes.iter().enumerate() {
        let g = &probes[(k + 1) % probes.len()];
        let combo = f.with_values(f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect())?;
        for q in &cubes {
            let af = osc.project(f, q)?;
            let ag = osc.project(g, q)?;
            let ac = osc.project(&combo, q)?;
            let scale = a.abs() * sup_abs(&af) + b.abs() * sup_abs(&ag);
            let diff: f64 = ac
                .iter()
                .zip(af.iter().zip(&ag))
                .map(|(c, (x, y))| (c - a * x - b * y).abs())
                .fold(0.0, f64::max);
            let rel = if scale > 0.0 { diff / scale } else { diff };
            linearity_residual = linearity_residual.max(rel);
        }
    }

    let mut empirical_constant: f64 = 0.0;
    let mut empirical_constant_witness = None;
    for f in probes {
        for q in &cubes {
            let mass = local_mean(tree.dim(), &f.abs().local_values(q)?);
            if mass <= 0.0 {
                continue;
            }
            let ratio = sup_abs(&osc.project(f, q)?) / mass;
            if ratio > empirical_constant {
                empirical_constant = ratio;
                empirical_constant_witness = Some(q.clone());
            }
        }
    }

    let mut nesting_residual: f64 = 0.0;
    let mut nesting_witness = None;
    for f in probes {
        for q2 in &cubes {
            let h = osc.project(f, q2)?;
            let scale = sup_abs(&h);
            let spliced = splice(f, q2, &h)?;
            for q1 in cubes.iter().filter(|c| c.level > q2.level && q2.contains(c)) {
                let r = sup_abs(&osc.residual(&spliced, q1)?);
                let rel = if scale > 0.0 { r / scale } else { r };
                if rel > nesting_residual {
                    nesting_residual = rel;
                    nesting_witness = Some((q1.clone(), q2.clone()));
                }
            }
        }
    }

    let mut locality_residual: f64 = 0.0;
    for f in probes {
        for q in cubes.iter().filter(|c| !c.is_root()) {
            let inside = f.local_values(q)?;
            let mut outside: Vec<f64> = f.values().iter().map(|v| 3.0 * v + 1.0).collect();
            let idx = tree.locate(q)?;
            for (leaf, v) in tree.leaves(q.level, idx).into_iter().zip(&inside) {
                outside[leaf] = *v;
            }
            let altered = f.with_values(outside)?;
            let before = osc.project(f, q)?;
            let after = osc.project(&altered, q)?;
            let diff = before
                .iter()
                .zip(&after)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let scale = sup_abs(&before);
            locality_residual = locality_residual.max(if scale > 0.0 { diff / scale } else { diff });
        }
    }

    let declared = osc.constant();
    let linearity_pass = linearity_residual <= tolerance;
    let bound_pass = empirical_constant <= declared * (1.0 + tolerance);
    let nesting_pass = nesting_residual <= tolerance;
    let locality_pass = locality_residual <= tolerance;
    Ok(AxiomReport {
        family: osc.kind(),
        tolerance,
        linearity_residual,
        linearity_pass,
        declared_constant: declared,
        empirical_constant,
        empirical_constant_witness,
        bound_pass,
        nesting_residual,
        nesting_witness,
        nesting_pass,
        locality_residual,
        locality_pass,
        pass: linearity_pass && bound_pass && nesting_pass && locality_pass,
    })
}

/// Cell averages over the leaves of `[0,1)^dim` of a polynomial given as
/// `(coefficient, exponents)` terms, exact up to rounding.
pub fn cell_averaged_polynomial(dim: usize, depth: u32, terms: &[(f64, Vec<u32>)]) -> Result<GridFunction> {
    let tree = Tree::new(dim, depth)?;
    let per_axis = 1usize << depth;
    let h = 1.0 / per_axis as f64;
    let values = (0..tree.leaf_count())
        .map(|leaf| {
            let coords = tree.coords(depth, leaf);
            terms
                .iter()
                .map(|(c, alpha)| {
                    c * (0..dim)
                        .map(|i| {
                            let e = alpha[i];
                            let a = coords[i] as f64 * h;
                            let b = a + h;
                            if e == 0 {
                                1.0
                            } else {
                                (b.powi(e as i32 + 1) - a.powi(e as i32 + 1)) / ((e as f64 + 1.0) * h)
                            }
                        })
                        .product::<f64>()
                })
                .sum()
        })
        .collect();
    GridFunction::on_unit_cube(dim, depth, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, depth: u32, v: Vec<f64>) -> GridFunction {
        GridFunction::on_unit_cube(dim, depth, v).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn mean_family_examples() {
        let f = grid(1, 1, vec![0.0, 4.0]);
        assert_eq!(MeanFamily.project(&f, &f.root()).unwrap(), vec![2.0, 2.0]);
        let c = grid(1, 2, vec![3.25; 4]);
        assert!(MeanFamily.residual(&c, &c.root()).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(MeanFamily.constant(), 1.0);
    }

    #[test]
    fn linear_basis_matches_hand_gram_schmidt() {
        // at high resolution the cell-averaged basis approaches 1 and √12·x.
        let basis = PolynomialBasis::build(1, 10, 1);
        assert_eq!(basis.vectors.len(), 2);
        let cells = 1usize << 10;
        for (k, &v) in basis.vectors[1].iter().enumerate() {
            let x = -0.5 + (k as f64 + 0.5) / cells as f64;
            assert!((v - 12f64.sqrt() * x).abs() < 1e-5);
        }
        assert!(basis.vectors[0].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn basis_is_orthonormal() {
        for dim in 1..=2 {
            for m in 0..=3 {
                for s in 0..=4 {
                    let b = PolynomialBasis::build(dim, s, m);
                    for (i, u) in b.vectors.iter().enumerate() {
                        for (j, v) in b.vectors.iter().enumerate() {
                            let expected = if i == j { 1.0 } else { 0.0 };
                            assert!((inner(dim, u, v) - expected).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_resolutions_drop_monomials() {
        let single = PolynomialBasis::build(2, 0, 2);
        assert_eq!(single.vectors.len(), 1);
        let two = PolynomialBasis::build(1, 1, 2);
        assert_eq!(two.vectors.len(), 2);
        assert_eq!(two.dropped, 1);
    }

    #[test]
    fn degree_zero_equals_mean_bitwise() {
        for dim in 1..=2 {
            let depth = if dim == 1 { 5 } else { 3 };
            let n = 1usize << (dim * depth as usize);
            let f = grid(dim, depth, pseudo_random(n, 7 + dim as u64));
            let poly = PolynomialFamily::new(dim, depth, 0).unwrap();
            let a = poly.oscillation_table(&f).unwrap();
            let b = MeanFamily.oscillation_table(&f).unwrap();
            for ((_, _, x), (_, _, y)) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for j in 0..=depth {
                let q = f.tree().cube(j, 0);
                let pa = poly.project(&f, &q).unwrap();
                let pb = MeanFamily.project(&f, &q).unwrap();
                assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            assert_eq!(poly.constant(), 1.0);
        }
    }

    #[test]
    fn polynomials_are_reproduced() {
        let f = cell_averaged_polynomial(1, 5, &[(0.3, vec![0]), (-2.0, vec![1])]).unwrap();
        let fam = PolynomialFamily::new(1, 5, 1).unwrap();
        let table = fam.oscillation_table(&f).unwrap();
        assert!(table.iter().all(|(_, _, v)| *v < 1e-12));
        let g = cell_averaged_polynomial(2, 3, &[(1.0, vec![0, 0]), (0.5, vec![1, 1]), (-1.0, vec![2, 0])]).unwrap();
        let fam = PolynomialFamily::new(2, 3, 2).unwrap();
        for (j, idx, _) in g.averages().iter() {
            let r = fam.residual(&g, &g.tree().cube(j, idx)).unwrap();
            assert!(sup_abs(&r) < 1e-10, "level {j} cube {idx}");
        }
    }

    #[test]
    fn constant_is_attained_by_a_delta_probe() {
        let fam = PolynomialFamily::new(1, 4, 1).unwrap();
        let cb = fam.constant();
        // the kernel peaks at a corner cell of the finest-cell resolution.
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        let f = grid(1, 4, v);
        let a = fam.project(&f, &f.root()).unwrap();
        let ratio = sup_abs(&a) / (1.0 / 16.0);
        assert!(ratio <= cb * (1.0 + 1e-12));
        assert!(cb > 1.0);
    }

    #[test]
    fn axioms_hold_for_builtin_families() {
        let probes: Vec<GridFunction> = (0..3).map(|s| grid(2, 2, pseudo_random(16, s))).collect();
        let mean = verify_oscillation_axioms(&MeanFamily, &probes, 1e-10).unwrap();
        assert!(mean.pass, "{mean:?}");
        assert_eq!(mean.nesting_residual, 0.0);
        let poly = PolynomialFamily::new(2, 2, 1).unwrap();
        let report = verify_oscillation_axioms(&poly, &probes, 1e-10).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn understated_constant_is_caught_with_witness() {
        let inflated = CustomFamily::new("doubled-mean", 1.0, |f, q| {
            Ok(MeanFamily.project(f, q)?.into_iter().map(|v| 2.0 * v).collect())
        });
        let probes = vec![grid(1, 2, vec![1.0, 2.0, 3.0, 4.0])];
        let report = verify_oscillation_axioms(&inflated, &probes, 1e-10).unwrap();
        assert!(!report.bound_pass);
        assert!(report.empirical_constant_witness.is_some());
        assert!(!report.pass);
    }

    #[test]
    fn nonlocal_family_is_caught() {
        let global = CustomFamily::new("global-mean", 1.0, |f, q| {
            let avg = local_mean(f.dim(), f.values());
            Ok(vec![avg; f.tree().leaves_per_cube(q.level)])
        });
        let probes = vec![grid(1, 2, vec![1.0, 2.0, 3.0, 4.0])];
        let report = verify_oscillation_axioms(&global, &probes, 1e-10).unwrap();
        assert!(!report.locality_pass);
    }
}
