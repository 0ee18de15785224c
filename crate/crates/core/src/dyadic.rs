//! Dyadic trees over a base cube, grid functions and tree-summed averages.
//!
//! A node at level `j` is addressed by integer coordinates `c_i ∈ [0, 2^j)`.
//! Inside a level, nodes are stored at the flat index `Σ c_i · 2^{j(n-1-i)}`
//! (axis 0 slowest), which for `j = L` is the canonical leaf order.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Largest supported `dim * depth`; keeps leaf indices inside `u64` and
/// allocations sane.
pub const MAX_LEAF_BITS: u32 = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseCube {
    pub origin: Vec<f64>,
    pub side: f64,
}

impl BaseCube {
    pub fn new(origin: Vec<f64>, side: f64) -> Result<Self> {
        if origin.is_empty() {
            return Err(invalid("base cube needs dimension at least 1"));
        }
        if let Some(index) = origin.iter().position(|o| !o.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(invalid(format!("side must be positive and finite, got {side}")));
        }
        Ok(Self { origin, side })
    }

    /// `[0,1)^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            origin: vec![0.0; dim],
            side: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub coords: Vec<u64>,
}

impl DyadicCube {
    pub fn new(level: u32, coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("cube needs at least one coordinate"));
        }
        if level >= 64 {
            return Err(invalid(format!("level {level} is too large")));
        }
        if let Some(c) = coords.iter().find(|&&c| c >> level != 0) {
            return Err(invalid(format!("coordinate {c} out of range for level {level}")));
        }
        Ok(Self { level, coords })
    }

    pub fn root(dim: usize) -> Self {
        Self {
            level: 0,
            coords: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    pub fn parent(&self) -> Result<Self> {
        if self.level == 0 {
            return Err(Error::NoParent);
        }
        Ok(Self {
            level: self.level - 1,
            coords: self.coords.iter().map(|c| c >> 1).collect(),
        })
    }

    /// The `2^n` children in row-major order.
    pub fn children(&self) -> Vec<Self> {
        let n = self.dim();
        (0..1u64 << n)
            .map(|e| Self {
                level: self.level + 1,
                coords: (0..n).map(|i| 2 * self.coords[i] + ((e >> (n - 1 - i)) & 1)).collect(),
            })
            .collect()
    }

    /// Ancestor at level `j ≤ self.level`.
    pub fn ancestor(&self, j: u32) -> Self {
        assert!(j <= self.level);
        let shift = self.level - j;
        Self {
            level: j,
            coords: self.coords.iter().map(|c| c >> shift).collect(),
        }
    }

    /// True when `other ⊂ self` (including equality).
    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    pub fn side(&self, base: &BaseCube) -> f64 {
        base.side / 2f64.powi(self.level as i32)
    }

    pub fn volume(&self, base: &BaseCube) -> f64 {
        self.side(base).powi(self.dim() as i32)
    }

    pub fn lower_corner(&self, base: &BaseCube) -> Vec<f64> {
        let s = self.side(base);
        base.origin
            .iter()
            .zip(&self.coords)
            .map(|(o, &c)| o + c as f64 * s)
            .collect()
    }

    /// Geometry of this cube as a base cube in its own right.
    pub fn as_base(&self, base: &BaseCube) -> BaseCube {
        BaseCube {
            origin: self.lower_corner(base),
            side: self.side(base),
        }
    }
}

impl std::fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}{:?}", self.level, self.coords)
    }
}

/// Shape of a complete dyadic tree: dimension and finest level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Tree {
    dim: usize,
    depth: u32,
}

impl Tree {
    pub fn new(dim: usize, depth: u32) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if (dim as u64) * (depth as u64) > MAX_LEAF_BITS as u64 {
            return Err(invalid(format!(
                "dim * depth = {} exceeds the supported {MAX_LEAF_BITS}",
                dim as u64 * depth as u64
            )));
        }
        Ok(Self { dim, depth })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn arity(&self) -> usize {
        1 << self.dim
    }

    pub fn level_len(&self, j: u32) -> usize {
        1usize << (self.dim as u32 * j)
    }

    pub fn leaf_count(&self) -> usize {
        self.level_len(self.depth)
    }

    pub fn node_count(&self) -> usize {
        (0..=self.depth).map(|j| self.level_len(j)).sum()
    }

    /// Number of leaves under one cube of level `j`.
    pub fn leaves_per_cube(&self, j: u32) -> usize {
        self.level_len(self.depth - j)
    }

    pub fn index(&self, coords: &[u64], j: u32) -> usize {
        coords.iter().fold(0usize, |acc, &c| (acc << j) | c as usize)
    }

    pub fn coords(&self, j: u32, idx: usize) -> Vec<u64> {
        let mask = (1usize << j) - 1;
        (0..self.dim)
            .map(|i| ((idx >> (j as usize * (self.dim - 1 - i))) & mask) as u64)
            .collect()
    }

    pub fn cube(&self, j: u32, idx: usize) -> DyadicCube {
        DyadicCube {
            level: j,
            coords: self.coords(j, idx),
        }
    }

    /// Flat index of `cube` inside its level, checking it fits this tree.
    pub fn locate(&self, cube: &DyadicCube) -> Result<usize> {
        if cube.dim() != self.dim {
            return Err(invalid(format!(
                "cube has dimension {}, tree has {}",
                cube.dim(),
                self.dim
            )));
        }
        if cube.level > self.depth {
            return Err(Error::TooDeep {
                level: cube.level,
                depth: self.depth,
            });
        }
        if cube.coords.iter().any(|&c| c >> cube.level != 0) {
            return Err(invalid(format!("cube {cube} lies outside the base cube")));
        }
        Ok(self.index(&cube.coords, cube.level))
    }

    /// Level-`j+1` indices of the children of node `(j, idx)`, row-major.
    pub fn children(&self, j: u32, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.dim;
        let coords = self.coords(j, idx);
        (0..1usize << n).map(move |e| {
            coords.iter().enumerate().fold(0usize, |acc, (i, &c)| {
                (acc << (j + 1)) | (2 * c as usize + ((e >> (n - 1 - i)) & 1))
            })
        })
    }

    pub fn parent(&self, j: u32, idx: usize) -> usize {
        assert!(j > 0);
        let coords: Vec<u64> = self.coords(j, idx).iter().map(|c| c >> 1).collect();
        self.index(&coords, j - 1)
    }

    /// Level-`j` ancestor of the node `(level, idx)`.
    pub fn ancestor(&self, level: u32, idx: usize, j: u32) -> usize {
        assert!(j <= level);
        let shift = level - j;
        let coords: Vec<u64> = self.coords(level, idx).iter().map(|c| c >> shift).collect();
        self.index(&coords, j)
    }

    /// Leaf indices under `(j, idx)` in the local row-major order.
    pub fn leaves(&self, j: u32, idx: usize) -> Vec<usize> {
        let s = self.depth - j;
        let n = self.dim;
        let base: Vec<usize> = self.coords(j, idx).iter().map(|&c| (c as usize) << s).collect();
        let count = 1usize << (n as u32 * s);
        let mask = (1usize << s) - 1;
        (0..count)
            .map(|k| {
                (0..n).fold(0usize, |acc, i| {
                    let local = (k >> (s as usize * (n - 1 - i))) & mask;
                    (acc << self.depth) | (base[i] + local)
                })
            })
            .collect()
    }

    /// For every level `j`, the level-`j` ancestor index of every leaf.
    pub fn ancestor_table(&self) -> Vec<Vec<usize>> {
        (0..=self.depth)
            .map(|j| {
                (0..self.leaf_count())
                    .map(|leaf| self.ancestor(self.depth, leaf, j))
                    .collect()
            })
            .collect()
    }
}

/// One value per node of a [`Tree`], stored level by level.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeMap<T> {
    tree: Tree,
    levels: Vec<Vec<T>>,
}

impl<T> CubeMap<T> {
    pub fn from_levels(tree: Tree, levels: Vec<Vec<T>>) -> Self {
        assert_eq!(levels.len(), tree.depth() as usize + 1);
        for (j, level) in levels.iter().enumerate() {
            assert_eq!(level.len(), tree.level_len(j as u32));
        }
        Self { tree, levels }
    }

    pub fn from_fn(tree: Tree, mut f: impl FnMut(u32, usize) -> T) -> Self {
        let levels = (0..=tree.depth())
            .map(|j| (0..tree.level_len(j)).map(|idx| f(j, idx)).collect())
            .collect();
        Self { tree, levels }
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn get(&self, j: u32, idx: usize) -> &T {
        &self.levels[j as usize][idx]
    }

    pub fn level(&self, j: u32) -> &[T] {
        &self.levels[j as usize]
    }

    pub fn root(&self) -> &T {
        &self.levels[0][0]
    }

    pub fn at(&self, cube: &DyadicCube) -> Result<&T> {
        let idx = self.tree.locate(cube)?;
        Ok(self.get(cube.level, idx))
    }

    pub fn map<U>(&self, mut f: impl FnMut(u32, usize, &T) -> U) -> CubeMap<U> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(j, level)| level.iter().enumerate().map(|(idx, v)| f(j as u32, idx, v)).collect())
            .collect();
        CubeMap {
            tree: self.tree,
            levels,
        }
    }

    /// `(level, index, value)` for every node, coarse levels first.
    pub fn iter(&self) -> impl Iterator<Item = (u32, usize, &T)> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(j, level)| level.iter().enumerate().map(move |(idx, v)| (j as u32, idx, v)))
    }
}

/// Tree-summed mean of `values`, a full local grid of `2^{n s}` entries in
/// row-major order. Uses exactly the same operations as [`averages`], so the
/// result is bit-identical to the pyramid value of the corresponding cube.
pub fn local_mean<T: Scalar>(dim: usize, values: &[T]) -> T {
    let mut buf = values.to_vec();
    let mut s = 0u32;
    while (1usize << (dim as u32 * s)) < buf.len() {
        s += 1;
    }
    assert_eq!(
        buf.len(),
        1usize << (dim as u32 * s),
        "local grid must be a full dyadic block"
    );
    let local = Tree { dim, depth: s };
    let arity = T::from_u64(1u64 << dim);
    for j in (0..s).rev() {
        let next: Vec<T> = (0..local.level_len(j))
            .map(|idx| sum_children(&local, j, idx, &buf) / arity.clone())
            .collect();
        buf = next;
    }
    buf.pop().expect("nonempty grid")
}

fn sum_children<T: Scalar>(tree: &Tree, j: u32, idx: usize, finer: &[T]) -> T {
    let mut it = tree.children(j, idx);
    let first = it.next().expect("at least one child");
    it.fold(finer[first].clone(), |acc, c| acc + finer[c].clone())
}

/// Averages of leaf values over every node, by pairwise tree summation.
pub fn averages<T: Scalar>(tree: Tree, values: &[T]) -> CubeMap<T> {
    assert_eq!(values.len(), tree.leaf_count());
    let mut levels: Vec<Vec<T>> = vec![Vec::new(); tree.depth() as usize + 1];
    levels[tree.depth() as usize] = values.to_vec();
    let arity = T::from_u64(tree.arity() as u64);
    for j in (0..tree.depth()).rev() {
        let finer = &levels[j as usize + 1];
        let level: Vec<T> = (0..tree.level_len(j))
            .map(|idx| sum_children(&tree, j, idx, finer) / arity.clone())
            .collect();
        levels[j as usize] = level;
    }
    CubeMap::from_levels(tree, levels)
}

/// Piecewise-constant function on the level-`depth` partition of a base cube.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    base: BaseCube,
    tree: Tree,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridFunctionFile {
    dim: usize,
    depth: u32,
    #[serde(default)]
    origin: Option<Vec<f64>>,
    #[serde(default)]
    side: Option<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(base: BaseCube, depth: u32, values: Vec<f64>) -> Result<Self> {
        let tree = Tree::new(base.dim(), depth)?;
        if values.len() != tree.leaf_count() {
            return Err(Error::LengthMismatch {
                dim: base.dim(),
                depth,
                expected: tree.leaf_count(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { base, tree, values })
    }

    /// Grid function on `[0,1)^dim`.
    pub fn on_unit_cube(dim: usize, depth: u32, values: Vec<f64>) -> Result<Self> {
        Self::new(BaseCube::unit(dim), depth, values)
    }

    pub fn constant(base: BaseCube, depth: u32, c: f64) -> Result<Self> {
        let n = Tree::new(base.dim(), depth)?.leaf_count();
        Self::new(base, depth, vec![c; n])
    }

    pub fn base(&self) -> &BaseCube {
        &self.base
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    pub fn depth(&self) -> u32 {
        self.tree.depth()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::root(self.dim())
    }

    /// Same grid, new leaf values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.base.clone(), self.depth(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Self {
        Self {
            base: self.base.clone(),
            tree: self.tree,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Leaf values under `cube` in local row-major order.
    pub fn local_values(&self, cube: &DyadicCube) -> Result<Vec<f64>> {
        let idx = self.tree.locate(cube)?;
        Ok(self
            .tree
            .leaves(cube.level, idx)
            .into_iter()
            .map(|l| self.values[l])
            .collect())
    }

    /// The restriction to `cube`, as a grid function on that cube.
    pub fn restrict(&self, cube: &DyadicCube) -> Result<Self> {
        let values = self.local_values(cube)?;
        Self::new(cube.as_base(&self.base), self.depth() - cube.level, values)
    }

    pub fn cube_volume(&self, cube: &DyadicCube) -> f64 {
        cube.volume(&self.base)
    }

    /// All node averages.
    pub fn averages(&self) -> CubeMap<f64> {
        averages(self.tree, &self.values)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GridFunctionFile {
            dim: self.dim(),
            depth: self.depth(),
            origin: Some(self.base.origin.clone()),
            side: Some(self.base.side),
            values: self.values.clone(),
        })
        .expect("grid functions serialize")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GridFunctionFile = serde_json::from_str(s)?;
        let origin = file.origin.unwrap_or_else(|| vec![0.0; file.dim]);
        if origin.len() != file.dim {
            return Err(invalid(format!(
                "origin has {} entries for dim {}",
                origin.len(),
                file.dim
            )));
        }
        let base = BaseCube::new(origin, file.side.unwrap_or(1.0))?;
        Self::new(base, file.depth, file.values)
    }
}

/// Checked constructor mirroring the file format fields.
pub fn build_grid_function(dim: usize, depth: u32, base: BaseCube, values: Vec<f64>) -> Result<GridFunction> {
    if base.dim() != dim {
        return Err(invalid(format!(
            "base cube has dimension {}, expected {dim}",
            base.dim()
        )));
    }
    GridFunction::new(base, depth, values)
}

/// Exact mean of the leaf values under `cube`.
pub fn cube_average(f: &GridFunction, cube: &DyadicCube) -> Result<f64> {
    Ok(local_mean(f.dim(), &f.local_values(cube)?))
}

pub fn dyadic_parent(cube: &DyadicCube) -> Result<DyadicCube> {
    cube.parent()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn spike() -> GridFunction {
        GridFunction::on_unit_cube(1, 2, vec![0.0, 0.0, 0.0, 4.0]).unwrap()
    }

    #[test]
    fn build_examples() {
        let f = spike();
        assert_eq!(*f.averages().root(), 1.0);
        let c = GridFunction::on_unit_cube(1, 0, vec![7.5]).unwrap();
        assert_eq!(*c.averages().root(), 7.5);
        let err = GridFunction::on_unit_cube(2, 1, vec![1.0; 3]).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 4,
                got: 3,
                ..
            }
        ));
        let err = GridFunction::on_unit_cube(1, 1, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
    }

    #[test]
    fn cube_average_examples() {
        let f = spike();
        let right = DyadicCube::new(1, vec![1]).unwrap();
        assert_eq!(cube_average(&f, &right).unwrap(), 2.0);
        let leaf = DyadicCube::new(2, vec![3]).unwrap();
        assert_eq!(cube_average(&f, &leaf).unwrap(), 4.0);
        let too_deep = DyadicCube::new(3, vec![0]).unwrap();
        assert!(matches!(
            cube_average(&f, &too_deep),
            Err(Error::TooDeep { level: 3, depth: 2 })
        ));
    }

    #[test]
    fn parent_examples() {
        let q = DyadicCube::new(2, vec![3]).unwrap();
        assert_eq!(dyadic_parent(&q).unwrap(), DyadicCube::new(1, vec![1]).unwrap());
        let q = DyadicCube::new(1, vec![1, 0]).unwrap();
        assert_eq!(dyadic_parent(&q).unwrap(), DyadicCube::root(2));
        assert!(matches!(dyadic_parent(&DyadicCube::root(3)), Err(Error::NoParent)));
        let base = BaseCube::new(vec![0.0, 0.0], 2.0).unwrap();
        let child = DyadicCube::new(1, vec![1, 0]).unwrap();
        assert_eq!(child.parent().unwrap().volume(&base), 4.0 * child.volume(&base));
    }

    #[test]
    fn leaf_order_is_row_major_axis_zero_slowest() {
        let tree = Tree::new(2, 2).unwrap();
        // leaf (k1, k2) = (1, 2) sits at 1*4 + 2.
        assert_eq!(tree.index(&[1, 2], 2), 6);
        assert_eq!(tree.coords(2, 6), vec![1, 2]);
        // the level-1 cube (0, 1) holds leaves (0,2),(0,3),(1,2),(1,3).
        assert_eq!(tree.leaves(1, 1), vec![2, 3, 6, 7]);
        assert_eq!(tree.children(1, 1).collect::<Vec<_>>(), vec![2, 3, 6, 7]);
        assert_eq!(tree.parent(2, 7), 1);
    }

    #[test]
    fn navigation_agrees_with_cube_methods() {
        let tree = Tree::new(3, 2).unwrap();
        for idx in 0..tree.level_len(2) {
            let cube = tree.cube(2, idx);
            let parent = cube.parent().unwrap();
            assert_eq!(tree.locate(&parent).unwrap(), tree.parent(2, idx));
            assert!(parent.contains(&cube));
        }
        let kids: Vec<usize> = tree.children(1, 5).collect();
        let expected: Vec<usize> = tree
            .cube(1, 5)
            .children()
            .iter()
            .map(|c| tree.locate(c).unwrap())
            .collect();
        assert_eq!(kids, expected);
    }

    #[test]
    fn local_mean_matches_pyramid_bitwise() {
        let values: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 * 0.1 + 1e-3).collect();
        let f = GridFunction::on_unit_cube(2, 3, values).unwrap();
        let avgs = f.averages();
        for (j, idx, &a) in avgs.iter() {
            let cube = f.tree().cube(j, idx);
            assert_eq!(cube_average(&f, &cube).unwrap().to_bits(), a.to_bits());
        }
    }

    #[test]
    fn rational_averages_are_exact() {
        let tree = Tree::new(1, 2).unwrap();
        let vals: Vec<Rational> = [0.1, 0.2, 0.3, 0.7].iter().map(|&v| Rational::from_f64(v)).collect();
        let avgs = averages(tree, &vals);
        let sum = vals.iter().cloned().fold(Rational::zero(), |a, b| a + b);
        assert_eq!(*avgs.root(), sum / Rational::from_u64(4));
    }

    #[test]
    fn json_roundtrip() {
        let f = spike();
        let s = f.to_json().to_string();
        assert_eq!(GridFunction::from_json_str(&s).unwrap(), f);
    }

    #[test]
    fn restriction_keeps_local_order() {
        let f = GridFunction::on_unit_cube(2, 2, (0..16).map(f64::from).collect()).unwrap();
        let q = DyadicCube::new(1, vec![1, 0]).unwrap();
        let r = f.restrict(&q).unwrap();
        assert_eq!(r.values(), &[8.0, 9.0, 12.0, 13.0]);
        assert_eq!(r.base().origin, vec![0.5, 0.0]);
        assert_eq!(r.base().side, 0.5);
    }
}
