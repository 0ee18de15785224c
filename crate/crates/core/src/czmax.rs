//! Dyadic maximal functions and Calderón–Zygmund stopping families.
//!
//! Operations taking a cube `q0` work on the restriction of `f` to `q0`;
//! returned grid functions live on `q0` and returned cubes carry absolute
//! coordinates in the tree of `f`.

use serde::Serialize;

use crate::dyadic::{averages, CubeMap, DyadicCube, GridFunction, Tree};
use crate::error::{Error, Result};
use crate::oscillations::OscillationFamily;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingCriterion {
    Average,
    Oscillation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingFamily {
    pub cubes: Vec<DyadicCube>,
    pub threshold: f64,
    pub criterion: StoppingCriterion,
    /// The stopping quantity on `q0` itself, which is never a member.
    pub root_value: f64,
}

/// At every leaf, the max of `table` over the cubes containing it. With
/// `include_root == false` the root is skipped (and a depth-0 tree yields
/// zeros).
pub fn sup_over_ancestors<T: Scalar>(table: &CubeMap<T>, include_root: bool) -> Vec<T> {
    let tree = table.tree();
    let start = if include_root { 0 } else { 1 };
    if start > tree.depth() {
        return vec![T::zero(); tree.leaf_count()];
    }
    let mut running: Vec<T> = table.level(start).to_vec();
    for j in start + 1..=tree.depth() {
        let next: Vec<T> = (0..tree.level_len(j))
            .map(|idx| {
                let parent = tree.parent(j, idx);
                running[parent].clone().max(table.get(j, idx).clone())
            })
            .collect();
        running = next;
    }
    running
}

/// Maximal cubes, excluding the root, whose `table` value is strictly above
/// `lambda`; as `(level, index)` pairs in depth-first order.
pub fn stopping_nodes<T: Scalar>(table: &CubeMap<T>, lambda: &T) -> Vec<(u32, usize)> {
    let tree = table.tree();
    let mut out = Vec::new();
    if tree.depth() == 0 {
        return out;
    }
    let mut stack: Vec<(u32, usize)> = tree.children(0, 0).map(|c| (1, c)).collect();
    stack.reverse();
    while let Some((j, idx)) = stack.pop() {
        if table.get(j, idx) > lambda {
            out.push((j, idx));
        } else if j < tree.depth() {
            let mut kids: Vec<(u32, usize)> = tree.children(j, idx).map(|c| (j + 1, c)).collect();
            kids.reverse();
            stack.extend(kids);
        }
    }
    out
}

/// Leaf indicator of the union of a node set.
pub fn leaf_union(tree: Tree, nodes: &[(u32, usize)]) -> Vec<bool> {
    let mut mask = vec![false; tree.leaf_count()];
    for &(j, idx) in nodes {
        for l in tree.leaves(j, idx) {
            mask[l] = true;
        }
    }
    mask
}

/// `M f` on the leaves of a full tree, in any scalar type.
pub fn dyadic_maximal_values<T: Scalar>(tree: Tree, values: &[T]) -> Vec<T> {
    let abs: Vec<T> = values.iter().map(|v| v.abs()).collect();
    sup_over_ancestors(&averages(tree, &abs), true)
}

fn absolute(q0: &DyadicCube, tree: Tree, j: u32, idx: usize) -> DyadicCube {
    let local = tree.coords(j, idx);
    DyadicCube {
        level: q0.level + j,
        coords: q0.coords.iter().zip(local).map(|(c, l)| (c << j) + l).collect(),
    }
}

pub fn dyadic_maximal(f: &GridFunction, q0: &DyadicCube) -> Result<GridFunction> {
    let g = f.restrict(q0)?;
    let m = dyadic_maximal_values(g.tree(), g.values());
    g.with_values(m)
}

/// `sup_{Q ∋ x} ⨍_Q |B_Q f|` over the cubes of `q0`.
pub fn sharp_maximal(f: &GridFunction, q0: &DyadicCube, osc: &dyn OscillationFamily) -> Result<GridFunction> {
    let g = f.restrict(q0)?;
    let table = osc.oscillation_table(&g)?;
    g.with_values(sup_over_ancestors(&table, true))
}

/// Maximal proper subcubes of `q0` with `⨍_Q |f| > λ`. Requires
/// `λ ≥ ⨍_{q0} |f|`.
pub fn cz_decomposition(f: &GridFunction, lambda: f64, q0: &DyadicCube) -> Result<StoppingFamily> {
    let g = f.restrict(q0)?.abs();
    let avgs = g.averages();
    let root = *avgs.root();
    if !(lambda >= root) {
        return Err(Error::Precondition(format!(
            "threshold {lambda} is below the average {root} of |f| on the base cube"
        )));
    }
    let tree = g.tree();
    Ok(StoppingFamily {
        cubes: stopping_nodes(&avgs, &lambda)
            .into_iter()
            .map(|(j, idx)| absolute(q0, tree, j, idx))
            .collect(),
        threshold: lambda,
        criterion: StoppingCriterion::Average,
        root_value: root,
    })
}

/// Maximal proper subcubes of `q0` with `⨍_Q |B_Q f| > λ`.
///
/// Only proper subcubes are scanned, so the family is returned even when the
/// oscillation on `q0` itself exceeds `λ`; `root_value` reports it.
pub fn generalized_cz_decomposition(
    f: &GridFunction,
    lambda: f64,
    q0: &DyadicCube,
    osc: &dyn OscillationFamily,
) -> Result<StoppingFamily> {
    if lambda.is_nan() {
        return Err(Error::InvalidParameter("threshold is NaN".into()));
    }
    let g = f.restrict(q0)?;
    let table = osc.oscillation_table(&g)?;
    let tree = g.tree();
    Ok(StoppingFamily {
        cubes: stopping_nodes(&table, &lambda)
            .into_iter()
            .map(|(j, idx)| absolute(q0, tree, j, idx))
            .collect(),
        threshold: lambda,
        criterion: StoppingCriterion::Oscillation,
        root_value: *table.root(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillations::{cell_averaged_polynomial, MeanFamily, PolynomialFamily};

    fn spike() -> GridFunction {
        GridFunction::on_unit_cube(1, 2, vec![0.0, 0.0, 0.0, 4.0]).unwrap()
    }

    #[test]
    fn maximal_examples() {
        let f = spike();
        let m = dyadic_maximal(&f, &f.root()).unwrap();
        assert_eq!(m.values(), &[1.0, 1.0, 2.0, 4.0]);
        let c = GridFunction::on_unit_cube(2, 2, vec![-1.5; 16]).unwrap();
        assert!(dyadic_maximal(&c, &c.root())
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 1.5));
    }

    #[test]
    fn maximal_on_a_subcube() {
        let f = spike();
        let right = DyadicCube::new(1, vec![1]).unwrap();
        let m = dyadic_maximal(&f, &right).unwrap();
        assert_eq!(m.values(), &[2.0, 4.0]);
    }

    #[test]
    fn sharp_examples() {
        let f = GridFunction::on_unit_cube(1, 1, vec![0.0, 4.0]).unwrap();
        let s = sharp_maximal(&f, &f.root(), &MeanFamily).unwrap();
        assert_eq!(s.values(), &[2.0, 2.0]);
        let c = GridFunction::on_unit_cube(1, 3, vec![2.0; 8]).unwrap();
        assert!(sharp_maximal(&c, &c.root(), &MeanFamily)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let lin = cell_averaged_polynomial(1, 4, &[(1.0, vec![1])]).unwrap();
        let fam = PolynomialFamily::new(1, 4, 1).unwrap();
        let s = sharp_maximal(&lin, &lin.root(), &fam).unwrap();
        assert!(s.values().iter().all(|&v| v < 1e-13));
    }

    #[test]
    fn cz_examples() {
        let f = spike();
        let fam = cz_decomposition(&f, 1.5, &f.root()).unwrap();
        assert_eq!(fam.cubes, vec![DyadicCube::new(1, vec![1]).unwrap()]);
        assert!(cz_decomposition(&f, 5.0, &f.root()).unwrap().cubes.is_empty());
        assert!(matches!(
            cz_decomposition(&f, 0.5, &f.root()),
            Err(Error::Precondition(_))
        ));
        // ties do not stop.
        let fam = cz_decomposition(&f, 2.0, &f.root()).unwrap();
        assert_eq!(fam.cubes, vec![DyadicCube::new(2, vec![3]).unwrap()]);
    }

    #[test]
    fn generalized_cz_examples() {
        let f = GridFunction::on_unit_cube(1, 2, vec![0.0, 4.0, 0.0, 4.0]).unwrap();
        let fam = generalized_cz_decomposition(&f, 1.0, &f.root(), &MeanFamily).unwrap();
        assert_eq!(
            fam.cubes,
            vec![
                DyadicCube::new(1, vec![0]).unwrap(),
                DyadicCube::new(1, vec![1]).unwrap()
            ]
        );
        assert_eq!(fam.root_value, 2.0);
        let c = GridFunction::on_unit_cube(1, 3, vec![1.0; 8]).unwrap();
        assert!(generalized_cz_decomposition(&c, 0.1, &c.root(), &MeanFamily)
            .unwrap()
            .cubes
            .is_empty());
    }

    #[test]
    fn cz_union_is_the_maximal_level_set() {
        let vals: Vec<f64> = (0..64).map(|i| ((i * 29 + 7) % 13) as f64 - 3.0).collect();
        let f = GridFunction::on_unit_cube(2, 3, vals).unwrap();
        let m = dyadic_maximal(&f, &f.root()).unwrap();
        let avg = *f.abs().averages().root();
        for lambda in [avg, avg * 1.3, avg * 2.0, 7.0, 20.0] {
            let fam = cz_decomposition(&f, lambda, &f.root()).unwrap();
            let tree = f.tree();
            let nodes: Vec<(u32, usize)> = fam.cubes.iter().map(|c| (c.level, tree.locate(c).unwrap())).collect();
            let union = leaf_union(tree, &nodes);
            for (leaf, &inside) in union.iter().enumerate() {
                assert_eq!(inside, m.values()[leaf] > lambda);
            }
        }
    }
}
