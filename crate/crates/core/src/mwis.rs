//! Maximum-weight families of pairwise disjoint sets, i.e. maximum-weight
//! independent sets of the intersection graph, by branch and bound.

use serde::Serialize;

/// Fixed-size bitset over `0..len`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut b = Self::new(len);
        for i in indices {
            b.insert(i);
        }
        b
    }

    pub fn full(len: usize) -> Self {
        Self::from_indices(len, 0..len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MwisResult {
    /// Total weight of `chosen`, summed in ascending index order.
    pub value: f64,
    /// Indices of the selected sets, ascending.
    pub chosen: Vec<usize>,
    /// Whether the search finished, making `value` the optimum.
    pub exact: bool,
    /// An upper bound on the optimum; equals `value` when exact.
    pub upper_bound: f64,
    pub nodes: u64,
}

/// Sum of `weights[i]` over `chosen` in ascending index order.
pub fn family_weight(weights: &[f64], chosen: &[usize]) -> f64 {
    let mut idx = chosen.to_vec();
    idx.sort_unstable();
    idx.iter().map(|&i| weights[i]).sum()
}

struct Search<'a> {
    weights: &'a [f64],
    adj: Vec<Bitset>,
    best_value: f64,
    best: Vec<usize>,
    nodes: u64,
    budget: Option<u64>,
    aborted: bool,
}

impl Search<'_> {
    /// Greedy clique cover of `p`: each clique is charged its heaviest
    /// member. Vertices are indexed in decreasing weight order.
    fn clique_bound(&self, p: &Bitset) -> f64 {
        let mut cliques: Vec<(Bitset, f64)> = Vec::new();
        for v in p.iter() {
            match cliques.iter_mut().find(|(members, _)| members.is_subset(&self.adj[v])) {
                Some((members, _)) => members.insert(v),
                None => {
                    let mut b = Bitset::new(p.len());
                    b.insert(v);
                    cliques.push((b, self.weights[v]));
                }
            }
        }
        cliques.iter().map(|(_, w)| w).sum()
    }

    fn run(&mut self, mut p: Bitset, current: &mut Vec<usize>, value: f64) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if let Some(b) = self.budget {
            if self.nodes > b {
                self.aborted = true;
                return;
            }
        }
        // vertices without neighbours in p belong to some optimum.
        let free: Vec<usize> = p.iter().filter(|&v| !self.adj[v].intersects(&p)).collect();
        let mut value = value;
        for &v in &free {
            p.remove(v);
            current.push(v);
            value += self.weights[v];
        }
        if value > self.best_value {
            self.best_value = value;
            self.best = current.clone();
        }
        if let Some(v) = p.first() {
            if value + self.clique_bound(&p) > self.best_value {
                let mut with = p.clone();
                with.remove(v);
                with.difference_with(&self.adj[v]);
                current.push(v);
                self.run(with, current, value + self.weights[v]);
                current.pop();
                let mut without = p;
                without.remove(v);
                self.run(without, current, value);
            }
        }
        for _ in &free {
            current.pop();
        }
    }
}

/// Maximum total weight of a pairwise disjoint subfamily of `sets`.
///
/// Weights must be nonnegative. With `node_budget = None` the search always
/// completes. When a budget stops it early the best family found is
/// returned with `exact = false`, and `upper_bound` is the smaller of the
/// clique-cover bound and `external_bound`.
pub fn max_weight_disjoint(
    sets: &[Bitset],
    weights: &[f64],
    node_budget: Option<u64>,
    external_bound: Option<f64>,
) -> MwisResult {
    assert_eq!(sets.len(), weights.len());
    let k = sets.len();
    if k == 0 {
        return MwisResult {
            value: 0.0,
            chosen: Vec::new(),
            exact: true,
            upper_bound: 0.0,
            nodes: 0,
        };
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let sorted_w: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let adj: Vec<Bitset> = order
        .iter()
        .map(|&i| {
            Bitset::from_indices(
                k,
                order
                    .iter()
                    .enumerate()
                    .filter(|&(_, &j)| j != i && sets[i].intersects(&sets[j]))
                    .map(|(pos, _)| pos),
            )
        })
        .collect();

    // greedy incumbent.
    let mut taken = Bitset::new(k);
    let mut greedy = Vec::new();
    for (v, a) in adj.iter().enumerate() {
        if !a.intersects(&taken) {
            taken.insert(v);
            greedy.push(v);
        }
    }
    let greedy_value = greedy.iter().map(|&v| sorted_w[v]).sum();
    let mut search = Search {
        weights: &sorted_w,
        adj,
        best_value: greedy_value,
        best: greedy,
        nodes: 0,
        budget: node_budget,
        aborted: false,
    };
    let root_bound = search.clique_bound(&Bitset::full(k));
    search.run(Bitset::full(k), &mut Vec::new(), 0.0);
    let mut chosen: Vec<usize> = search.best.iter().map(|&v| order[v]).collect();
    chosen.sort_unstable();
    let value = family_weight(weights, &chosen);
    let exact = !search.aborted;
    let upper_bound = if exact {
        value
    } else {
        external_bound.map_or(root_bound, |b| b.min(root_bound))
    };
    MwisResult {
        value,
        chosen,
        exact,
        upper_bound,
        nodes: search.nodes,
    }
}

/// Exhaustive optimum over all `2^k` subfamilies; for tests and small inputs.
pub fn brute_force_disjoint(sets: &[Bitset], weights: &[f64]) -> (f64, Vec<usize>) {
    let k = sets.len();
    assert!(k <= 24, "brute force limited to 24 sets");
    let mut best = (0.0, Vec::new());
    for mask in 0u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let disjoint = idx
            .iter()
            .enumerate()
            .all(|(a, &i)| idx[a + 1..].iter().all(|&j| !sets[i].intersects(&sets[j])));
        if disjoint {
            let v = family_weight(weights, &idx);
            if v > best.0 {
                best = (v, idx);
            }
        }
    }
    best
}
