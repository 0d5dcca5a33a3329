//! Multilevel graph coarsening for stride-2 pooling.
//!
//! Greedy pairwise matching (normalized-cut score) contracts the graph one
//! level at a time. Singletons are padded with edgeless fake vertices so that
//! every coarse vertex has exactly two children, and the coarsest level is
//! padded to a power of two, making each level exactly half the size of the
//! one below. A permutation of the finest level places both children of any
//! coarse vertex at consecutive indices, so pooling reduces to a stride-2
//! scan.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multilevel coarsening with padding, parent maps and the pooling
/// permutation. `levels[0]` is the padded finest graph.
#[derive(Debug, Clone)]
pub struct CoarseningHierarchy {
    levels: Vec<WeightedGraph>,
    /// Real (unpadded) parent maps: `parents[l][v]` is the coarse vertex of
    /// `v` between real level `l` and real level `l+1`.
    parents: Vec<Vec<usize>>,
    /// Gather permutation over padded finest-level ids: slot `s` reads input
    /// vertex `perm[s]`; ids at or above the real vertex count are fakes.
    perm: Vec<usize>,
    /// Per level, per padded slot: is this slot a fake vertex?
    fakes: Vec<Vec<bool>>,
    /// Real vertex counts per level before padding.
    real_sizes: Vec<usize>,
}

impl CoarseningHierarchy {
    /// Padded graphs, finest first. Length is `num_levels + 1`.
    pub fn levels(&self) -> &[WeightedGraph] {
        &self.levels
    }

    pub fn parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn fakes(&self) -> &[Vec<bool>] {
        &self.fakes
    }

    pub fn real_sizes(&self) -> &[usize] {
        &self.real_sizes
    }

    pub fn padded_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|g| g.n()).collect()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len() - 1
    }
}

fn next_pow2(x: usize) -> usize {
    x.next_power_of_two()
}

/// One greedy matching pass. Returns the parent map and the coarse graph.
fn match_level(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, WeightedGraph) {
    let n = g.n();
    let adj = g.adjacency();
    let deg = g.degrees();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut mate: Vec<Option<usize>> = vec![None; n];
    for &u in &order {
        if mate[u].is_some() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &(v, w) in &adj[u] {
            if mate[v].is_some() {
                continue;
            }
            // normalized-cut score; neighbors visited in ascending index
            // order, so ties resolve toward the smaller index
            let score = w * (1.0 / deg[u] + 1.0 / deg[v]);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((v, score));
            }
        }
        match best {
            Some((v, _)) => {
                mate[u] = Some(v);
                mate[v] = Some(u);
            }
            None => mate[u] = Some(u), // singleton
        }
    }

    // coarse ids in order of each group's smallest member
    let mut parent = vec![usize::MAX; n];
    let mut next_id = 0;
    for u in 0..n {
        if parent[u] != usize::MAX {
            continue;
        }
        parent[u] = next_id;
        let m = mate[u].unwrap();
        if m != u {
            parent[m] = next_id;
        }
        next_id += 1;
    }

    let mut acc: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();
    for &(i, j, w) in g.edges() {
        let (ci, cj) = (parent[i], parent[j]);
        if ci != cj {
            *acc.entry((ci.min(cj), ci.max(cj))).or_insert(0.0) += w;
        }
    }
    let coarse = WeightedGraph::from_edges(next_id, acc.into_iter().map(|((i, j), w)| (i, j, w)))
        .expect("coarse edges are valid by construction");
    (parent, coarse)
}

/// Per-level slot orders built from parent maps: `orders[l][slot]` is the
/// real vertex occupying that padded slot, or `None` for a fake. The
/// coarsest level is padded to the next power of two; below it, each coarse
/// slot expands to exactly two child slots.
fn build_orders(parents: &[Vec<usize>], coarsest_real: usize) -> Result<Vec<Vec<Option<usize>>>> {
    let num_levels = parents.len();
    let padded_top = next_pow2(coarsest_real.max(1));
    let mut orders: Vec<Vec<Option<usize>>> = vec![Vec::new(); num_levels + 1];
    orders[num_levels] = (0..padded_top)
        .map(|s| if s < coarsest_real { Some(s) } else { None })
        .collect();

    for l in (0..num_levels).rev() {
        let map = &parents[l];
        let coarse_n = if l + 1 == num_levels {
            coarsest_real
        } else {
            parents[l + 1].len()
        };
        // validate the parent map before trusting it
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); coarse_n];
        for (v, &p) in map.iter().enumerate() {
            if p >= coarse_n {
                return Err(Error::Config(format!(
                    "parent map at level {l} points vertex {v} to {p} out of {coarse_n}"
                )));
            }
            children[p].push(v);
        }
        for (c, ch) in children.iter().enumerate() {
            if ch.is_empty() || ch.len() > 2 {
                return Err(Error::Config(format!(
                    "coarse vertex {c} at level {} has {} children",
                    l + 1,
                    ch.len()
                )));
            }
        }
        let mut order = Vec::with_capacity(orders[l + 1].len() * 2);
        for &slot in &orders[l + 1] {
            match slot {
                Some(c) => {
                    order.push(Some(children[c][0]));
                    order.push(children[c].get(1).copied());
                }
                None => {
                    order.push(None);
                    order.push(None);
                }
            }
        }
        orders[l] = order;
    }
    Ok(orders)
}

/// Remaps a real graph onto padded slots; fakes stay edgeless.
fn pad_graph(g: &WeightedGraph, order: &[Option<usize>]) -> WeightedGraph {
    let mut slot_of = vec![usize::MAX; g.n()];
    for (s, v) in order.iter().enumerate() {
        if let Some(v) = v {
            slot_of[*v] = s;
        }
    }
    let edges = g.edges().iter().map(|&(i, j, w)| {
        let (a, b) = (slot_of[i], slot_of[j]);
        (a.min(b), a.max(b), w)
    });
    WeightedGraph::from_edges(order.len(), edges).expect("padded edges valid by construction")
}

/// Coarsens `g` for `num_levels` levels of greedy matching; deterministic
/// for a given seed. The visit order is re-drawn per level.
pub fn graclus_coarsen(
    g: &WeightedGraph,
    num_levels: usize,
    seed: u64,
) -> Result<CoarseningHierarchy> {
    if num_levels < 1 {
        return Err(Error::Config("coarsening needs at least one level".into()));
    }
    if g.n() < 1 {
        return Err(Error::Config("coarsening needs at least one vertex".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut real_graphs = vec![g.clone()];
    let mut parents = Vec::with_capacity(num_levels);
    for _ in 0..num_levels {
        let (parent, coarse) = match_level(real_graphs.last().unwrap(), &mut rng);
        parents.push(parent);
        real_graphs.push(coarse);
    }
    let real_sizes: Vec<usize> = real_graphs.iter().map(|g| g.n()).collect();
    let orders = build_orders(&parents, *real_sizes.last().unwrap())?;
    let levels: Vec<WeightedGraph> = real_graphs
        .iter()
        .zip(&orders)
        .map(|(g, o)| pad_graph(g, o))
        .collect();
    let fakes: Vec<Vec<bool>> = orders
        .iter()
        .map(|o| o.iter().map(|s| s.is_none()).collect())
        .collect();
    let perm = perm_from_order(&orders[0], real_sizes[0]);
    Ok(CoarseningHierarchy {
        levels,
        parents,
        perm,
        fakes,
        real_sizes,
    })
}

fn perm_from_order(order: &[Option<usize>], real_n: usize) -> Vec<usize> {
    let mut next_fake = real_n;
    order
        .iter()
        .map(|slot| match slot {
            Some(v) => *v,
            None => {
                let id = next_fake;
                next_fake += 1;
                id
            }
        })
        .collect()
}

/// Recomputes the finest-level permutation from the hierarchy's parent maps,
/// validating their structure.
pub fn build_perm(h: &CoarseningHierarchy) -> Result<Vec<usize>> {
    let orders = build_orders(&h.parents, *h.real_sizes.last().unwrap())?;
    Ok(perm_from_order(&orders[0], h.real_sizes[0]))
}

/// Scatters the rows of `x` (real vertices × features) into their padded
/// slots; fake slots are zero-filled (neutral under ReLU + max-pooling).
pub fn perm_data(x: &Array2<f64>, perm: &[usize], padded_n: usize) -> Result<Array2<f64>> {
    if perm.len() != padded_n {
        return Err(Error::Shape(format!(
            "permutation covers {} slots but padded size is {padded_n}",
            perm.len()
        )));
    }
    let real_n = x.nrows();
    if real_n > padded_n {
        return Err(Error::Shape(format!(
            "{real_n} real vertices exceed padded size {padded_n}"
        )));
    }
    {
        let mut seen = vec![false; padded_n];
        for &p in perm {
            if p >= padded_n || seen[p] {
                return Err(Error::Shape(
                    "permutation is not a bijection over padded ids".into(),
                ));
            }
            seen[p] = true;
        }
    }
    let mut out = Array2::zeros((padded_n, x.ncols()));
    for (slot, &src) in perm.iter().enumerate() {
        if src < real_n {
            out.row_mut(slot).assign(&x.row(src));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::rand_graph;
    use ndarray::array;

    #[test]
    fn two_vertices_one_edge() {
        let g = WeightedGraph::from_edges(2, vec![(0, 1, 1.0)]).unwrap();
        let h = graclus_coarsen(&g, 1, 0).unwrap();
        assert_eq!(h.padded_sizes(), vec![2, 1]);
        assert!(h.fakes().iter().flatten().all(|&f| !f));
        assert_eq!(h.levels()[1].n(), 1);
    }

    #[test]
    fn isolated_vertex_gets_fake_sibling() {
        let g = WeightedGraph::empty(1);
        let h = graclus_coarsen(&g, 1, 0).unwrap();
        assert_eq!(h.padded_sizes(), vec![2, 1]);
        assert_eq!(h.fakes()[0].iter().filter(|&&f| f).count(), 1);
        // the fake lands in the odd slot
        assert_eq!(h.fakes()[0], vec![false, true]);
        assert_eq!(h.levels()[1].n(), 1);
    }

    #[test]
    fn k4_coarsens_to_weight_four_edge() {
        let edges: Vec<(usize, usize, f64)> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j, 1.0)))
            .collect();
        let g = WeightedGraph::from_edges(4, edges).unwrap();
        for seed in 0..5 {
            let h = graclus_coarsen(&g, 1, seed).unwrap();
            let coarse = &h.levels()[1];
            assert_eq!(coarse.n(), 2);
            assert_eq!(coarse.edges(), &[(0, 1, 4.0)]);
        }
    }

    #[test]
    fn padded_sizes_halve_and_fakes_edgeless() {
        for seed in 0..30 {
            let n = 3 + (seed as usize * 7) % 29;
            let g = rand_graph(n, 0.3, seed).unwrap();
            let h = graclus_coarsen(&g, 2, seed).unwrap();
            let sizes = h.padded_sizes();
            assert_eq!(sizes.len(), 3);
            assert_eq!(sizes[0], 2 * sizes[1]);
            assert_eq!(sizes[1], 2 * sizes[2]);
            for (graph, fakes) in h.levels().iter().zip(h.fakes()) {
                let deg = graph.degrees();
                for (v, &fake) in fakes.iter().enumerate() {
                    if fake {
                        assert_eq!(deg[v], 0.0, "fake vertex {v} has edges");
                    }
                }
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn weight_conservation_per_level() {
        // dyadic weights make the conservation identity exact in floats
        for seed in 0..20 {
            let base = rand_graph(16, 0.5, seed).unwrap();
            let edges: Vec<(usize, usize, f64)> = base
                .edges()
                .iter()
                .enumerate()
                .map(|(k, &(i, j, _))| (i, j, 0.25 * ((k % 8) + 1) as f64))
                .collect();
            let g = WeightedGraph::from_edges(16, edges).unwrap();
            let h = graclus_coarsen(&g, 2, seed).unwrap();
            let orders = build_orders(h.parents(), *h.real_sizes().last().unwrap()).unwrap();
            for l in 0..2 {
                let parent = &h.parents()[l];
                // translate padded slots back to match-time real ids
                let real_edges: Vec<(usize, usize, f64)> = h.levels()[l]
                    .edges()
                    .iter()
                    .map(|&(i, j, w)| (orders[l][i].unwrap(), orders[l][j].unwrap(), w))
                    .collect();
                let sum_fine: f64 = real_edges.iter().map(|e| e.2).sum();
                let dropped: f64 = real_edges
                    .iter()
                    .filter(|&&(i, j, _)| parent[i] == parent[j])
                    .map(|e| e.2)
                    .sum();
                let sum_coarse: f64 = h.levels()[l + 1].total_weight();
                assert_eq!(sum_fine - dropped, sum_coarse);
            }
        }
    }

    #[test]
    fn padding_preserves_total_weight() {
        let g = rand_graph(10, 0.5, 3).unwrap();
        let h = graclus_coarsen(&g, 1, 3).unwrap();
        assert_eq!(g.total_weight(), h.levels()[0].total_weight());
    }

    #[test]
    fn perm_is_bijective_and_replay_reproduces_parents() {
        for seed in 0..20 {
            let n = 5 + (seed as usize) % 12;
            let g = rand_graph(n, 0.4, seed + 50).unwrap();
            let h = graclus_coarsen(&g, 2, seed).unwrap();
            let perm = h.perm();
            let padded0 = h.padded_sizes()[0];
            assert_eq!(perm.len(), padded0);
            let mut seen = vec![false; padded0];
            for &p in perm {
                assert!(!seen[p]);
                seen[p] = true;
            }
            // structural replay: grouping padded slots pairwise per level
            // must agree with the stored parent maps on real vertices
            let rebuilt = build_perm(&h).unwrap();
            assert_eq!(rebuilt, perm.to_vec());
            // slot s at level l has parent slot s/2; check a real vertex's
            // chain against parents[]
            let orders0: Vec<Option<usize>> = perm
                .iter()
                .map(|&p| if p < h.real_sizes()[0] { Some(p) } else { None })
                .collect();
            for (slot, v) in orders0.iter().enumerate() {
                if let Some(v) = v {
                    let p1 = h.parents()[0][*v];
                    // find p1's slot at level 1 by replaying the same grouping
                    let slot1 = slot / 2;
                    // level-1 slot occupant via parents of all level-0 slots
                    let occupant = occupant_at(&h, 1, slot1);
                    assert_eq!(occupant, Some(p1), "vertex {v} slot {slot} seed {seed}");
                }
            }
        }
    }

    fn occupant_at(h: &CoarseningHierarchy, level: usize, slot: usize) -> Option<usize> {
        // derive the real occupant of a padded slot from fake flags by
        // counting real slots, in slot order, mapped through nothing: slots
        // at a level are ordered the same way orders[] were built, and real
        // ids at coarser levels are exactly the match-time coarse ids, which
        // orders[] lays out. Reconstruct via build_orders for the check.
        let orders = super::build_orders(h.parents(), *h.real_sizes().last().unwrap()).unwrap();
        orders[level][slot]
    }

    #[test]
    fn determinism_same_seed() {
        let g = rand_graph(20, 0.4, 11).unwrap();
        let a = graclus_coarsen(&g, 2, 5).unwrap();
        let b = graclus_coarsen(&g, 2, 5).unwrap();
        assert_eq!(a.perm(), b.perm());
        assert_eq!(a.padded_sizes(), b.padded_sizes());
        for (ga, gb) in a.levels().iter().zip(b.levels()) {
            assert_eq!(ga, gb);
        }
        let c = graclus_coarsen(&g, 2, 6).unwrap();
        // different seed may coarsen differently; only check it is valid
        assert_eq!(c.padded_sizes()[0], 2 * c.padded_sizes()[1]);
    }

    #[test]
    fn perm_data_examples() {
        // identity permutation, no fakes
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let out = perm_data(&x, &[0, 1], 2).unwrap();
        assert_eq!(out, x);
        // one real vertex, one fake
        let x = array![[7.0]];
        let out = perm_data(&x, &[0, 1], 2).unwrap();
        assert_eq!(out, array![[7.0], [0.0]]);
        let out = perm_data(&x, &[1, 0], 2).unwrap();
        assert_eq!(out, array![[0.0], [7.0]]);
        // conservation: sums match since fakes contribute zero
        let x = array![[1.5], [2.5], [4.0]];
        let out = perm_data(&x, &[2, 0, 3, 1], 4).unwrap();
        assert_eq!(out.sum(), x.sum());
        // malformed permutations
        assert!(perm_data(&x, &[0, 1], 3).is_err());
        assert!(perm_data(&x, &[0, 0, 1, 2], 4).is_err());
    }
}
