//! Belief-driven topological graphs over robot-reachable places.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{step_distances, Cell, GridMap};

use super::HierParams;

/// Robot-reachable cells and, for every free cell, the reachable cell closest
/// to it (Euclidean, lowest index on ties).
#[derive(Clone, Debug)]
pub struct Places {
    reachable: Vec<bool>,
    nearest: Vec<u32>,
    steps_from_start: Vec<Option<u32>>,
}

impl Places {
    pub fn new(map: &GridMap, start: Cell) -> Result<Self> {
        if !map.is_free(start) {
            return Err(Error::InvalidScenario(format!("start cell {start} is not free")));
        }
        let steps_from_start = step_distances(map, start);
        let reachable: Vec<bool> = steps_from_start.iter().map(Option::is_some).collect();
        let robot_cells: Vec<usize> = (0..map.num_cells()).filter(|&k| reachable[k]).collect();
        let nearest = (0..map.num_cells())
            .map(|k| {
                if reachable[k] || !map.is_free_index(k) {
                    return k as u32;
                }
                let x = map.cell_at(k);
                let mut best = robot_cells[0];
                let mut best_d = i64::MAX;
                for &r in &robot_cells {
                    let d = x.dist_sq(map.cell_at(r));
                    if d < best_d {
                        best = r;
                        best_d = d;
                    }
                }
                best as u32
            })
            .collect();
        Ok(Self {
            reachable,
            nearest,
            steps_from_start,
        })
    }

    pub fn is_reachable(&self, cell_index: usize) -> bool {
        self.reachable[cell_index]
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable.iter().filter(|r| **r).count()
    }

    pub fn nearest(&self, cell_index: usize) -> usize {
        self.nearest[cell_index] as usize
    }

    pub fn steps_from_start(&self, cell_index: usize) -> Option<u32> {
        self.steps_from_start[cell_index]
    }

    /// `p(s) = Σ_{x ∈ U(s)} b(x)` over robot cells, indexed by cell.
    pub fn place_mass(&self, b_target: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; b_target.len()];
        for (k, &b) in b_target.iter().enumerate() {
            if b > 0.0 {
                p[self.nearest[k] as usize] += b;
            }
        }
        p
    }
}

/// Sparse place graph. Edge costs are shortest-path lengths in meters.
#[derive(Clone, Debug, Serialize)]
pub struct TopoGraph {
    pub nodes: Vec<Cell>,
    pub edges: Vec<Vec<(usize, f64)>>,
    pub node_mass: Vec<f64>,
    #[serde(skip)]
    steps: Vec<Vec<Option<u32>>>,
}

impl PartialEq for TopoGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.node_mass == other.node_mass
    }
}

impl TopoGraph {
    /// Builds a graph over fixed node cells (all mutually reachable) with the
    /// degree-bounded edge rule used by [`sample_topo_graph`].
    pub fn with_nodes(map: &GridMap, nodes: Vec<Cell>, node_mass: Vec<f64>, deg_min: usize, deg_max: usize) -> Self {
        let steps: Vec<Vec<Option<u32>>> = nodes.iter().map(|&c| step_distances(map, c)).collect();
        let n = nodes.len();
        let cost = |a: usize, b: usize| -> f64 {
            steps[a][map.index(nodes[b])].map_or(f64::INFINITY, |s| s as f64 * map.cell_size())
        };
        let deg_max = deg_max.max(2);
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];

        // Degree-bounded Prim: every tree has a leaf, so some tree node always
        // has spare degree as long as deg_max >= 2.
        let mut in_tree = vec![false; n];
        if n > 0 {
            in_tree[0] = true;
        }
        for _ in 1..n {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in (0..n).filter(|&a| in_tree[a] && adj[a].len() < deg_max) {
                for b in (0..n).filter(|&b| !in_tree[b]) {
                    let c = cost(a, b);
                    if best.is_none_or(|(bc, _, _)| c < bc) {
                        best = Some((c, a, b));
                    }
                }
            }
            let (c, a, b) = best.expect("spanning edge exists");
            adj[a].push((b, c));
            adj[b].push((a, c));
            in_tree[b] = true;
        }

        // Raise low degrees with the nearest unsaturated nodes.
        let want = deg_min.min(n.saturating_sub(1));
        for a in 0..n {
            while adj[a].len() < want {
                let mut best: Option<(f64, usize)> = None;
                for b in 0..n {
                    if b == a || adj[b].len() >= deg_max || adj[a].iter().any(|&(x, _)| x == b) {
                        continue;
                    }
                    let c = cost(a, b);
                    if best.is_none_or(|(bc, _)| c < bc) {
                        best = Some((c, b));
                    }
                }
                let Some((c, b)) = best else { break };
                adj[a].push((b, c));
                adj[b].push((a, c));
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&(b, _)| b);
        }
        Self {
            nodes,
            edges: adj,
            node_mass,
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges[node].len()
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[node].iter().map(|&(b, _)| b)
    }

    pub fn node_of(&self, cell: Cell) -> Option<usize> {
        self.nodes.iter().position(|&c| c == cell)
    }

    /// `MoveAhead` steps from `cell` to node `node`, if reachable.
    pub fn steps_to(&self, map: &GridMap, node: usize, cell: Cell) -> Option<u32> {
        self.steps[node][map.index(cell)]
    }

    /// Node closest to `cell` by path length (Euclidean on ties, then index).
    pub fn nearest_node(&self, map: &GridMap, cell: Cell) -> usize {
        let mut best = 0;
        let mut key = (u32::MAX, i64::MAX);
        for (i, &n) in self.nodes.iter().enumerate() {
            let k = (
                self.steps[i][map.index(cell)].unwrap_or(u32::MAX),
                n.dist_sq(cell),
            );
            if k < key {
                key = k;
                best = i;
            }
        }
        best
    }

    /// `Σ_{v ∈ nodes} p(v)`.
    pub fn captured_mass(&self, map: &GridMap, place_mass: &[f64]) -> f64 {
        self.nodes.iter().map(|&c| place_mass[map.index(c)]).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for b in self.neighbors(a) {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Samples up to `M` places in proportion to the belief mass they capture,
/// keeping every pair at least `d_sep` apart, then links them into a connected
/// graph with bounded degree.
///
/// Proposals are drawn without replacement (at most `50·M` of them); if fewer
/// than `M` nodes are accepted, the remaining slots are filled greedily with
/// the reachable cell farthest from the accepted set that still respects the
/// separation.
pub fn sample_topo_graph<R: Rng + ?Sized>(
    map: &GridMap,
    places: &Places,
    b_target: &[f64],
    params: &HierParams,
    rng: &mut R,
) -> Result<TopoGraph> {
    let robot_cells: Vec<usize> = (0..map.num_cells()).filter(|&k| places.is_reachable(k)).collect();
    if robot_cells.is_empty() {
        return Err(Error::InvalidScenario("no robot-reachable cell".into()));
    }
    let p = places.place_mass(b_target);
    let separated = |c: Cell, nodes: &[Cell]| nodes.iter().all(|&n| map.meters(c, n) + 1e-9 >= params.d_sep);

    let mut weights: Vec<(usize, f64)> = robot_cells
        .iter()
        .map(|&k| (k, p[k]))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let mut nodes: Vec<Cell> = Vec::new();
    let mut proposals = 0;
    while nodes.len() < params.max_nodes && proposals < 50 * params.max_nodes && !weights.is_empty() {
        proposals += 1;
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, &(_, w)) in weights.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        let (k, _) = weights.swap_remove(pick);
        let c = map.cell_at(k);
        if separated(c, &nodes) {
            nodes.push(c);
        }
    }
    while nodes.len() < params.max_nodes {
        let mut best: Option<(i64, usize)> = None;
        for &k in &robot_cells {
            let c = map.cell_at(k);
            if !separated(c, &nodes) {
                continue;
            }
            let spread = nodes.iter().map(|&n| n.dist_sq(c)).min().unwrap_or(0);
            if best.is_none_or(|(s, _)| spread > s) {
                best = Some((spread, k));
            }
        }
        match best {
            Some((_, k)) => nodes.push(map.cell_at(k)),
            None => break,
        }
    }
    let node_mass = nodes.iter().map(|&c| p[map.index(c)]).collect();
    Ok(TopoGraph::with_nodes(map, nodes, node_mass, params.deg_min, params.deg_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(map: &GridMap) -> Vec<f64> {
        let n = map.num_free() as f64;
        (0..map.num_cells())
            .map(|k| if map.is_free_index(k) { 1.0 / n } else { 0.0 })
            .collect()
    }

    #[test]
    fn uniform_belief_fills_large_map() {
        let map = GridMap::empty(24, 24);
        let places = Places::new(&map, Cell::new(0, 0)).unwrap();
        let params = HierParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = sample_topo_graph(&map, &places, &uniform(&map), &params, &mut rng).unwrap();
        assert_eq!(g.len(), 10);
        for i in 0..g.len() {
            for j in 0..i {
                assert!(g.nodes[i].dist_sq(g.nodes[j]) >= 16);
            }
            assert!((3..=5).contains(&g.degree(i)));
        }
        assert!(g.is_connected());
    }

    #[test]
    fn tiny_map_clamps() {
        let map = GridMap::from_rows(&["...", "###"], 0.25).unwrap();
        let places = Places::new(&map, Cell::new(0, 0)).unwrap();
        let params = HierParams {
            d_sep: 0.1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_topo_graph(&map, &places, &uniform(&map), &params, &mut rng).unwrap();
        assert!(g.len() <= 3);
        assert!(g.is_connected());
        for i in 0..g.len() {
            assert_eq!(g.degree(i), g.len() - 1);
        }
    }

    #[test]
    fn unreachable_mass_maps_to_nearest_place() {
        // Right column is sealed off; its mass goes to the closest robot cell.
        let map = GridMap::from_rows(&["..#.", "..#.", "..#."], 0.25).unwrap();
        let places = Places::new(&map, Cell::new(0, 0)).unwrap();
        let mut b = vec![0.0; map.num_cells()];
        b[map.index(Cell::new(3, 1))] = 1.0;
        let p = places.place_mass(&b);
        assert_eq!(p[map.index(Cell::new(1, 1))], 1.0);
        assert!(!places.is_reachable(map.index(Cell::new(3, 1))));
    }
}
