//! Degree-`p` Lagrange node numbering on a balanced quadtree mesh.
//!
//! Each active cell carries `(p+1)²` equispaced nodes. Node positions are
//! keyed by exact integer coordinates in units of `1 / (p · 2^L)`, `L` being
//! the finest active level, so coinciding nodes of neighboring cells merge
//! without floating-point comparisons.
//!
//! A fine-side node on a face shared with a coarser cell that is not itself
//! a node of the coarse face is *hanging*: its value is the coarse trace,
//! i.e. `Σ_b L_b(t) u_b` over the coarse face nodes. Chains (a master that
//! hangs on an even coarser face) are resolved so every constraint refers to
//! unconstrained nodes only.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::lagrange::LagrangeBasis;
use crate::mesh::{CellId, Face, Neighbor, QuadMesh};

const NO_SLOT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    /// Unknown of the linear system, with its index.
    Free(usize),
    /// Fixed by Dirichlet data on `y = 0` or `y = 1`.
    Dirichlet,
    /// Determined by a constraint row.
    Hanging,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    degree: usize,
    active_cells: Vec<CellId>,
    cell_slot: Vec<u32>,
    cell_nodes: Vec<usize>,
    node_keys: Vec<[u64; 2]>,
    /// Integer units per unit length.
    scale: u64,
    roles: Vec<NodeRole>,
    free_nodes: Vec<usize>,
    /// `expansion[offsets[n]..offsets[n+1]]` writes node `n` as a weighted
    /// sum of non-hanging nodes (itself with weight 1 when not hanging).
    offsets: Vec<usize>,
    expansion: Vec<(usize, f64)>,
    n_hanging: usize,
}

impl DofMap {
    pub fn new(mesh: &QuadMesh, degree: usize) -> Self {
        assert!(degree >= 1);
        let p = degree as u64;
        let lmax = mesh.max_level();
        let scale = p << lmax;
        let npc = (degree + 1) * (degree + 1);

        let active_cells: Vec<CellId> = mesh.active_ids().collect();
        let mut cell_slot = vec![NO_SLOT; mesh.arena_len()];
        for (slot, &id) in active_cells.iter().enumerate() {
            cell_slot[id] = slot as u32;
        }

        let mut key_to_node: BTreeMap<[u64; 2], usize> = BTreeMap::new();
        let mut node_keys = Vec::new();
        let mut cell_nodes = Vec::with_capacity(active_cells.len() * npc);
        for &id in &active_cells {
            for b in 0..=degree {
                for a in 0..=degree {
                    let key = node_key(mesh, id, a, b, p, lmax);
                    let next = node_keys.len();
                    let node = *key_to_node.entry(key).or_insert(next);
                    if node == next {
                        node_keys.push(key);
                    }
                    cell_nodes.push(node);
                }
            }
        }
        let n_nodes = node_keys.len();

        // Direct constraints, masters possibly hanging themselves.
        let basis = LagrangeBasis::new(degree);
        let mut direct: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (slot, &id) in active_cells.iter().enumerate() {
            for face in Face::ALL {
                let Neighbor::Coarser(coarse) = mesh.neighbor(id, face) else {
                    continue;
                };
                let cslot = cell_slot[coarse] as usize;
                let coarse_face = local_face_nodes(degree, face.opposite());
                let masters: Vec<usize> = coarse_face.iter().map(|&l| cell_nodes[cslot * npc + l]).collect();
                let along = 1 - face.axis();
                let ccell = mesh.cell(coarse);
                let cunits = scale >> ccell.level;
                let start = ccell.index[along] as u64 * cunits;
                for l in local_face_nodes(degree, face) {
                    let node = cell_nodes[slot * npc + l];
                    if masters.contains(&node) || direct.contains_key(&node) {
                        continue;
                    }
                    let t = (node_keys[node][along] - start) as f64 / cunits as f64;
                    let row: Vec<(usize, f64)> = masters
                        .iter()
                        .enumerate()
                        .map(|(b, &m)| (m, basis.value(b, t)))
                        .filter(|&(_, w)| w != 0.0)
                        .collect();
                    direct.insert(node, row);
                }
            }
        }

        let mut resolved: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &node in direct.keys() {
            resolve(node, &direct, &mut resolved);
        }

        let top = scale;
        let mut roles = Vec::with_capacity(n_nodes);
        let mut free_nodes = Vec::new();
        for (n, key) in node_keys.iter().enumerate() {
            if resolved.contains_key(&n) {
                roles.push(NodeRole::Hanging);
            } else if key[1] == 0 || key[1] == top {
                roles.push(NodeRole::Dirichlet);
            } else {
                roles.push(NodeRole::Free(free_nodes.len()));
                free_nodes.push(n);
            }
        }

        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut expansion = Vec::with_capacity(n_nodes);
        offsets.push(0);
        for n in 0..n_nodes {
            match resolved.get(&n) {
                Some(row) => expansion.extend_from_slice(row),
                None => expansion.push((n, 1.0)),
            }
            offsets.push(expansion.len());
        }

        DofMap {
            degree,
            active_cells,
            cell_slot,
            cell_nodes,
            node_keys,
            scale,
            roles,
            free_nodes,
            offsets,
            expansion,
            n_hanging: resolved.len(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes_per_cell(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// `N`: all nodes that are not hanging, Dirichlet nodes included. On a
    /// uniform `m × m` mesh this is `(m·p + 1)²`.
    pub fn n_dofs(&self) -> usize {
        self.node_keys.len() - self.n_hanging
    }

    pub fn n_nodes(&self) -> usize {
        self.node_keys.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn n_hanging(&self) -> usize {
        self.n_hanging
    }

    pub fn active_cells(&self) -> &[CellId] {
        &self.active_cells
    }

    /// Active slot of a cell id, if the cell is active in the mapped mesh.
    pub fn slot(&self, id: CellId) -> Option<usize> {
        self.cell_slot.get(id).filter(|&&s| s != NO_SLOT).map(|&s| s as usize)
    }

    /// Global nodes of an active slot, ordered `a + (p+1)·b`.
    pub fn cell_nodes(&self, slot: usize) -> &[usize] {
        let npc = self.nodes_per_cell();
        &self.cell_nodes[slot * npc..(slot + 1) * npc]
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn node_key(&self, node: usize) -> [u64; 2] {
        self.node_keys[node]
    }

    /// Integer units per unit length of [`node_key`](Self::node_key).
    pub fn key_scale(&self) -> u64 {
        self.scale
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        let k = self.node_keys[node];
        [k[0] as f64 / self.scale as f64, k[1] as f64 / self.scale as f64]
    }

    /// Node `n` as a combination of non-hanging nodes.
    pub fn expansion(&self, node: usize) -> &[(usize, f64)] {
        &self.expansion[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Constraint rows of all hanging nodes, in node order.
    pub fn constraints(&self) -> impl Iterator<Item = (usize, &[(usize, f64)])> + '_ {
        (0..self.n_nodes()).filter(|&n| self.roles[n] == NodeRole::Hanging).map(|n| (n, self.expansion(n)))
    }

    /// Free values plus boundary data to values at every node.
    pub fn expand(&self, free: &[f64], dirichlet: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free());
        let base: Vec<f64> = (0..self.n_nodes())
            .map(|n| match self.roles[n] {
                NodeRole::Free(k) => free[k],
                NodeRole::Dirichlet => dirichlet(self.node_position(n)),
                NodeRole::Hanging => 0.0,
            })
            .collect();
        (0..self.n_nodes())
            .map(|n| match self.roles[n] {
                NodeRole::Hanging => self.expansion(n).iter().map(|&(m, w)| w * base[m]).sum(),
                _ => base[n],
            })
            .collect()
    }
}

fn node_key(mesh: &QuadMesh, id: CellId, a: usize, b: usize, p: u64, lmax: u32) -> [u64; 2] {
    let cell = mesh.cell(id);
    let s = 1u64 << (lmax - cell.level);
    [(cell.index[0] as u64 * p + a as u64) * s, (cell.index[1] as u64 * p + b as u64) * s]
}

/// Local node indices on a face, ordered along the face.
pub fn local_face_nodes(degree: usize, face: Face) -> Vec<usize> {
    let n = degree + 1;
    (0..n)
        .map(|k| match face {
            Face::West => k * n,
            Face::East => degree + k * n,
            Face::South => k,
            Face::North => degree * n + k,
        })
        .collect()
}

fn resolve(
    node: usize,
    direct: &BTreeMap<usize, Vec<(usize, f64)>>,
    resolved: &mut BTreeMap<usize, Vec<(usize, f64)>>,
) {
    if resolved.contains_key(&node) {
        return;
    }
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for &(m, w) in &direct[&node] {
        if direct.contains_key(&m) {
            resolve(m, direct, resolved);
            for &(mm, ww) in &resolved[&m] {
                *acc.entry(mm).or_insert(0.0) += w * ww;
            }
        } else {
            *acc.entry(m).or_insert(0.0) += w;
        }
    }
    resolved.insert(node, acc.into_iter().filter(|&(_, w)| w != 0.0).collect());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts() {
        let mesh = QuadMesh::uniform(4).unwrap();
        for p in 1..=4 {
            let dofs = DofMap::new(&mesh, p);
            let m = 4 * p + 1;
            assert_eq!(dofs.n_dofs(), m * m);
            assert_eq!(dofs.n_hanging(), 0);
            assert_eq!(dofs.n_free(), m * (m - 2));
        }
        assert_eq!(DofMap::new(&mesh, 1).n_dofs(), 25);
        assert_eq!(DofMap::new(&mesh, 2).n_dofs(), 81);
    }

    #[test]
    fn approximate_count_formula_is_only_approximate() {
        // N ≈ (p/h)² = 64 for p = 2, h = 1/4, against the exact 81.
        let exact = DofMap::new(&QuadMesh::uniform(4).unwrap(), 2).n_dofs();
        let approx = (2.0f64 / 0.25).powi(2);
        assert_eq!(approx, 64.0);
        assert_eq!(exact, 81);
    }

    #[test]
    fn hanging_weights_sum_to_one() {
        let mesh = QuadMesh::uniform(2).unwrap().refine_cells(&[0]).unwrap();
        for p in 1..=4 {
            let dofs = DofMap::new(&mesh, p);
            // Two coarse faces (east of cell 0's children, north of them) each
            // carry p hanging nodes; the shared corner (½,½) is a coarse vertex.
            assert_eq!(dofs.n_hanging(), 2 * p, "p = {p}");
            for (_, row) in dofs.constraints() {
                let s: f64 = row.iter().map(|&(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-14);
                assert!(row.iter().all(|&(m, _)| dofs.role(m) != NodeRole::Hanging));
            }
        }
    }

    #[test]
    fn shared_nodes_merge() {
        let mesh = QuadMesh::uniform(2).unwrap();
        let dofs = DofMap::new(&mesh, 1);
        // Center vertex belongs to all four cells.
        let centers: Vec<usize> = (0..4).map(|s| dofs.cell_nodes(s)[[3, 2, 1, 0][s]]).collect();
        assert!(centers.iter().all(|&c| c == centers[0]));
        assert_eq!(dofs.node_position(centers[0]), [0.5, 0.5]);
    }

    #[test]
    fn chained_constraints_resolve_to_free_or_dirichlet_nodes() {
        let graded = QuadMesh::graded(4, [0.5, 0.5], 4).unwrap();
        let first = graded.active_ids().next().unwrap();
        let mesh = graded.refine_cells(&[first]).unwrap();
        for p in 1..=3 {
            let dofs = DofMap::new(&mesh, p);
            assert!(dofs.n_hanging() > 0);
            for (_, row) in dofs.constraints() {
                assert!(row.iter().all(|&(m, _)| dofs.role(m) != NodeRole::Hanging));
                let s: f64 = row.iter().map(|&(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-13);
            }
        }
    }
}
