//! Quadtree meshes of the unit square.
//!
//! Cells live in an arena indexed by [`CellId`]; ids are assigned in creation
//! order and never reused, so a refined mesh extends the arena of its parent
//! mesh. A cell at tree depth `level` has side `2^-level` and sits at integer
//! position `index` on the `2^level × 2^level` grid, which keeps every
//! coordinate an exact dyadic rational.
//!
//! Every refinement restores 2:1 face balance: active cells sharing a face
//! differ by at most one level.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type CellId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub level: u32,
    /// Position on the level grid; `origin = index * side`.
    pub index: [u32; 2],
    pub origin: [f64; 2],
    pub side: f64,
    pub active: bool,
    pub parent: Option<CellId>,
    /// Children in SW, SE, NW, NE order.
    pub children: Option<[CellId; 4]>,
}

impl Cell {
    /// Closed-box containment.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        (0..2).all(|k| point[k] >= self.origin[k] && point[k] <= self.origin[k] + self.side)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.origin[0] + 0.5 * self.side, self.origin[1] + 0.5 * self.side]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Face {
    West,
    East,
    South,
    North,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::West, Face::East, Face::South, Face::North];

    /// Coordinate axis normal to the face.
    pub fn axis(self) -> usize {
        match self {
            Face::West | Face::East => 0,
            Face::South | Face::North => 1,
        }
    }

    /// Whether the face lies on the upper end of its axis.
    pub fn is_upper(self) -> bool {
        matches!(self, Face::East | Face::North)
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::West => Face::East,
            Face::East => Face::West,
            Face::South => Face::North,
            Face::North => Face::South,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Face::West => [-1.0, 0.0],
            Face::East => [1.0, 0.0],
            Face::South => [0.0, -1.0],
            Face::North => [0.0, 1.0],
        }
    }

    /// Child slots touching this face, ordered along the face.
    pub fn child_slots(self) -> [usize; 2] {
        match self {
            Face::West => [0, 2],
            Face::East => [1, 3],
            Face::South => [0, 1],
            Face::North => [2, 3],
        }
    }
}

/// What lies across a face of an active cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Boundary,
    Same(CellId),
    Coarser(CellId),
    /// The two finer cells along the face, lower coordinate first.
    Finer([CellId; 2]),
}

#[derive(Clone, Debug)]
pub struct QuadMesh {
    cells: Vec<Cell>,
    generation: u32,
    lookup: BTreeMap<(u32, u32, u32), CellId>,
}

#[inline]
fn level_side(level: u32) -> f64 {
    1.0 / (1u64 << level) as f64
}

impl QuadMesh {
    /// Uniform `n0 × n0` mesh; `n0` must be a power of two.
    pub fn uniform(n0: usize) -> Result<Self> {
        if n0 == 0 || !n0.is_power_of_two() {
            return Err(Error::invalid(format!("cells per side must be a positive power of two, got {n0}")));
        }
        let level = n0.trailing_zeros();
        let mut mesh = QuadMesh { cells: Vec::with_capacity(n0 * n0), generation: 0, lookup: BTreeMap::new() };
        for j in 0..n0 as u32 {
            for i in 0..n0 as u32 {
                mesh.push_cell(level, [i, j], None);
            }
        }
        Ok(mesh)
    }

    /// Uniform `n0 × n0` mesh with the cells containing `center` refined
    /// `depth` more times (all incident cells when `center` sits on cell
    /// boundaries), then balanced. The result is an initial mesh: `R = 0`.
    pub fn graded(n0: usize, center: [f64; 2], depth: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&center[0]) || !(0.0..=1.0).contains(&center[1]) {
            return Err(Error::invalid(format!(
                "grading center ({}, {}) lies outside the unit square",
                center[0], center[1]
            )));
        }
        let mut mesh = Self::uniform(n0)?;
        for _ in 0..depth {
            let hits: Vec<CellId> = mesh.active_cells().filter(|c| c.contains(center)).map(|c| c.id).collect();
            let mut fresh = Vec::new();
            for id in hits {
                fresh.extend_from_slice(&mesh.split(id));
            }
            mesh.balance(fresh);
        }
        Ok(mesh)
    }

    /// Refines the listed active cells, restores balance, and bumps the
    /// generation counter.
    pub fn refine_cells(&self, ids: &[CellId]) -> Result<Self> {
        let marked: BTreeSet<CellId> = ids.iter().copied().collect();
        for &id in &marked {
            match self.cells.get(id) {
                Some(c) if c.active => {}
                Some(_) => return Err(Error::invalid(format!("cell {id} is not active"))),
                None => return Err(Error::invalid(format!("unknown cell id {id}"))),
            }
        }
        let mut mesh = self.clone();
        let mut fresh = Vec::with_capacity(4 * marked.len());
        for id in marked {
            fresh.extend_from_slice(&mesh.split(id));
        }
        mesh.balance(fresh);
        mesh.generation += 1;
        Ok(mesh)
    }

    /// Splits every active cell.
    pub fn refine_regular(&self) -> Self {
        let all: Vec<CellId> = self.active_ids().collect();
        self.refine_cells(&all).expect("active ids are always refinable")
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn arena_len(&self) -> usize {
        self.cells.len()
    }

    /// Active cells in id order.
    pub fn active_cells(&self) -> impl Iterator<Item = &Cell> + '_ {
        self.cells.iter().filter(|c| c.active)
    }

    pub fn active_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        self.active_cells().map(|c| c.id)
    }

    pub fn active_count(&self) -> usize {
        self.active_cells().count()
    }

    /// Smallest active side, the mesh size `h` used throughout.
    pub fn min_cell_size(&self) -> f64 {
        self.active_cells().map(|c| c.side).fold(f64::INFINITY, f64::min)
    }

    pub fn max_level(&self) -> u32 {
        self.active_cells().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn find(&self, level: u32, index: [u32; 2]) -> Option<CellId> {
        self.lookup.get(&(level, index[0], index[1])).copied()
    }

    /// Neighbor across `face` of the active cell `id`.
    pub fn neighbor(&self, id: CellId, face: Face) -> Neighbor {
        let cell = &self.cells[id];
        let Some(target) = step_index(cell.level, cell.index, face) else {
            return Neighbor::Boundary;
        };
        match self.covering(cell.level, target) {
            Some(n) if self.cells[n].level == cell.level => match self.cells[n].children {
                None => Neighbor::Same(n),
                Some(ch) => {
                    let slots = face.opposite().child_slots();
                    Neighbor::Finer([ch[slots[0]], ch[slots[1]]])
                }
            },
            Some(n) => Neighbor::Coarser(n),
            None => Neighbor::Boundary,
        }
    }

    /// Exhaustive face scan for the 2:1 invariant.
    pub fn is_balanced(&self) -> bool {
        self.active_cells().all(|c| {
            Face::ALL.iter().all(|&f| match self.neighbor(c.id, f) {
                Neighbor::Coarser(n) => self.cells[n].level + 1 == c.level,
                Neighbor::Finer(pair) => pair.iter().all(|&k| self.cells[k].active),
                _ => true,
            })
        })
    }

    fn push_cell(&mut self, level: u32, index: [u32; 2], parent: Option<CellId>) -> CellId {
        let id = self.cells.len();
        let side = level_side(level);
        self.cells.push(Cell {
            id,
            level,
            index,
            origin: [index[0] as f64 * side, index[1] as f64 * side],
            side,
            active: true,
            parent,
            children: None,
        });
        self.lookup.insert((level, index[0], index[1]), id);
        id
    }

    fn split(&mut self, id: CellId) -> [CellId; 4] {
        debug_assert!(self.cells[id].active);
        let (level, [i, j]) = (self.cells[id].level + 1, self.cells[id].index);
        let children = [
            self.push_cell(level, [2 * i, 2 * j], Some(id)),
            self.push_cell(level, [2 * i + 1, 2 * j], Some(id)),
            self.push_cell(level, [2 * i, 2 * j + 1], Some(id)),
            self.push_cell(level, [2 * i + 1, 2 * j + 1], Some(id)),
        ];
        let cell = &mut self.cells[id];
        cell.active = false;
        cell.children = Some(children);
        children
    }

    /// Deepest existing cell at `level` or coarser covering grid position
    /// `index` of `level`.
    fn covering(&self, level: u32, index: [u32; 2]) -> Option<CellId> {
        (0..=level).rev().find_map(|k| {
            let shift = level - k;
            self.find(k, [index[0] >> shift, index[1] >> shift])
        })
    }

    /// Splits coarse neighbors of freshly created cells until no active cell
    /// faces one more than a level coarser. Work proceeds FIFO over new cells.
    fn balance(&mut self, fresh: Vec<CellId>) {
        let mut queue: VecDeque<CellId> = fresh.into();
        while let Some(id) = queue.pop_front() {
            let (level, index) = (self.cells[id].level, self.cells[id].index);
            for face in Face::ALL {
                let Some(target) = step_index(level, index, face) else {
                    continue;
                };
                if let Some(n) = self.covering(level, target) {
                    let other = &self.cells[n];
                    if other.active && other.level + 1 < level {
                        queue.extend(self.split(n));
                    }
                }
            }
        }
    }
}

/// Grid index of the same-level neighbor across `face`, if inside the domain.
fn step_index(level: u32, index: [u32; 2], face: Face) -> Option<[u32; 2]> {
    let n = 1u64 << level;
    let axis = face.axis();
    let mut out = index;
    if face.is_upper() {
        if index[axis] as u64 + 1 >= n {
            return None;
        }
        out[axis] += 1;
    } else {
        if index[axis] == 0 {
            return None;
        }
        out[axis] -= 1;
    }
    Some(out)
}
