//! Grid partition of the safe set and the cell-locator map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Uniform grid layout: per-dimension cell counts over the safe box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub safe_box: Rect,
}

impl GridSpec {
    pub fn new(counts: Vec<usize>, safe_box: Rect) -> Result<Self> {
        if counts.len() != safe_box.dim() {
            return Err(Error::input(format!(
                "grid counts dimension {} does not match safe box dimension {}",
                counts.len(),
                safe_box.dim()
            )));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::input("grid counts must be positive"));
        }
        Ok(GridSpec { counts, safe_box })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn cell_width(&self, d: usize) -> f64 {
        self.safe_box.width(d) / self.counts[d] as f64
    }

    fn face(&self, d: usize, k: usize) -> f64 {
        self.safe_box.lower[d] + k as f64 * self.cell_width(d)
    }

    fn cell_rect(&self, coords: &[usize]) -> Rect {
        let lower = (0..self.dim()).map(|d| self.face(d, coords[d])).collect();
        let upper = (0..self.dim()).map(|d| self.face(d, coords[d] + 1)).collect();
        Rect { lower, upper }
    }

    fn linear(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for d in 0..self.dim() {
            idx = idx * self.counts[d] + coords[d];
        }
        idx
    }

    fn total_cells(&self) -> usize {
        self.counts.iter().product()
    }
}

/// Partition of the safe set into grid cells plus the absorbing unsafe state.
///
/// Cells intersecting an obstacle box are folded into the unsafe state, and the
/// target ids are the cells fully contained in a target box. Boundary
/// convention: a point on a shared face belongs to the adjacent cell with the
/// smaller index, and the outer faces of the safe box belong to the safe set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    grid: GridSpec,
    cells: Vec<Rect>,
    /// Grid linear index -> cell id; obstacle cells map to the unsafe state.
    cell_of_grid: Vec<Option<usize>>,
    target_ids: Vec<usize>,
    obstacles: Vec<Rect>,
}

impl Partition {
    pub fn new(grid: GridSpec, target_boxes: &[Rect], obstacle_boxes: &[Rect]) -> Result<Self> {
        let dim = grid.dim();
        for b in target_boxes.iter().chain(obstacle_boxes) {
            if b.dim() != dim {
                return Err(Error::input("target/obstacle box dimension mismatch"));
            }
        }
        let total = grid.total_cells();
        let mut cells = Vec::new();
        let mut cell_of_grid = vec![None; total];
        let mut target_ids = Vec::new();

        let mut coords = vec![0usize; dim];
        for lin in 0..total {
            // Decode row-major coordinates (last dimension fastest).
            let mut rem = lin;
            for d in (0..dim).rev() {
                coords[d] = rem % grid.counts[d];
                rem /= grid.counts[d];
            }
            let rect = grid.cell_rect(&coords);
            if obstacle_boxes.iter().any(|o| rect.intersects_open(o)) {
                continue;
            }
            let id = cells.len();
            if target_boxes.iter().any(|t| rect.contained_in(t)) {
                target_ids.push(id);
            }
            cell_of_grid[lin] = Some(id);
            cells.push(rect);
        }
        if cells.is_empty() {
            return Err(Error::input("obstacles cover the entire safe box"));
        }
        if target_ids.is_empty() {
            return Err(Error::input(
                "no grid cell is fully contained in a target box; refine the grid or enlarge the target",
            ));
        }
        Ok(Partition { grid, cells, cell_of_grid, target_ids, obstacles: obstacle_boxes.to_vec() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn cells(&self) -> &[Rect] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Rect {
        &self.cells[id]
    }

    pub fn target_ids(&self) -> &[usize] {
        &self.target_ids
    }

    pub fn is_target(&self, id: usize) -> bool {
        self.target_ids.binary_search(&id).is_ok()
    }

    pub fn unsafe_id(&self) -> usize {
        self.cells.len()
    }

    /// Total abstract state count, unsafe state included.
    pub fn state_count(&self) -> usize {
        self.cells.len() + 1
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    /// Cell id for a grid linear index; `None` for obstacle cells.
    pub fn cell_id_by_grid(&self, grid_linear: usize) -> Option<usize> {
        self.cell_of_grid.get(grid_linear).copied().flatten()
    }

    pub fn safe_box(&self) -> &Rect {
        &self.grid.safe_box
    }

    /// Map a continuous state to its abstract state index.
    ///
    /// Points outside the safe box (or inside an obstacle cell) map to the
    /// unsafe state. A point lying exactly on a shared grid face is assigned to
    /// the neighboring cell with the smaller index.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "point dimension {} does not match partition dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let grid = &self.grid;
        let mut coords = vec![0usize; self.dim()];
        for d in 0..self.dim() {
            let lo = grid.safe_box.lower[d];
            let hi = grid.safe_box.upper[d];
            if x[d] < lo || x[d] > hi {
                return Ok(self.unsafe_id());
            }
            let w = grid.cell_width(d);
            let count = grid.counts[d];
            let mut k =
                (((x[d] - lo) / w).floor() as isize).clamp(0, count as isize - 1) as usize;
            // Repair any float rounding in the division.
            if x[d] < grid.face(d, k) && k > 0 {
                k -= 1;
            } else if k + 1 < count && x[d] >= grid.face(d, k + 1) {
                k += 1;
            }
            // Shared interior face: the lower-indexed neighbor owns it.
            if k > 0 && x[d] == grid.face(d, k) {
                k -= 1;
            }
            coords[d] = k;
        }
        Ok(self.cell_of_grid[grid.linear(&coords)].unwrap_or(self.unsafe_id()))
    }
}
