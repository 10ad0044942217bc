//! Cut-cell geometry on a Cartesian grid: level-set sampling, cell
//! classification, the five-edge virtual cells and the master-cell merge.
//!
//! Corner order everywhere is `(−,−), (+,−), (+,+), (−,+)`, i.e. counter
//! clockwise from the lower-left node. Level sets are negative inside solids.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Vec2;

/// Relative distance by which nodes lying on the boundary are pushed off it.
pub const LEVELSET_CLAMP: f64 = 1e-10;

/// Uniform Cartesian grid of `nx × ny` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    pub x_min: Vec2,
    pub x_max: Vec2,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl SpaceGrid {
    pub fn new(x_min: Vec2, x_max: Vec2, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::config("space grid needs at least one cell per axis"));
        }
        if !(x_max.x > x_min.x && x_max.y > x_min.y) {
            return Err(Error::config(
                "space grid bounds must satisfy x_max > x_min",
            ));
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            ny,
            dx: (x_max.x - x_min.x) / nx as f64,
            dy: (x_max.y - x_min.y) / ny as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Grid node `x_{i+½, j+½}` for `i ∈ [0, nx]`, `j ∈ [0, ny]`.
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.x_min + Vec2::new(i as f64 * self.dx, j as f64 * self.dy)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn center(&self, i: usize, j: usize) -> Vec2 {
        self.x_min + Vec2::new((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Corner nodes of cell `(i, j)` in counter-clockwise order.
    pub fn corners(&self, i: usize, j: usize) -> [Vec2; 4] {
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }
}

/// Level-set values at the grid nodes.
#[derive(Debug, Clone)]
pub struct LevelSetField {
    pub phi: Vec<f64>,
}

impl LevelSetField {
    pub fn corners(&self, grid: &SpaceGrid, i: usize, j: usize) -> [f64; 4] {
        [
            self.phi[grid.node_index(i, j)],
            self.phi[grid.node_index(i + 1, j)],
            self.phi[grid.node_index(i + 1, j + 1)],
            self.phi[grid.node_index(i, j + 1)],
        ]
    }
}

/// Pushes a level-set value at least `10⁻¹⁰·Δx` away from zero. Exact zeros
/// go to the gas side.
pub fn clamp_level(phi: f64, dx: f64) -> f64 {
    let floor = LEVELSET_CLAMP * dx;
    if phi >= 0.0 {
        phi.max(floor)
    } else {
        phi.min(-floor)
    }
}

/// Samples `eval` at every node and clamps the result.
///
/// With `periodic_x` the last node column is a copy of the first one, so that
/// the two sides of the periodic seam see bit-identical values.
pub fn sample_levelset<F>(eval: F, grid: &SpaceGrid, periodic_x: bool) -> LevelSetField
where
    F: Fn(Vec2) -> f64 + Sync,
{
    let w = grid.nx + 1;
    let mut phi: Vec<f64> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % w, k / w);
            if periodic_x && i == grid.nx {
                return 0.0;
            }
            clamp_level(eval(grid.node(i, j)), grid.dx)
        })
        .collect();
    if periodic_x {
        for j in 0..=grid.ny {
            phi[j * w + grid.nx] = phi[j * w];
        }
    }
    LevelSetField { phi }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellType {
    Gas,
    Solid,
    Cut,
}

impl CellType {
    /// Integer code used in field output.
    pub fn code(self) -> i32 {
        match self {
            CellType::Gas => 0,
            CellType::Cut => 1,
            CellType::Solid => 2,
        }
    }
}

pub fn classify_cell(phi: [f64; 4]) -> CellType {
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 {
        CellType::Gas
    } else if max < 0.0 {
        CellType::Solid
    } else {
        CellType::Cut
    }
}

/// The gaseous part of one Cartesian cell, described by five edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualCellGeom {
    pub cell_type: CellType,
    pub lx_minus: f64,
    pub lx_plus: f64,
    pub ly_minus: f64,
    pub ly_plus: f64,
    /// Length of the linearised wall edge.
    pub lw: f64,
    /// Unit wall normal pointing out of the gas, into the solid.
    pub normal: Vec2,
    /// Midpoint of the wall edge.
    pub wall_mid: Vec2,
    pub area: f64,
    /// Mean of the four corner level-set values.
    pub corner_avg: f64,
    /// The two wall intersection points (nearly) coincide.
    pub tangent: bool,
}

impl VirtualCellGeom {
    pub fn solid(corner_avg: f64) -> Self {
        Self {
            cell_type: CellType::Solid,
            lx_minus: 0.0,
            lx_plus: 0.0,
            ly_minus: 0.0,
            ly_plus: 0.0,
            lw: 0.0,
            normal: Vec2::zeros(),
            wall_mid: Vec2::zeros(),
            area: 0.0,
            corner_avg,
            tangent: false,
        }
    }

    pub fn is_solid(&self) -> bool {
        self.cell_type == CellType::Solid
    }

    /// Cartesian edge lengths in the order `(x+, x−, y+, y−)`.
    pub fn cartesian_edges(&self) -> [f64; 4] {
        [self.lx_plus, self.lx_minus, self.ly_plus, self.ly_minus]
    }

    /// Closure residual `|Lw·n_w + (Lx+ − Lx−, Ly+ − Ly−)|` of the polygon.
    pub fn green_residual(&self) -> f64 {
        (self.normal * self.lw
            + Vec2::new(self.lx_plus - self.lx_minus, self.ly_plus - self.ly_minus))
        .norm()
    }
}

/// A cell crossed by the boundary on all four edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cell has four boundary crossings")]
pub struct MultiplyCutCell;

/// Gas indicator `max(φ, 0)/|φ|`.
fn indicator(phi: f64) -> f64 {
    phi.max(0.0) / phi.abs()
}

/// One Cartesian edge from `a` to `b`: gas length and, if the edge is
/// crossed, the linearly interpolated crossing point.
fn edge(phi_a: f64, phi_b: f64, a: Vec2, b: Vec2) -> (f64, Option<Vec2>) {
    let ia = indicator(phi_a);
    let ib = indicator(phi_b);
    let full = (b - a).norm();
    if ia * ib == 1.0 {
        return (full, None);
    }
    if ia + ib == 0.0 {
        return (0.0, None);
    }
    let xw = a - (b - a) * (phi_a / (phi_b - phi_a));
    let len = ia * (1.0 - ib) * (xw - a).norm() + ib * (1.0 - ia) * (b - xw).norm();
    (len, Some(xw))
}

/// Five-edge geometry of the virtual cell with corner values `phi` at
/// `corners` (counter-clockwise from lower-left).
pub fn virtual_cell_geometry(
    phi: [f64; 4],
    corners: [Vec2; 4],
) -> Result<VirtualCellGeom, MultiplyCutCell> {
    let corner_avg = 0.25 * (phi[0] + phi[1] + phi[2] + phi[3]);
    let cell_type = classify_cell(phi);
    if cell_type == CellType::Solid {
        return Ok(VirtualCellGeom::solid(corner_avg));
    }
    let (ly_minus, xb) = edge(phi[0], phi[1], corners[0], corners[1]);
    let (lx_plus, xr) = edge(phi[1], phi[2], corners[1], corners[2]);
    let (ly_plus, xt) = edge(phi[3], phi[2], corners[3], corners[2]);
    let (lx_minus, xl) = edge(phi[0], phi[3], corners[0], corners[3]);
    let origin = corners[0];
    let width = corners[1].x - corners[0].x;
    let height = corners[3].y - corners[0].y;

    let crossings: Vec<Vec2> = [xb, xr, xt, xl].into_iter().flatten().collect();
    let (lw, normal, wall_mid, tangent) = match crossings.as_slice() {
        [] => (
            0.0,
            Vec2::zeros(),
            0.25 * (corners[0] + corners[1] + corners[2] + corners[3]),
            false,
        ),
        [p, q] => {
            let mid = 0.5 * (p + q);
            let closure = Vec2::new(lx_plus - lx_minus, ly_plus - ly_minus);
            let mut lw = (p - q).norm();
            let floor = LEVELSET_CLAMP * width.min(height);
            let tangent = lw < floor;
            let normal = if tangent {
                lw = floor;
                // Bilinear gradient at the centre, pointing down the level set.
                let gx = (phi[1] + phi[2] - phi[0] - phi[3]) / (2.0 * width);
                let gy = (phi[2] + phi[3] - phi[0] - phi[1]) / (2.0 * height);
                let g = Vec2::new(gx, gy);
                if g.norm() > 0.0 {
                    -g / g.norm()
                } else {
                    Vec2::new(1.0, 0.0)
                }
            } else {
                -closure / lw
            };
            (lw, normal, mid, tangent)
        }
        _ => return Err(MultiplyCutCell),
    };

    // Green formula relative to the lower-left corner: only the right, top
    // and wall edges have nonzero moment arms.
    let area = if cell_type == CellType::Gas {
        width * height
    } else {
        0.5 * (lx_plus * width + ly_plus * height + lw * (wall_mid - origin).dot(&normal))
    };

    Ok(VirtualCellGeom {
        cell_type,
        lx_minus,
        lx_plus,
        ly_minus,
        ly_plus,
        lw,
        normal,
        wall_mid,
        area,
        corner_avg,
        tangent,
    })
}

/// Virtual-cell geometry of every cell at one time level.
#[derive(Debug, Clone)]
pub struct GeometryField {
    pub grid: SpaceGrid,
    pub periodic_x: bool,
    pub cells: Vec<VirtualCellGeom>,
}

impl GeometryField {
    pub fn build(grid: &SpaceGrid, levelset: &LevelSetField, periodic_x: bool) -> Result<Self> {
        let cells = (0..grid.n_cells())
            .into_par_iter()
            .map(|c| {
                let (i, j) = grid.cell_ij(c);
                virtual_cell_geometry(levelset.corners(grid, i, j), grid.corners(i, j))
                    .map_err(|_| Error::UnderResolved { i, j })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            periodic_x,
            cells,
        })
    }

    pub fn cell(&self, i: usize, j: usize) -> &VirtualCellGeom {
        &self.cells[self.grid.cell_index(i, j)]
    }

    /// Total gas area.
    pub fn gas_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Neighbour across the Cartesian edge `dir` (0: x+, 1: x−, 2: y+, 3: y−),
    /// or `None` outside a non-periodic boundary.
    pub fn neighbor(&self, i: usize, j: usize, dir: usize) -> Option<(usize, usize)> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        match dir {
            0 if i + 1 < nx => Some((i + 1, j)),
            0 if self.periodic_x => Some((0, j)),
            1 if i > 0 => Some((i - 1, j)),
            1 if self.periodic_x => Some((nx - 1, j)),
            2 if j + 1 < ny => Some((i, j + 1)),
            3 if j > 0 => Some((i, j - 1)),
            _ => None,
        }
    }
}

/// Direction of the longest Cartesian edge, ties resolved in the order
/// `x+, x−, y+, y−`.
fn longest_edge(edges: [f64; 4]) -> usize {
    let mut best = 0;
    for k in 1..4 {
        if edges[k] > edges[best] {
            best = k;
        }
    }
    best
}

/// Walks from `(i, j)` across longest edges until a cell with positive
/// corner average is reached.
pub fn find_master_cell(i: usize, j: usize, field: &GeometryField) -> Result<(usize, usize)> {
    if field.cell(i, j).is_solid() {
        return Err(Error::geometry(i, j, "solid cells have no master"));
    }
    let budget = field.grid.nx + field.grid.ny;
    let (mut ci, mut cj) = (i, j);
    let mut steps = 0;
    while field.cell(ci, cj).corner_avg <= 0.0 {
        if steps >= budget {
            return Err(Error::geometry(i, j, "merge walk exceeded its step budget"));
        }
        let dir = longest_edge(field.cell(ci, cj).cartesian_edges());
        let (ni, nj) = field
            .neighbor(ci, cj, dir)
            .ok_or_else(|| Error::geometry(i, j, "merge walk left the domain"))?;
        if field.cell(ni, nj).is_solid() {
            return Err(Error::geometry(i, j, "merge walk entered a solid cell"));
        }
        (ci, cj) = (ni, nj);
        steps += 1;
    }
    Ok((ci, cj))
}

pub const NO_MASTER: usize = usize::MAX;

/// Merge sets of one time level.
#[derive(Debug, Clone)]
pub struct ControlVolumeMap {
    /// Master cell of every cell, `NO_MASTER` for cells outside all sets.
    pub master: Vec<usize>,
    /// Control-volume area, stored at master cells.
    pub area_cv: Vec<f64>,
    /// Cell centre lies in the gas (positive corner average).
    pub delta: Vec<bool>,
    /// Master cells in ascending order.
    pub masters: Vec<usize>,
    /// Position in `masters` of each cell's master, `NO_MASTER` if none.
    pub slot: Vec<usize>,
    member_offsets: Vec<usize>,
    member_list: Vec<usize>,
}

impl ControlVolumeMap {
    /// Members of the control volume whose master is `masters[k]`.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.member_list[self.member_offsets[k]..self.member_offsets[k + 1]]
    }

    pub fn n_masters(&self) -> usize {
        self.masters.len()
    }

    /// Per-master sums of `area(cell)` over members, in `masters` order.
    pub fn member_area_sums(&self, field: &GeometryField) -> Vec<f64> {
        (0..self.masters.len())
            .map(|k| self.members(k).iter().map(|&c| field.cells[c].area).sum())
            .collect()
    }

    fn rebuild_members(&mut self) {
        let n = self.master.len();
        self.masters = (0..n).filter(|&c| self.master[c] == c).collect();
        let mut slot = vec![NO_MASTER; n];
        for (k, &m) in self.masters.iter().enumerate() {
            slot[m] = k;
        }
        let mut counts = vec![0usize; self.masters.len() + 1];
        for &m in &self.master {
            if m != NO_MASTER {
                counts[slot[m] + 1] += 1;
            }
        }
        for k in 0..self.masters.len() {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut list = vec![0; counts[self.masters.len()]];
        for c in 0..n {
            let m = self.master[c];
            if m != NO_MASTER {
                let s = slot[m];
                list[fill[s]] = c;
                fill[s] += 1;
            }
        }
        self.member_offsets = counts;
        self.member_list = list;
        self.slot = self
            .master
            .iter()
            .map(|&m| if m == NO_MASTER { NO_MASTER } else { slot[m] })
            .collect();
    }

    /// Attaches cells that are solid in `now` but gas-bearing in `next` to
    /// the control volume of a neighbour that exists in `now`, so the
    /// appearing gas receives the neighbour's updated value.
    pub fn adopt_appearing(&mut self, now: &GeometryField, next: &GeometryField) -> Result<()> {
        let grid = &now.grid;
        let mut adopted = Vec::new();
        for c in 0..grid.n_cells() {
            if !now.cells[c].is_solid() || next.cells[c].is_solid() {
                continue;
            }
            let (i, j) = grid.cell_ij(c);
            let edges = next.cells[c].cartesian_edges();
            let mut best: Option<(usize, f64)> = None;
            for dir in 0..4 {
                if let Some((ni, nj)) = now.neighbor(i, j, dir) {
                    let nb = grid.cell_index(ni, nj);
                    if now.cells[nb].is_solid() {
                        continue;
                    }
                    if best.is_none_or(|(_, l)| edges[dir] > l) {
                        best = Some((nb, edges[dir]));
                    }
                }
            }
            if best.is_none() {
                const DIAG: [(isize, isize); 4] = [(1, 1), (-1, 1), (1, -1), (-1, -1)];
                for (di, dj) in DIAG {
                    let ni = i as isize + di;
                    let nj = j as isize + dj;
                    let ni = if now.periodic_x {
                        ni.rem_euclid(grid.nx as isize)
                    } else {
                        ni
                    };
                    if ni < 0 || nj < 0 || ni >= grid.nx as isize || nj >= grid.ny as isize {
                        continue;
                    }
                    let nb = grid.cell_index(ni as usize, nj as usize);
                    if !now.cells[nb].is_solid() {
                        best = Some((nb, 0.0));
                        break;
                    }
                }
            }
            let (nb, _) = best.ok_or_else(|| {
                Error::geometry(i, j, "appearing gas cell has no existing neighbour")
            })?;
            adopted.push((c, self.master[nb]));
        }
        if adopted.is_empty() {
            return Ok(());
        }
        for (c, m) in adopted {
            self.master[c] = m;
        }
        self.rebuild_members();
        Ok(())
    }
}

/// Area accumulation over a given master assignment.
pub fn accumulate_control_volumes(field: &GeometryField, master: Vec<usize>) -> ControlVolumeMap {
    let n = field.cells.len();
    let mut area_cv = vec![0.0; n];
    for (c, &m) in master.iter().enumerate() {
        if m != NO_MASTER {
            area_cv[m] += field.cells[c].area;
        }
    }
    let delta = field
        .cells
        .iter()
        .map(|g| !g.is_solid() && g.corner_avg > 0.0)
        .collect();
    let mut map = ControlVolumeMap {
        master,
        area_cv,
        delta,
        masters: Vec::new(),
        slot: Vec::new(),
        member_offsets: Vec::new(),
        member_list: Vec::new(),
    };
    map.rebuild_members();
    map
}

/// Masters of all non-solid cells followed by area accumulation.
pub fn build_control_volumes(field: &GeometryField) -> Result<ControlVolumeMap> {
    let grid = &field.grid;
    let master = (0..grid.n_cells())
        .into_par_iter()
        .map(|c| {
            if field.cells[c].is_solid() {
                return Ok(NO_MASTER);
            }
            let (i, j) = grid.cell_ij(c);
            let (mi, mj) = find_master_cell(i, j, field)?;
            Ok(grid.cell_index(mi, mj))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(accumulate_control_volumes(field, master))
}
