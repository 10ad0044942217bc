//! Cut-cell finite-volume update of the reduced distributions: merge into
//! control volumes, upwind transport with diffuse walls, BGK/Shakhov
//! relaxation, redistribution, and the coupled rigid-body step.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    build_control_volumes, ControlVolumeMap, GeometryField, SpaceGrid, VirtualCellGeom, NO_MASTER,
};
use crate::rigid_body::{force_and_torque, wall_stress, RigidBodyState, WallElement};
use crate::scene::{exact_band, Body, ScenePose};
use crate::velocity_space::{
    compute_moments, conservative_equilibrium, fill_maxwellian, relaxation_time, GasModel,
    MacroFields, VelocityGrid,
};
use crate::Vec2;

/// Maximum number of time-step halvings within one step.
pub const MAX_RETRIES: usize = 10;

/// Domain side, in the order used by `DomainBoundaries::sides`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal of the domain side.
    pub fn normal(self) -> Vec2 {
        match self {
            Side::Left => Vec2::new(-1.0, 0.0),
            Side::Right => Vec2::new(1.0, 0.0),
            Side::Bottom => Vec2::new(0.0, -1.0),
            Side::Top => Vec2::new(0.0, 1.0),
        }
    }

    /// Cartesian edge direction of a cell facing this side.
    fn edge_dir(self) -> usize {
        match self {
            Side::Right => 0,
            Side::Left => 1,
            Side::Top => 2,
            Side::Bottom => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainBc {
    Periodic,
    /// Mirror reflection about the side.
    Specular,
    DiffuseWall {
        temperature: f64,
        velocity: Vec2,
    },
    /// Zero-gradient: the ghost takes the adjacent interior value.
    NeumannCopy,
    MaxwellianInflow {
        rho: f64,
        velocity: Vec2,
        temperature: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBoundaries {
    pub left: DomainBc,
    pub right: DomainBc,
    pub bottom: DomainBc,
    pub top: DomainBc,
}

impl DomainBoundaries {
    pub fn uniform(bc: DomainBc) -> Self {
        Self {
            left: bc,
            right: bc,
            bottom: bc,
            top: bc,
        }
    }

    pub fn get(&self, side: Side) -> DomainBc {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn periodic_x(&self) -> bool {
        self.left == DomainBc::Periodic
    }

    pub fn validate(&self, vgrid: &VelocityGrid) -> Result<()> {
        if (self.left == DomainBc::Periodic) != (self.right == DomainBc::Periodic) {
            return Err(Error::config(
                "periodic boundaries must be set on both left and right",
            ));
        }
        if self.bottom == DomainBc::Periodic || self.top == DomainBc::Periodic {
            return Err(Error::config("periodic boundaries are supported in x only"));
        }
        for side in Side::ALL {
            match self.get(side) {
                DomainBc::Specular => {
                    let symmetric = match side {
                        Side::Left | Side::Right => vgrid.is_symmetric_x(),
                        Side::Bottom | Side::Top => vgrid.is_symmetric_y(),
                    };
                    if !symmetric {
                        return Err(Error::config(format!(
                            "specular boundary on the {side:?} side needs a velocity grid symmetric about zero"
                        )));
                    }
                }
                DomainBc::DiffuseWall {
                    temperature,
                    velocity,
                } => {
                    if !(temperature > 0.0) {
                        return Err(Error::config("wall temperature must be positive"));
                    }
                    if velocity.dot(&side.normal()) != 0.0 {
                        return Err(Error::config("domain walls may only move tangentially"));
                    }
                    if !vgrid.contains(velocity) {
                        return Err(Error::config(
                            "velocity grid does not contain the domain wall velocity",
                        ));
                    }
                }
                DomainBc::MaxwellianInflow {
                    rho, temperature, ..
                } => {
                    if !(rho > 0.0 && temperature > 0.0) {
                        return Err(Error::config(
                            "inflow density and temperature must be positive",
                        ));
                    }
                }
                DomainBc::Periodic | DomainBc::NeumannCopy => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflMode {
    /// Full positivity bound with the per-velocity outflow sums.
    Strict,
    /// `dt = C/(v_x,max/Δx + v_y,max/Δy)`.
    Relaxed { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub cfl: CflMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::Explicit,
            cfl: CflMode::Relaxed { c: 0.5 },
        }
    }
}

/// Reduced distributions `f` and `g`, one row of `N²` values per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    nv: usize,
}

impl DistributionField {
    pub fn zeros(n_cells: usize, nv: usize) -> Self {
        Self {
            f: vec![0.0; n_cells * nv],
            g: vec![0.0; n_cells * nv],
            nv,
        }
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn f_row(&self, c: usize) -> &[f64] {
        &self.f[c * self.nv..(c + 1) * self.nv]
    }

    pub fn g_row(&self, c: usize) -> &[f64] {
        &self.g[c * self.nv..(c + 1) * self.nv]
    }

    pub fn set_row(&mut self, c: usize, f: &[f64], g: &[f64]) {
        let r = c * self.nv..(c + 1) * self.nv;
        self.f[r.clone()].copy_from_slice(f);
        self.g[r].copy_from_slice(g);
    }
}

/// Diffuse-reflection rows on the incoming set `(v − u_w)·n_w < 0`; zero
/// elsewhere. Returns `ρ_w`.
#[allow(clippy::too_many_arguments)]
pub fn wall_distribution(
    f: &[f64],
    grid: &VelocityGrid,
    u_w: Vec2,
    t_w: f64,
    n_w: Vec2,
    r_gas: f64,
    f_w: &mut [f64],
    g_w: &mut [f64],
) -> Result<f64> {
    fill_maxwellian(1.0, u_w, r_gas * t_w, grid, f_w);
    let (mut out, mut inc) = (0.0, 0.0);
    for ((v, &fp), &mp) in grid.nodes().iter().zip(f).zip(f_w.iter()) {
        let cn = (v - u_w).dot(&n_w);
        if cn > 0.0 {
            out += cn * fp;
        } else if cn < 0.0 {
            inc += cn * mp;
        }
    }
    if inc == 0.0 {
        return Err(Error::config(
            "velocity grid has no incoming velocities at a wall; it must contain the wall velocity",
        ));
    }
    let rho_w = -out / inc;
    let half_rt = 0.5 * r_gas * t_w;
    for ((v, fw), gw) in grid.nodes().iter().zip(f_w.iter_mut()).zip(g_w.iter_mut()) {
        if (v - u_w).dot(&n_w) < 0.0 {
            *fw *= rho_w;
            *gw = half_rt * *fw;
        } else {
            *fw = 0.0;
            *gw = 0.0;
        }
    }
    Ok(rho_w)
}

/// Steps of one time iteration, reported to the instrumentation hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Time-step selection, before the iteration proper.
    SelectDt,
    BodyPose,
    Merge,
    Geometry,
    WallDistribution,
    BodyVelocity,
    Transport,
    Redistribute,
}

impl Phase {
    /// Step number 1–7, or 0 for time-step selection.
    pub fn number(self) -> u8 {
        self as u8
    }
}

pub type StepHook = Box<dyn FnMut(Phase) + Send + Sync>;

/// Everything needed to start a simulation.
#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub grid: SpaceGrid,
    pub vgrid: VelocityGrid,
    pub gas: GasModel,
    pub boundaries: DomainBoundaries,
    pub bodies: Vec<Body>,
    pub rho0: f64,
    pub u0: Vec2,
    pub t0: f64,
    pub config: SolverConfig,
}

/// Summary of a completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Gas force and torque on each body at the start of the step.
    pub loads: Vec<(Vec2, f64)>,
    pub retries: usize,
    /// Smallest value of `f` and `g` after the step.
    pub min_f: f64,
    pub min_g: f64,
}

/// Wall data of one cut cell at the current time level.
#[derive(Debug, Clone, Copy)]
struct WallPoint {
    cell: usize,
    body: usize,
    u_w: Vec2,
    t_w: f64,
}

/// Control-volume averages at `tⁿ`.
struct Merged {
    f: Vec<f64>,
    g: Vec<f64>,
    area: Vec<f64>,
}

pub struct Simulation {
    pub grid: SpaceGrid,
    pub vgrid: VelocityGrid,
    pub gas: GasModel,
    pub boundaries: DomainBoundaries,
    pub bodies: Vec<Body>,
    pub config: SolverConfig,
    pub field: DistributionField,
    pub t: f64,
    pub step: u64,
    geom: GeometryField,
    cv: ControlVolumeMap,
    inflow: [Option<(Vec<f64>, Vec<f64>)>; 4],
    hook: Option<StepHook>,
    band: f64,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("t", &self.t)
            .field("step", &self.step)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

struct Scratch {
    div_f: Vec<f64>,
    div_g: Vec<f64>,
    ghost_f: Vec<f64>,
    ghost_g: Vec<f64>,
    feq: Vec<f64>,
    geq: Vec<f64>,
}

impl Scratch {
    fn new(nv: usize) -> Self {
        Self {
            div_f: vec![0.0; nv],
            div_g: vec![0.0; nv],
            ghost_f: vec![0.0; nv],
            ghost_g: vec![0.0; nv],
            feq: vec![0.0; nv],
            geq: vec![0.0; nv],
        }
    }
}

impl Simulation {
    pub fn new(setup: SimulationSetup) -> Result<Self> {
        let SimulationSetup {
            grid,
            vgrid,
            gas,
            boundaries,
            bodies,
            rho0,
            u0,
            t0,
            config,
        } = setup;
        let gas = gas.validated()?;
        boundaries.validate(&vgrid)?;
        if let CflMode::Relaxed { c } = config.cfl {
            if !(c > 0.0) {
                return Err(Error::config("CFL factor must be positive"));
            }
        }
        for body in &bodies {
            body.state.validate()?;
        }
        let nv = vgrid.len();
        let mut inflow: [Option<(Vec<f64>, Vec<f64>)>; 4] = Default::default();
        for (k, side) in Side::ALL.into_iter().enumerate() {
            if let DomainBc::MaxwellianInflow {
                rho,
                velocity,
                temperature,
            } = boundaries.get(side)
            {
                let mut f = vec![0.0; nv];
                fill_maxwellian(rho, velocity, gas.r_gas * temperature, &vgrid, &mut f);
                let g = f
                    .iter()
                    .map(|x| 0.5 * gas.r_gas * temperature * x)
                    .collect();
                inflow[k] = Some((f, g));
            }
        }
        let band = exact_band(&grid);
        let periodic_x = boundaries.periodic_x();
        let states: Vec<_> = bodies.iter().map(|b| b.state.clone()).collect();
        let levelset = ScenePose {
            bodies: &bodies,
            states: &states,
            band,
        }
        .sample(&grid, periodic_x);
        let geom = GeometryField::build(&grid, &levelset, periodic_x)?;
        let cv = build_control_volumes(&geom)?;

        if !(rho0 > 0.0 && t0 > 0.0) {
            return Err(Error::config(
                "initial density and temperature must be positive",
            ));
        }
        let mut f0 = vec![0.0; nv];
        fill_maxwellian(rho0, u0, gas.r_gas * t0, &vgrid, &mut f0);
        let g0: Vec<f64> = f0.iter().map(|x| 0.5 * gas.r_gas * t0 * x).collect();
        let mut field = DistributionField::zeros(grid.n_cells(), nv);
        for (c, cell) in geom.cells.iter().enumerate() {
            if !cell.is_solid() {
                field.set_row(c, &f0, &g0);
            }
        }

        let sim = Self {
            grid,
            vgrid,
            gas,
            boundaries,
            bodies,
            config,
            field,
            t: 0.0,
            step: 0,
            geom,
            cv,
            inflow,
            hook: None,
            band,
        };
        sim.wall_points(&states)?;
        Ok(sim)
    }

    pub fn set_hook(&mut self, hook: StepHook) {
        self.hook = Some(hook);
    }

    fn enter(&mut self, phase: Phase) {
        if let Some(h) = self.hook.as_mut() {
            h(phase);
        }
    }

    pub fn geometry(&self) -> &GeometryField {
        &self.geom
    }

    pub fn control_volumes(&self) -> &ControlVolumeMap {
        &self.cv
    }

    pub fn states(&self) -> Vec<RigidBodyState> {
        self.bodies.iter().map(|b| b.state.clone()).collect()
    }

    /// `Σ_cells S·Σ_p f·Δv_xΔv_y`.
    pub fn total_mass(&self) -> f64 {
        let nv = self.vgrid.len();
        let w = self.vgrid.weight();
        self.geom
            .cells
            .iter()
            .zip(self.field.f.chunks_exact(nv))
            .map(|(cell, row)| cell.area * row.iter().sum::<f64>() * w)
            .sum()
    }

    /// Macroscopic fields of one cell, `None` for solid or empty cells.
    pub fn cell_moments(&self, c: usize) -> Option<MacroFields> {
        if self.geom.cells[c].is_solid() {
            return None;
        }
        compute_moments(
            self.field.f_row(c),
            self.field.g_row(c),
            &self.vgrid,
            self.gas.r_gas,
        )
        .ok()
    }

    /// Largest wall speed of any body at its current state.
    pub fn max_wall_speed(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.state.u_c.norm() + b.state.theta_dot.abs() * b.extent())
            .fold(0.0, f64::max)
    }

    fn wall_points(&self, states: &[RigidBodyState]) -> Result<Vec<WallPoint>> {
        let pose = ScenePose {
            bodies: &self.bodies,
            states,
            band: self.band,
        };
        let mut out = Vec::new();
        for (c, cell) in self.geom.cells.iter().enumerate() {
            if cell.is_solid() || cell.lw == 0.0 || self.bodies.is_empty() {
                continue;
            }
            let (b, _) = pose.owner(cell.wall_mid);
            let state = &states[b];
            let u_w = state.wall_velocity(cell.wall_mid);
            if !self.vgrid.contains(u_w) {
                let (i, j) = self.grid.cell_ij(c);
                return Err(Error::config(format!(
                    "wall velocity ({:.4e}, {:.4e}) at cell ({i}, {j}) lies outside the velocity grid",
                    u_w.x, u_w.y
                )));
            }
            let t_w = self.bodies[b].wall_temperature(state, cell.wall_mid, self.band);
            out.push(WallPoint {
                cell: c,
                body: b,
                u_w,
                t_w,
            });
        }
        Ok(out)
    }

    fn merge(&self) -> Result<Merged> {
        let nv = self.vgrid.len();
        let n = self.cv.n_masters();
        let mut f = vec![0.0; n * nv];
        let mut g = vec![0.0; n * nv];
        let mut area = vec![0.0; n];
        f.par_chunks_mut(nv)
            .zip(g.par_chunks_mut(nv))
            .zip(area.par_iter_mut())
            .enumerate()
            .try_for_each(|(k, ((fk, gk), ak))| {
                let s = self.cv.area_cv[self.cv.masters[k]];
                if !(s > 0.0) {
                    let (i, j) = self.grid.cell_ij(self.cv.masters[k]);
                    return Err(Error::geometry(i, j, "control volume has zero area"));
                }
                for &c in self.cv.members(k) {
                    let a = self.geom.cells[c].area;
                    if a == 0.0 {
                        continue;
                    }
                    for (o, x) in fk.iter_mut().zip(self.field.f_row(c)) {
                        *o += a * x;
                    }
                    for (o, x) in gk.iter_mut().zip(self.field.g_row(c)) {
                        *o += a * x;
                    }
                }
                let inv = 1.0 / s;
                fk.iter_mut().for_each(|x| *x *= inv);
                gk.iter_mut().for_each(|x| *x *= inv);
                *ak = s;
                Ok(())
            })?;
        Ok(Merged { f, g, area })
    }

    /// Relaxation time of every control volume at `tⁿ`. Empty volumes get
    /// `+∞`.
    fn relaxation_times(&self, merged: &Merged) -> Result<Vec<f64>> {
        let nv = self.vgrid.len();
        merged
            .f
            .par_chunks(nv)
            .zip(merged.g.par_chunks(nv))
            .map(|(f, g)| {
                if f.iter().all(|&x| x == 0.0) {
                    return Ok(f64::INFINITY);
                }
                let m = compute_moments(f, g, &self.vgrid, self.gas.r_gas)?;
                Ok(relaxation_time(&m, &self.gas))
            })
            .collect()
    }

    /// Largest `φ_p/S` over control volumes and velocities.
    fn max_outflow_rate(&self, walls: &[WallPoint], merged: &Merged) -> f64 {
        let mut wall_of = vec![usize::MAX; self.grid.n_cells()];
        for (k, w) in walls.iter().enumerate() {
            wall_of[w.cell] = k;
        }
        let nodes = self.vgrid.nodes();
        (0..self.cv.n_masters())
            .into_par_iter()
            .map(|k| {
                let mut best: f64 = 0.0;
                let members = self.cv.members(k);
                for v in nodes {
                    let mut phi = 0.0;
                    for &c in members {
                        let cell = &self.geom.cells[c];
                        if cell.is_solid() {
                            continue;
                        }
                        phi += cell.lx_plus * v.x.max(0.0) - cell.lx_minus * v.x.min(0.0)
                            + cell.ly_plus * v.y.max(0.0)
                            - cell.ly_minus * v.y.min(0.0);
                        if cell.lw > 0.0 {
                            let u_w = match wall_of[c] {
                                usize::MAX => Vec2::zeros(),
                                w => walls[w].u_w,
                            };
                            phi += cell.lw * (v - u_w).dot(&cell.normal).max(0.0);
                        }
                    }
                    best = best.max(phi);
                }
                best / merged.area[k]
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Time step for the configured CFL mode.
    fn select_dt(&self, walls: &[WallPoint], merged: &Merged) -> Result<f64> {
        let dt = match self.config.cfl {
            CflMode::Relaxed { c } => {
                let vmax = self.vgrid.max_abs();
                c / (vmax.x / self.grid.dx + vmax.y / self.grid.dy)
            }
            CflMode::Strict => {
                let rate = self.max_outflow_rate(walls, merged);
                let collision = match self.config.integrator {
                    Integrator::Explicit => self
                        .relaxation_times(merged)?
                        .into_iter()
                        .map(|tau| 1.0 / tau)
                        .fold(0.0, f64::max),
                    Integrator::SemiImplicit => 0.0,
                };
                1.0 / (rate + collision)
            }
        };
        Ok(dt)
    }

    /// Time step the next call to `advance` would start from.
    pub fn cfl_timestep(&self) -> Result<f64> {
        let walls = self.wall_points(&self.states())?;
        let merged = self.merge()?;
        self.select_dt(&walls, &merged)
    }

    /// Ghost rows for a domain side next to a cell whose control-volume
    /// value is `(f, g)`.
    fn ghost(
        &self,
        side: Side,
        f: &[f64],
        g: &[f64],
        gf: &mut [f64],
        gg: &mut [f64],
    ) -> Result<()> {
        match self.boundaries.get(side) {
            DomainBc::Periodic => unreachable!("periodic sides have interior neighbours"),
            DomainBc::Specular => {
                for p in 0..f.len() {
                    let q = match side {
                        Side::Left | Side::Right => self.vgrid.mirror_x(p),
                        Side::Bottom | Side::Top => self.vgrid.mirror_y(p),
                    };
                    gf[p] = f[q];
                    gg[p] = g[q];
                }
            }
            DomainBc::DiffuseWall {
                temperature,
                velocity,
            } => {
                wall_distribution(
                    f,
                    &self.vgrid,
                    velocity,
                    temperature,
                    side.normal(),
                    self.gas.r_gas,
                    gf,
                    gg,
                )?;
            }
            DomainBc::NeumannCopy => {
                gf.copy_from_slice(f);
                gg.copy_from_slice(g);
            }
            DomainBc::MaxwellianInflow { .. } => {
                let k = Side::ALL.iter().position(|&s| s == side).unwrap();
                let (f_in, g_in) = self.inflow[k].as_ref().unwrap();
                gf.copy_from_slice(f_in);
                gg.copy_from_slice(g_in);
            }
        }
        Ok(())
    }

    /// Adds the outgoing upwind fluxes of member cell `c` into the scratch
    /// divergence rows.
    #[allow(clippy::too_many_arguments)]
    fn accumulate_fluxes(
        &self,
        c: usize,
        own_f: &[f64],
        own_g: &[f64],
        merged: &Merged,
        wall: Option<(&WallPoint, &[f64], &[f64])>,
        s: &mut Scratch,
    ) -> Result<()> {
        let nv = self.vgrid.len();
        let cell: &VirtualCellGeom = &self.geom.cells[c];
        let (i, j) = self.grid.cell_ij(c);
        let nodes = self.vgrid.nodes();
        let edges = cell.cartesian_edges();
        for dir in 0..4 {
            let len = edges[dir];
            if len == 0.0 {
                continue;
            }
            let (nf, ng): (&[f64], &[f64]) = match self.geom.neighbor(i, j, dir) {
                Some((ni, nj)) => {
                    let k = self.cv.slot[self.grid.cell_index(ni, nj)];
                    if k == NO_MASTER {
                        return Err(Error::geometry(i, j, "open edge borders a solid cell"));
                    }
                    (
                        &merged.f[k * nv..(k + 1) * nv],
                        &merged.g[k * nv..(k + 1) * nv],
                    )
                }
                None => {
                    let side = match dir {
                        0 => Side::Right,
                        1 => Side::Left,
                        2 => Side::Top,
                        _ => Side::Bottom,
                    };
                    debug_assert_eq!(side.edge_dir(), dir);
                    let (gf, gg) = (&mut s.ghost_f, &mut s.ghost_g);
                    self.ghost(side, own_f, own_g, gf, gg)?;
                    (&s.ghost_f[..], &s.ghost_g[..])
                }
            };
            // Outward flux through the edge, signed by the edge normal.
            let (axis_y, sign) = match dir {
                0 => (false, 1.0),
                1 => (false, -1.0),
                2 => (true, 1.0),
                _ => (true, -1.0),
            };
            for p in 0..nv {
                let vn = sign * if axis_y { nodes[p].y } else { nodes[p].x };
                let (fo, go) = if vn > 0.0 {
                    (own_f[p], own_g[p])
                } else {
                    (nf[p], ng[p])
                };
                s.div_f[p] += len * vn * fo;
                s.div_g[p] += len * vn * go;
            }
        }
        if let Some((wp, fw, gw)) = wall {
            let lw = cell.lw;
            let n = cell.normal;
            for p in 0..nv {
                let cn = (nodes[p] - wp.u_w).dot(&n);
                let (fo, go) = if cn > 0.0 {
                    (own_f[p], own_g[p])
                } else {
                    (fw[p], gw[p])
                };
                s.div_f[p] += lw * cn * fo;
                s.div_g[p] += lw * cn * go;
            }
        }
        Ok(())
    }

    /// Advances one time step. `dt_cap` bounds the step from above.
    pub fn advance(&mut self, dt_cap: Option<f64>) -> Result<StepReport> {
        let step = self.step;
        self.advance_inner(dt_cap).map_err(|e| Error::Step {
            step,
            source: Box::new(e),
        })
    }

    fn advance_inner(&mut self, dt_cap: Option<f64>) -> Result<StepReport> {
        let nv = self.vgrid.len();
        let states_now = self.states();

        self.enter(Phase::SelectDt);
        let walls = self.wall_points(&states_now)?;
        let merged = self.merge()?;
        let mut dt = self.select_dt(&walls, &merged)?;
        if let Some(cap) = dt_cap {
            dt = dt.min(cap);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("invalid time step {dt:e}")));
        }

        let mut retries = 0;
        let (states_next, geom_next, cv_adopted, cv_next, area_next) = loop {
            self.enter(Phase::BodyPose);
            let mut states_next = states_now.clone();
            for s in &mut states_next {
                s.advance_pose(dt);
            }
            // Averages over the tⁿ control volumes were formed above; they
            // depend on the tⁿ geometry only.
            self.enter(Phase::Merge);
            self.enter(Phase::Geometry);
            match self.next_geometry(&states_next) {
                Ok(next) => break (states_next, next.0, next.1, next.2, next.3),
                Err(e) if retries < MAX_RETRIES && matches!(e, Error::Geometry { .. }) => {
                    retries += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        };

        self.enter(Phase::WallDistribution);
        let mut wall_of = vec![usize::MAX; self.grid.n_cells()];
        let mut wall_f = vec![0.0; walls.len() * nv];
        let mut wall_g = vec![0.0; walls.len() * nv];
        for (k, w) in walls.iter().enumerate() {
            wall_of[w.cell] = k;
        }
        wall_f
            .par_chunks_mut(nv)
            .zip(wall_g.par_chunks_mut(nv))
            .zip(walls.par_iter())
            .try_for_each(|((fw, gw), w)| {
                let k = self.cv.slot[w.cell];
                let cell = &self.geom.cells[w.cell];
                wall_distribution(
                    &merged.f[k * nv..(k + 1) * nv],
                    &self.vgrid,
                    w.u_w,
                    w.t_w,
                    cell.normal,
                    self.gas.r_gas,
                    fw,
                    gw,
                )
                .map(|_| ())
            })?;

        self.enter(Phase::BodyVelocity);
        let mut elements: Vec<Vec<WallElement>> = vec![Vec::new(); self.bodies.len()];
        for (k, w) in walls.iter().enumerate() {
            let cell = &self.geom.cells[w.cell];
            let m = self.cv.slot[w.cell];
            let stress = wall_stress(
                &merged.f[m * nv..(m + 1) * nv],
                &wall_f[k * nv..(k + 1) * nv],
                &self.vgrid,
                w.u_w,
                cell.normal,
            );
            elements[w.body].push(WallElement {
                x_w: cell.wall_mid,
                n_w: cell.normal,
                lw: cell.lw,
                stress,
            });
        }
        let loads: Vec<(Vec2, f64)> = states_now
            .iter()
            .zip(&elements)
            .map(|(s, e)| force_and_torque(s.x_c, e))
            .collect();
        let mut states_next = states_next;
        for (s, &(force, torque)) in states_next.iter_mut().zip(&loads) {
            s.advance_velocity(force, torque, dt);
        }

        self.enter(Phase::Transport);
        let taus = self.relaxation_times(&merged)?;
        let n_masters = self.cv.n_masters();
        let mut f_new = vec![0.0; n_masters * nv];
        let mut g_new = vec![0.0; n_masters * nv];
        f_new
            .par_chunks_mut(nv)
            .zip(g_new.par_chunks_mut(nv))
            .enumerate()
            .try_for_each_init(
                || Scratch::new(nv),
                |s, (k, (fo, go))| {
                    s.div_f.iter_mut().for_each(|x| *x = 0.0);
                    s.div_g.iter_mut().for_each(|x| *x = 0.0);
                    let own_f = &merged.f[k * nv..(k + 1) * nv];
                    let own_g = &merged.g[k * nv..(k + 1) * nv];
                    for &c in cv_adopted.members(k) {
                        if c >= self.geom.cells.len() || self.geom.cells[c].is_solid() {
                            continue;
                        }
                        let wall = match wall_of[c] {
                            usize::MAX => None,
                            w => Some((
                                &walls[w],
                                &wall_f[w * nv..(w + 1) * nv],
                                &wall_g[w * nv..(w + 1) * nv],
                            )),
                        };
                        self.accumulate_fluxes(c, own_f, own_g, &merged, wall, s)?;
                    }
                    self.update_volume(
                        k,
                        own_f,
                        own_g,
                        merged.area[k],
                        area_next[k],
                        taus[k],
                        dt,
                        s,
                        fo,
                        go,
                    )
                },
            )?;

        self.enter(Phase::Redistribute);
        let mut field = DistributionField::zeros(self.grid.n_cells(), nv);
        for (c, cell) in geom_next.cells.iter().enumerate() {
            if cell.is_solid() {
                continue;
            }
            let k = cv_adopted.slot[c];
            field.set_row(
                c,
                &f_new[k * nv..(k + 1) * nv],
                &g_new[k * nv..(k + 1) * nv],
            );
        }
        let min_f = field.f.iter().copied().fold(f64::INFINITY, f64::min);
        let min_g = field.g.iter().copied().fold(f64::INFINITY, f64::min);

        self.field = field;
        self.geom = geom_next;
        self.cv = cv_next;
        for (b, s) in self.bodies.iter_mut().zip(states_next) {
            b.state = s;
        }
        self.t += dt;
        self.step += 1;
        Ok(StepReport {
            dt,
            loads,
            retries,
            min_f,
            min_g,
        })
    }

    /// Geometry at the new pose, the tⁿ merge sets extended by appearing
    /// cells, the new merge sets, and the new control-volume areas.
    #[allow(clippy::type_complexity)]
    fn next_geometry(
        &self,
        states_next: &[RigidBodyState],
    ) -> Result<(GeometryField, ControlVolumeMap, ControlVolumeMap, Vec<f64>)> {
        let periodic_x = self.boundaries.periodic_x();
        let geom_next = if self
            .bodies
            .iter()
            .all(|b| b.state.mode == crate::rigid_body::MotionMode::fixed())
        {
            self.geom.clone()
        } else {
            let levelset = ScenePose {
                bodies: &self.bodies,
                states: states_next,
                band: self.band,
            }
            .sample(&self.grid, periodic_x);
            GeometryField::build(&self.grid, &levelset, periodic_x)?
        };
        let mut adopted = self.cv.clone();
        adopted.adopt_appearing(&self.geom, &geom_next)?;
        let area_next = adopted.member_area_sums(&geom_next);
        for (k, &s) in area_next.iter().enumerate() {
            if !(s > 0.0) {
                let (i, j) = self.grid.cell_ij(adopted.masters[k]);
                return Err(Error::geometry(
                    i,
                    j,
                    "control volume vanishes during the step",
                ));
            }
        }
        let cv_next = build_control_volumes(&geom_next)?;
        Ok((geom_next, adopted, cv_next, area_next))
    }

    /// Flux-and-collide update of one control volume into `fo`, `go`.
    #[allow(clippy::too_many_arguments)]
    fn update_volume(
        &self,
        k: usize,
        f: &[f64],
        g: &[f64],
        s_now: f64,
        s_next: f64,
        tau: f64,
        dt: f64,
        s: &mut Scratch,
        fo: &mut [f64],
        go: &mut [f64],
    ) -> Result<()> {
        let ratio = s_now / s_next;
        let dts = dt / s_next;
        let active = tau.is_finite() && f.iter().any(|&x| x != 0.0);
        match self.config.integrator {
            Integrator::Explicit => {
                if active {
                    conservative_equilibrium(f, g, &self.gas, &self.vgrid, &mut s.feq, &mut s.geq)
                        .map_err(|e| self.at_master(k, e))?;
                    let r = dt / tau;
                    for p in 0..f.len() {
                        fo[p] = ratio * f[p] - dts * s.div_f[p] + ratio * r * (s.feq[p] - f[p]);
                        go[p] = ratio * g[p] - dts * s.div_g[p] + ratio * r * (s.geq[p] - g[p]);
                    }
                } else {
                    for p in 0..f.len() {
                        fo[p] = ratio * f[p] - dts * s.div_f[p];
                        go[p] = ratio * g[p] - dts * s.div_g[p];
                    }
                }
            }
            Integrator::SemiImplicit => {
                for p in 0..f.len() {
                    fo[p] = ratio * f[p] - dts * s.div_f[p];
                    go[p] = ratio * g[p] - dts * s.div_g[p];
                }
                if active && fo.iter().any(|&x| x != 0.0) {
                    conservative_equilibrium(
                        fo,
                        go,
                        &self.gas,
                        &self.vgrid,
                        &mut s.feq,
                        &mut s.geq,
                    )
                    .map_err(|e| self.at_master(k, e))?;
                    let r = dt / tau;
                    let inv = 1.0 / (1.0 + r);
                    for p in 0..f.len() {
                        fo[p] = (fo[p] + r * s.feq[p]) * inv;
                        go[p] = (go[p] + r * s.geq[p]) * inv;
                    }
                }
            }
        }
        Ok(())
    }

    fn at_master(&self, k: usize, e: Error) -> Error {
        let (i, j) = self.grid.cell_ij(self.cv.masters[k]);
        Error::geometry(i, j, format!("collision update failed: {e}"))
    }
}
