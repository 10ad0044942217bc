//! Discrete velocity grid, quadrature moments, reduced equilibria and the
//! conservation-preserving equilibrium solve.
//!
//! The plane-flow model carries two reduced distributions per velocity node:
//! `f` (mass density in phase space) and `g` (the `v_z²/2`-weighted
//! integral of the full distribution). All quadratures use the flat
//! midpoint weight `Δv_x·Δv_y` and sum in ascending node order.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::Vec2;

/// Maximum number of Newton updates in the conservative equilibrium solve.
pub const NEWTON_MAX_ITER: usize = 50;
/// Relative moment tolerance the conservative equilibrium must reach.
pub const NEWTON_TOL: f64 = 1e-12;
/// Residual below which the Newton loop stops early.
const NEWTON_TIGHT: f64 = 1e-14;

/// Cartesian grid of `N²` microscopic velocities.
///
/// Node `p = p₂·N + p₁` sits at `v_min + (p₁·Δv_x, p₂·Δv_y)` with
/// `Δv = (v_max − v_min)/N`.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    v_min: Vec2,
    v_max: Vec2,
    n: usize,
    dv: Vec2,
    nodes: Vec<Vec2>,
    axis_x: Vec<f64>,
    axis_y: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(v_min: Vec2, v_max: Vec2, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "velocity grid needs at least 2 points per axis, got {n}"
            )));
        }
        if !(v_max.x > v_min.x && v_max.y > v_min.y)
            || !v_min.iter().chain(v_max.iter()).all(|v| v.is_finite())
        {
            return Err(Error::config(format!(
                "velocity grid bounds must satisfy v_max > v_min componentwise, got {v_min:?} .. {v_max:?}"
            )));
        }
        let dv = (v_max - v_min) / n as f64;
        let axis_x: Vec<f64> = (0..n).map(|p1| v_min.x + p1 as f64 * dv.x).collect();
        let axis_y: Vec<f64> = (0..n).map(|p2| v_min.y + p2 as f64 * dv.y).collect();
        let mut nodes = Vec::with_capacity(n * n);
        for &vy in &axis_y {
            for &vx in &axis_x {
                nodes.push(Vec2::new(vx, vy));
            }
        }
        Ok(Self {
            v_min,
            v_max,
            n,
            dv,
            nodes,
            axis_x,
            axis_y,
        })
    }

    /// Grid whose nodes run from `center − half_span` to `center + half_span`
    /// inclusive, so that it is mirror-symmetric about `center`.
    pub fn symmetric(center: Vec2, half_span: Vec2, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "velocity grid needs at least 2 points per axis, got {n}"
            )));
        }
        let dv = half_span * 2.0 / (n - 1) as f64;
        let v_min = center - half_span;
        Self::new(v_min, v_min + dv * n as f64, n)
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `N²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn v_min(&self) -> Vec2 {
        self.v_min
    }

    pub fn v_max(&self) -> Vec2 {
        self.v_max
    }

    pub fn dv(&self) -> Vec2 {
        self.dv
    }

    /// Quadrature weight `Δv_x·Δv_y`.
    pub fn weight(&self) -> f64 {
        self.dv.x * self.dv.y
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, p: usize) -> Vec2 {
        self.nodes[p]
    }

    pub fn axis_x(&self) -> &[f64] {
        &self.axis_x
    }

    pub fn axis_y(&self) -> &[f64] {
        &self.axis_y
    }

    /// Splits a flat index into `(p₁, p₂)`.
    pub fn split(&self, p: usize) -> (usize, usize) {
        (p % self.n, p / self.n)
    }

    pub fn index(&self, p1: usize, p2: usize) -> usize {
        p2 * self.n + p1
    }

    /// Index of the node with `v_y` reflected, assuming a symmetric axis.
    pub fn mirror_y(&self, p: usize) -> usize {
        let (p1, p2) = self.split(p);
        self.index(p1, self.n - 1 - p2)
    }

    pub fn mirror_x(&self, p: usize) -> usize {
        let (p1, p2) = self.split(p);
        self.index(self.n - 1 - p1, p2)
    }

    fn axis_symmetric(axis: &[f64], spacing: f64) -> bool {
        let n = axis.len();
        (0..n).all(|k| (axis[k] + axis[n - 1 - k]).abs() <= 1e-12 * spacing)
    }

    /// True when the `v_y` nodes are symmetric about zero.
    pub fn is_symmetric_y(&self) -> bool {
        Self::axis_symmetric(&self.axis_y, self.dv.y)
    }

    pub fn is_symmetric_x(&self) -> bool {
        Self::axis_symmetric(&self.axis_x, self.dv.x)
    }

    /// Largest node speed along each axis.
    pub fn max_abs(&self) -> Vec2 {
        let last = self.n - 1;
        Vec2::new(
            self.axis_x[0].abs().max(self.axis_x[last].abs()),
            self.axis_y[0].abs().max(self.axis_y[last].abs()),
        )
    }

    /// True when `u` lies inside the node hull.
    pub fn contains(&self, u: Vec2) -> bool {
        let last = self.n - 1;
        u.x >= self.axis_x[0]
            && u.x <= self.axis_x[last]
            && u.y >= self.axis_y[0]
            && u.y <= self.axis_y[last]
    }
}

/// Macroscopic fields of one velocity row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroFields {
    pub rho: f64,
    pub u: Vec2,
    /// Total energy density (translational plus the reduced `g` part).
    pub energy: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub stress: Matrix2<f64>,
    pub heat_flux: Vec2,
}

impl MacroFields {
    /// Fields of a gas in equilibrium (zero deviatoric stress, no heat flux).
    pub fn equilibrium(rho: f64, u: Vec2, temperature: f64, r_gas: f64) -> Self {
        let pressure = rho * r_gas * temperature;
        Self {
            rho,
            u,
            energy: 0.5 * rho * u.norm_squared() + 1.5 * pressure,
            temperature,
            pressure,
            stress: Matrix2::identity() * pressure,
            heat_flux: Vec2::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionModel {
    Bgk,
    Shakhov,
}

/// How the relaxation time is obtained from the local state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationLaw {
    /// `τ = μ/(ρ·R·T₀)`.
    MuOverRhoRT0,
    /// `τ = (μ/P)·(T/T₀)^ω`.
    ViscosityPowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    pub r_gas: f64,
    pub prandtl: f64,
    pub collision: CollisionModel,
    pub relaxation: RelaxationLaw,
    pub mu_ref: f64,
    pub omega: f64,
    pub t0: f64,
    pub rho0: f64,
}

impl GasModel {
    pub fn bgk(
        r_gas: f64,
        relaxation: RelaxationLaw,
        mu_ref: f64,
        omega: f64,
        t0: f64,
        rho0: f64,
    ) -> Result<Self> {
        Self {
            r_gas,
            prandtl: 1.0,
            collision: CollisionModel::Bgk,
            relaxation,
            mu_ref,
            omega,
            t0,
            rho0,
        }
        .validated()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn shakhov(
        r_gas: f64,
        prandtl: f64,
        relaxation: RelaxationLaw,
        mu_ref: f64,
        omega: f64,
        t0: f64,
        rho0: f64,
    ) -> Result<Self> {
        Self {
            r_gas,
            prandtl,
            collision: CollisionModel::Shakhov,
            relaxation,
            mu_ref,
            omega,
            t0,
            rho0,
        }
        .validated()
    }

    /// Checks the parameter ranges; BGK always gets `Pr = 1`.
    pub fn validated(mut self) -> Result<Self> {
        if self.collision == CollisionModel::Bgk {
            self.prandtl = 1.0;
        }
        if !(self.r_gas > 0.0) {
            return Err(Error::config("gas constant must be positive"));
        }
        if !(self.mu_ref > 0.0) || !(self.t0 > 0.0) {
            return Err(Error::config(
                "reference viscosity and temperature must be positive",
            ));
        }
        if !(self.prandtl > 0.0) {
            return Err(Error::config("Prandtl number must be positive"));
        }
        Ok(self)
    }
}

/// Quadrature moments of a `(f, g)` row.
pub fn compute_moments(
    f: &[f64],
    g: &[f64],
    grid: &VelocityGrid,
    r_gas: f64,
) -> Result<MacroFields> {
    debug_assert_eq!(f.len(), grid.len());
    debug_assert_eq!(g.len(), grid.len());
    let w = grid.weight();
    let (mut m0, mut mx, mut my, mut e) = (0.0, 0.0, 0.0, 0.0);
    for ((v, &fp), &gp) in grid.nodes().iter().zip(f).zip(g) {
        m0 += fp;
        mx += v.x * fp;
        my += v.y * fp;
        e += 0.5 * v.norm_squared() * fp + gp;
    }
    let rho = m0 * w;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Degenerate(format!(
            "density {rho:e} is not positive"
        )));
    }
    let u = Vec2::new(mx * w / rho, my * w / rho);
    let energy = e * w;
    let temperature = (energy - 0.5 * rho * u.norm_squared()) / (1.5 * rho * r_gas);
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Degenerate(format!(
            "temperature {temperature:e} is not positive"
        )));
    }

    let (mut sxx, mut sxy, mut syy, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((v, &fp), &gp) in grid.nodes().iter().zip(f).zip(g) {
        let c = v - u;
        sxx += c.x * c.x * fp;
        sxy += c.x * c.y * fp;
        syy += c.y * c.y * fp;
        let h = 0.5 * c.norm_squared() * fp + gp;
        qx += c.x * h;
        qy += c.y * h;
    }
    Ok(MacroFields {
        rho,
        u,
        energy,
        temperature,
        pressure: rho * r_gas * temperature,
        stress: Matrix2::new(sxx * w, sxy * w, sxy * w, syy * w),
        heat_flux: Vec2::new(qx * w, qy * w),
    })
}

/// Writes the reduced Maxwellian `ρ/(2πRT)·exp(−|v−u|²/(2RT))` at every node.
pub fn reduced_maxwellian(
    rho: f64,
    u: Vec2,
    temperature: f64,
    r_gas: f64,
    grid: &VelocityGrid,
    out: &mut [f64],
) -> Result<()> {
    if !(rho > 0.0) || !(temperature > 0.0) {
        return Err(Error::Degenerate(format!(
            "Maxwellian needs positive density and temperature, got rho={rho:e}, T={temperature:e}"
        )));
    }
    fill_maxwellian(rho, u, temperature * r_gas, grid, out);
    Ok(())
}

/// Separable evaluation; `rt = R·T`. No argument checks.
pub(crate) fn fill_maxwellian(rho: f64, u: Vec2, rt: f64, grid: &VelocityGrid, out: &mut [f64]) {
    let n = grid.n();
    let inv = 1.0 / (2.0 * rt);
    let ex: Vec<f64> = grid
        .axis_x()
        .iter()
        .map(|&vx| (-(vx - u.x).powi(2) * inv).exp())
        .collect();
    let ey: Vec<f64> = grid
        .axis_y()
        .iter()
        .map(|&vy| (-(vy - u.y).powi(2) * inv).exp())
        .collect();
    let a = rho / (2.0 * PI * rt);
    for (p2, row) in out.chunks_exact_mut(n).enumerate() {
        let ay = a * ey[p2];
        for (o, &x) in row.iter_mut().zip(&ex) {
            *o = ay * x;
        }
    }
}

/// Equilibrium pair `(f_eq, g_eq)` of the chosen collision model.
pub fn equilibrium_pair(
    macro_fields: &MacroFields,
    model: &GasModel,
    grid: &VelocityGrid,
    feq: &mut [f64],
    geq: &mut [f64],
) -> Result<()> {
    let MacroFields {
        rho,
        u,
        temperature,
        ..
    } = *macro_fields;
    reduced_maxwellian(rho, u, temperature, model.r_gas, grid, feq)?;
    let rt = model.r_gas * temperature;
    let half_rt = 0.5 * rt;
    let shakhov = shakhov_factor(macro_fields, model);
    match shakhov {
        None => {
            for (gq, &fq) in geq.iter_mut().zip(feq.iter()) {
                *gq = half_rt * fq;
            }
        }
        Some(q) => apply_shakhov(grid, u, rt, q, feq, geq),
    }
    Ok(())
}

/// `(1 − Pr)·q/(5·P·R·T)` when the Shakhov correction is active and nonzero.
fn shakhov_factor(m: &MacroFields, model: &GasModel) -> Option<Vec2> {
    if model.collision != CollisionModel::Shakhov {
        return None;
    }
    let coef = 1.0 - model.prandtl;
    if coef == 0.0 || (m.heat_flux.x == 0.0 && m.heat_flux.y == 0.0) {
        return None;
    }
    let rt = model.r_gas * m.temperature;
    Some(m.heat_flux * (coef / (5.0 * m.rho * rt * rt)))
}

/// Turns a Maxwellian row into the Shakhov pair in place.
fn apply_shakhov(
    grid: &VelocityGrid,
    u: Vec2,
    rt: f64,
    scaled_q: Vec2,
    feq: &mut [f64],
    geq: &mut [f64],
) {
    let half_rt = 0.5 * rt;
    for ((v, fq), gq) in grid.nodes().iter().zip(feq.iter_mut()).zip(geq.iter_mut()) {
        let c = v - u;
        let cq = c.dot(&scaled_q);
        let c2 = c.norm_squared() / rt;
        let m = *fq;
        *fq = m * (1.0 + cq * (c2 - 4.0));
        *gq = half_rt * m * (1.0 + cq * (c2 - 2.0));
    }
}

/// Result of the conservative equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumParams {
    pub rho: f64,
    pub u: Vec2,
    pub temperature: f64,
    /// Newton updates performed.
    pub iterations: usize,
    /// Final scaled residual.
    pub residual: f64,
}

/// Conserved discrete moments `(ρ, ρu_x, ρu_y, E)` of a row pair.
pub fn conserved_moments(f: &[f64], g: &[f64], grid: &VelocityGrid) -> [f64; 4] {
    let w = grid.weight();
    let (mut m0, mut mx, mut my, mut e) = (0.0, 0.0, 0.0, 0.0);
    for ((v, &fp), &gp) in grid.nodes().iter().zip(f).zip(g) {
        m0 += fp;
        mx += v.x * fp;
        my += v.y * fp;
        e += 0.5 * v.norm_squared() * fp + gp;
    }
    [m0 * w, mx * w, my * w, e * w]
}

/// Maxwellian parameters whose discrete BGK pair reproduces the discrete
/// mass, momentum and energy of `(f, g)`.
pub fn conservative_equilibrium_params(
    f: &[f64],
    g: &[f64],
    grid: &VelocityGrid,
    r_gas: f64,
) -> Result<EquilibriumParams> {
    let naive = compute_moments(f, g, grid, r_gas)?;
    let target = conserved_moments(f, g, grid);
    let mut scratch = vec![0.0; grid.len()];
    newton_solve(&target, &naive, grid, r_gas, None, &mut scratch)
}

/// Conservative equilibrium pair for any collision model, written into
/// `feq`/`geq`. Returns the naive moments of the input and the solved
/// parameters.
///
/// For the Shakhov model the heat flux is held at the value of the input
/// row and the Newton residual includes the discrete moments of the
/// heat-flux correction, so the full pair conserves mass, momentum and
/// energy discretely.
pub fn conservative_equilibrium(
    f: &[f64],
    g: &[f64],
    model: &GasModel,
    grid: &VelocityGrid,
    feq: &mut [f64],
    geq: &mut [f64],
) -> Result<(MacroFields, EquilibriumParams)> {
    let naive = compute_moments(f, g, grid, model.r_gas)?;
    let target = conserved_moments(f, g, grid);
    let correction = if model.collision == CollisionModel::Shakhov && model.prandtl != 1.0 {
        Some((1.0 - model.prandtl, naive.heat_flux))
    } else {
        None
    };
    let params = newton_solve(&target, &naive, grid, model.r_gas, correction, feq)?;
    let rt = model.r_gas * params.temperature;
    fill_maxwellian(params.rho, params.u, rt, grid, feq);
    match correction {
        Some((coef, q)) if q.x != 0.0 || q.y != 0.0 => {
            let scaled = q * (coef / (5.0 * params.rho * rt * rt));
            apply_shakhov(grid, params.u, rt, scaled, feq, geq);
        }
        _ => {
            let half_rt = 0.5 * rt;
            for (gq, &fq) in geq.iter_mut().zip(feq.iter()) {
                *gq = half_rt * fq;
            }
        }
    }
    Ok((naive, params))
}

/// Newton iteration on `(ρ, u_x, u_y, T)`.
///
/// The Jacobian is the exact derivative of the discrete Maxwellian moments;
/// when a Shakhov correction is present its moments enter the residual only.
fn newton_solve(
    target: &[f64; 4],
    initial: &MacroFields,
    grid: &VelocityGrid,
    r_gas: f64,
    correction: Option<(f64, Vec2)>,
    scratch: &mut [f64],
) -> Result<EquilibriumParams> {
    let w = grid.weight();
    let scale = [
        target[0].abs(),
        target[0].abs() * (r_gas * initial.temperature).sqrt()
            + target[1].abs().max(target[2].abs()),
        target[0].abs() * (r_gas * initial.temperature).sqrt()
            + target[1].abs().max(target[2].abs()),
        target[3].abs(),
    ];
    let mut x = Vector4::new(initial.rho, initial.u.x, initial.u.y, initial.temperature);
    let mut last_res = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let (rho, u, t) = (x[0], Vec2::new(x[1], x[2]), x[3]);
        let rt = r_gas * t;
        fill_maxwellian(rho, u, rt, grid, scratch);
        let scaled_q = correction.map(|(coef, q)| q * (coef / (5.0 * rho * rt * rt)));

        let mut model = Vector4::zeros();
        let mut jac = Matrix4::zeros();
        let inv_rt = 1.0 / rt;
        for (v, &m) in grid.nodes().iter().zip(scratch.iter()) {
            let c = v - u;
            let c2 = c.norm_squared();
            let half_v2 = 0.5 * v.norm_squared();
            let phi = Vector4::new(1.0, v.x, v.y, half_v2 + 0.5 * rt);
            let (mf, mg) = match scaled_q {
                Some(sq) => {
                    let cq = c.dot(&sq);
                    let c2n = c2 * inv_rt;
                    (m * (1.0 + cq * (c2n - 4.0)), m * (1.0 + cq * (c2n - 2.0)))
                }
                None => (m, m),
            };
            model[0] += mf;
            model[1] += v.x * mf;
            model[2] += v.y * mf;
            model[3] += half_v2 * mf + 0.5 * rt * mg;

            let d_rho = m / rho;
            let d_ux = m * c.x * inv_rt;
            let d_uy = m * c.y * inv_rt;
            let d_t = m * (0.5 * c2 * inv_rt - 1.0) / t;
            for k in 0..4 {
                jac[(k, 0)] += phi[k] * d_rho;
                jac[(k, 1)] += phi[k] * d_ux;
                jac[(k, 2)] += phi[k] * d_uy;
                jac[(k, 3)] += phi[k] * d_t;
            }
            jac[(3, 3)] += 0.5 * r_gas * m;
        }
        model *= w;
        jac *= w;
        let resid = model - Vector4::from_column_slice(target);
        let res = (0..4)
            .map(|k| resid[k].abs() / scale[k])
            .fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        let stalled = res <= NEWTON_TOL && res >= 0.5 * last_res;
        if res <= NEWTON_TIGHT || stalled {
            return Ok(EquilibriumParams {
                rho,
                u,
                temperature: t,
                iterations,
                residual: res,
            });
        }
        if iterations >= NEWTON_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        last_res = res;
        let delta = jac.lu().solve(&(-resid)).ok_or(Error::NoConvergence {
            iterations,
            residual: res,
        })?;
        // Keep density and temperature positive.
        let mut step = 1.0;
        while x[0] + step * delta[0] <= 0.0 || x[3] + step * delta[3] <= 0.0 {
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res,
                });
            }
        }
        x += delta * step;
        iterations += 1;
    }
}

/// Relaxation time of the selected law.
pub fn relaxation_time(m: &MacroFields, model: &GasModel) -> f64 {
    match model.relaxation {
        RelaxationLaw::MuOverRhoRT0 => model.mu_ref / (m.rho * model.r_gas * model.t0),
        RelaxationLaw::ViscosityPowerLaw => {
            model.mu_ref / m.pressure * (m.temperature / model.t0).powf(model.omega)
        }
    }
}
