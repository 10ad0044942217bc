//! Ready-made configurations: radiometric plates in a channel, a 2D Crookes
//! radiometer and a two-lobe Roots blower.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geometry::SpaceGrid;
use crate::rigid_body::{MotionMode, RigidBodyState};
use crate::scene::Body;
use crate::shapes::{Component, Polygon, Shape, WallTemperature};
use crate::solver::{
    CflMode, DomainBc, DomainBoundaries, Integrator, SimulationSetup, SolverConfig,
};
use crate::velocity_space::{GasModel, RelaxationLaw, VelocityGrid};
use crate::Vec2;

pub const SCENARIO_NAMES: [&str; 3] = ["plates", "crookes2d", "roots_blower"];

/// Gas constant of argon, J/(kg·K).
pub const R_ARGON: f64 = 208.13;

/// Thermal widths covered on each side of the velocity grid.
pub const VELOCITY_SPAN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub nx: usize,
    pub ny: usize,
    /// Velocity points per axis.
    pub nv: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    Steps(u64),
    Time(f64),
    /// Stop once the tracked body speed changes by less than `threshold`
    /// (relative) over `window` steps, or after `max_steps`.
    Stationary {
        threshold: f64,
        window: u64,
        max_steps: u64,
    },
}

/// Rectangular region over which the mean gas pressure is recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub lo: Vec2,
    pub hi: Vec2,
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub grid: SpaceGrid,
    pub vgrid: VelocityGrid,
    pub gas: GasModel,
    pub boundaries: DomainBoundaries,
    pub bodies: Vec<Body>,
    pub rho0: f64,
    pub u0: Vec2,
    pub t0: f64,
    pub solver: SolverConfig,
    pub end: EndCondition,
    /// Time-series cadence in steps.
    pub output_every: u64,
    pub probes: Vec<Probe>,
    /// Body whose motion is written to the time series.
    pub tracked_body: Option<usize>,
}

impl ScenarioSpec {
    pub fn setup(&self) -> SimulationSetup {
        SimulationSetup {
            grid: self.grid.clone(),
            vgrid: self.vgrid.clone(),
            gas: self.gas,
            boundaries: self.boundaries,
            bodies: self.bodies.clone(),
            rho0: self.rho0,
            u0: self.u0,
            t0: self.t0,
            config: self.solver,
        }
    }

    /// Largest speed any wall point reaches at the initial state, including
    /// prescribed rotations.
    pub fn max_wall_speed(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.state.u_c.norm() + b.state.theta_dot.abs() * b.extent())
            .fold(0.0, f64::max)
    }

    /// Checks that the velocity grid contains every wall velocity.
    pub fn validate(&self) -> Result<()> {
        let speed = self.max_wall_speed();
        let lo = self.vgrid.v_min();
        let hi = self.vgrid.nodes()[self.vgrid.len() - 1];
        let reach = (hi.x.min(-lo.x)).min(hi.y.min(-lo.y));
        if speed >= reach {
            return Err(Error::config(format!(
                "velocity grid half-width {reach:.4e} does not contain wall speed {speed:.4e}"
            )));
        }
        Ok(())
    }
}

/// Velocity grid symmetric about zero covering `speed` plus the thermal
/// span at `t_max`.
pub fn default_velocity_grid(
    r_gas: f64,
    t_max: f64,
    speed: f64,
    nv: usize,
) -> Result<VelocityGrid> {
    let half = speed + VELOCITY_SPAN * (r_gas * t_max).sqrt();
    VelocityGrid::symmetric(Vec2::zeros(), Vec2::new(half, half), nv)
}

/// Viscosity giving Knudsen number `kn` for reference length `length`
/// under `Kn = (2/√π)·√(2RT₀)·μ/(ρ₀RT₀)/D`.
pub fn viscosity_from_knudsen(kn: f64, length: f64, rho0: f64, r_gas: f64, t0: f64) -> f64 {
    kn * length * rho0 * r_gas * t0 * PI.sqrt() / (2.0 * (2.0 * r_gas * t0).sqrt())
}

/// Hard-sphere mean free path `(μ/P)·√(πRT/2)`.
pub fn mean_free_path(mu: f64, pressure: f64, r_gas: f64, t: f64) -> f64 {
    mu / pressure * (PI * r_gas * t / 2.0).sqrt()
}

/// Plate of height `D = 1` and thickness `D/10` in a periodic channel; the
/// right face is twice as hot as the left. Nondimensional: `R = T₀ = ρ₀ = 1`.
pub fn plates_scenario(kn: f64, res: Resolution) -> Result<ScenarioSpec> {
    if !(kn > 0.0) {
        return Err(Error::config("Knudsen number must be positive"));
    }
    let (d, r_gas, t0, rho0) = (1.0, 1.0, 1.0, 1.0);
    let grid = SpaceGrid::new(Vec2::zeros(), Vec2::new(4.0 * d, 2.0 * d), res.nx, res.ny)?;
    let mu = viscosity_from_knudsen(kn, d, rho0, r_gas, t0);
    let gas = GasModel::bgk(r_gas, RelaxationLaw::MuOverRhoRT0, mu, 0.5, t0, rho0)?;
    let plate = Component::solid(
        Shape::rect(Vec2::zeros(), Vec2::new(0.05 * d, 0.5 * d), 0.0),
        WallTemperature::TwoSided {
            hot: 2.0 * t0,
            cold: t0,
            axis: Vec2::new(1.0, 0.0),
        },
    );
    let state = RigidBodyState::new(
        Vec2::new(2.0 * d, 0.0),
        0.5 * rho0 * d * d,
        0.0,
        MotionMode::FreeTranslationAlong(Vec2::new(1.0, 0.0)),
    )?;
    let body = Body::new("plate", vec![plate], state).with_period_x(4.0 * d);
    let boundaries = DomainBoundaries {
        left: DomainBc::Periodic,
        right: DomainBc::Periodic,
        bottom: DomainBc::Specular,
        top: DomainBc::DiffuseWall {
            temperature: t0,
            velocity: Vec2::zeros(),
        },
    };
    let spec = ScenarioSpec {
        name: "plates".into(),
        grid,
        vgrid: default_velocity_grid(r_gas, 2.0 * t0, 0.0, res.nv)?,
        gas,
        boundaries,
        bodies: vec![body],
        rho0,
        u0: Vec2::zeros(),
        t0,
        solver: SolverConfig::default(),
        end: EndCondition::Steps(1000),
        output_every: 10,
        probes: Vec::new(),
        tracked_body: Some(0),
    };
    spec.validate()?;
    Ok(spec)
}

/// Four vanes of length 0.1 m and thickness 0.01 m on a free rotor inside a
/// cylinder of radius 0.2 m, argon at Kn ≈ 0.1 based on the vane length.
pub fn crookes2d_scenario(res: Resolution) -> Result<ScenarioSpec> {
    let (t0, t_hot, t_cold) = (300.0, 400.0, 350.0);
    let (vane_len, vane_thick, radius) = (0.1, 0.01, 0.2);
    let (mu, omega, rho0) = (1.678e-5, 0.68, 8.582e-6);
    let half = radius + 0.01;
    let grid = SpaceGrid::new(
        Vec2::new(-half, -half),
        Vec2::new(half, half),
        res.nx,
        res.ny,
    )?;
    let gas = GasModel::shakhov(
        R_ARGON,
        2.0 / 3.0,
        RelaxationLaw::ViscosityPowerLaw,
        mu,
        omega,
        t0,
        rho0,
    )?;
    let mut vanes: Vec<Component> = (0..4)
        .map(|k| {
            let angle = k as f64 * FRAC_PI_2;
            let dir = Vec2::new(angle.cos(), angle.sin());
            Component::solid(
                Shape::rect(
                    dir * (0.5 * vane_len),
                    Vec2::new(0.5 * vane_len, 0.5 * vane_thick),
                    angle,
                ),
                WallTemperature::TwoSided {
                    hot: t_hot,
                    cold: t_cold,
                    axis: Vec2::new(0.0, 1.0),
                },
            )
        })
        .collect();
    // The vanes alone give φ = 0 on the axis.
    vanes.push(Component::solid(
        Shape::rect(
            Vec2::zeros(),
            Vec2::new(0.5 * vane_thick, 0.5 * vane_thick),
            0.0,
        ),
        WallTemperature::Uniform(t_cold),
    ));
    let rotor = Body::new(
        "vanes",
        vanes,
        RigidBodyState::new(Vec2::zeros(), 1.0, 4.9e-9, MotionMode::FreeRotationOnly)?,
    );
    let globe = Body::new(
        "globe",
        vec![Component::exterior(
            vec![Shape::circle(Vec2::zeros(), radius)],
            WallTemperature::Uniform(t0),
        )],
        RigidBodyState::fixed(Vec2::zeros()),
    );
    let wall = DomainBc::DiffuseWall {
        temperature: t0,
        velocity: Vec2::zeros(),
    };
    let spec = ScenarioSpec {
        name: "crookes2d".into(),
        grid,
        vgrid: default_velocity_grid(R_ARGON, t_hot, 0.0, res.nv)?,
        gas,
        boundaries: DomainBoundaries::uniform(wall),
        bodies: vec![rotor, globe],
        rho0,
        u0: Vec2::zeros(),
        t0,
        solver: SolverConfig::default(),
        end: EndCondition::Steps(500),
        output_every: 10,
        probes: Vec::new(),
        tracked_body: Some(0),
    };
    spec.validate()?;
    Ok(spec)
}

/// Lobe outline convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobeProfile {
    /// The parametrisation with `sin(5θ)` and `sin(3θ)` in the x component.
    Printed,
    /// Textbook epicycloid/hypocycloid with cosines in the x component.
    Standard,
}

/// Point of the printed two-lobe profile for generating-circle radius `r`.
pub fn lobe_profile(theta: f64, r: f64) -> Vec2 {
    lobe_profile_with(theta, r, LobeProfile::Printed)
}

/// Epicycloid arcs cover `[−π, −π/2] ∪ [0, π/2]`, hypocycloid arcs the rest.
pub fn lobe_profile_with(theta: f64, r: f64, profile: LobeProfile) -> Vec2 {
    let epi = (-PI..=-FRAC_PI_2).contains(&theta) || (0.0..=FRAC_PI_2).contains(&theta);
    let (s, c) = theta.sin_cos();
    match (epi, profile) {
        (true, LobeProfile::Printed) => Vec2::new(
            5.0 * r * c - r * (5.0 * theta).sin(),
            5.0 * r * s - r * (5.0 * theta).sin(),
        ),
        (true, LobeProfile::Standard) => Vec2::new(
            5.0 * r * c - r * (5.0 * theta).cos(),
            5.0 * r * s - r * (5.0 * theta).sin(),
        ),
        (false, LobeProfile::Printed) => Vec2::new(
            3.0 * r * c + r * (3.0 * theta).sin(),
            3.0 * r * s - r * (3.0 * theta).sin(),
        ),
        (false, LobeProfile::Standard) => Vec2::new(
            3.0 * r * c + r * (3.0 * theta).cos(),
            3.0 * r * s - r * (3.0 * theta).sin(),
        ),
    }
}

/// Closed polygon through `n` samples of the lobe profile.
pub fn lobe_polygon(r: f64, profile: LobeProfile, n: usize) -> Polygon {
    let vertices = (0..n)
        .map(|k| lobe_profile_with(-PI + 2.0 * PI * k as f64 / n as f64, r, profile))
        .collect();
    Polygon::new(vertices)
}

fn rotated(poly: &Polygon, angle: f64, shift: Vec2) -> Vec<Vec2> {
    let (s, c) = angle.sin_cos();
    poly.vertices()
        .iter()
        .map(|v| Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y) + shift)
        .collect()
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Smallest distance between two counter-rotating lobes centred at
/// `(0, ±c)` over `samples` rotation angles in `[0, π)`.
pub fn min_lobe_gap(poly: &Polygon, c: f64, samples: usize) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..samples {
        let a = PI * k as f64 / samples as f64;
        let top = rotated(poly, -a, Vec2::new(0.0, c));
        let bottom = rotated(poly, a, Vec2::new(0.0, -c));
        let n = bottom.len();
        for &p in &top {
            for j in 0..n {
                best = best.min(point_segment_distance(p, bottom[j], bottom[(j + 1) % n]));
            }
        }
    }
    best
}

/// Half distance between rotor centres giving minimum lobe gap `gap`.
pub fn rotor_half_spacing(r: f64, profile: LobeProfile, gap: f64) -> f64 {
    let poly = lobe_polygon(r, profile, 256);
    let r_max = poly.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, r_max + gap);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if min_lobe_gap(&poly, mid, 48) < gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootsOptions {
    /// Generating-circle radius `r` of the lobe profile.
    pub lobe_radius: f64,
    /// Minimum distance between the lobes and between lobes and casing.
    pub gap: f64,
    pub profile: LobeProfile,
    /// Rotor angular speed magnitude, rad/s.
    pub speed: f64,
    /// Segments per lobe polygon.
    pub segments: usize,
}

impl Default for RootsOptions {
    fn default() -> Self {
        Self {
            lobe_radius: 0.034,
            gap: 0.016,
            profile: LobeProfile::Standard,
            speed: 200.0,
            segments: 512,
        }
    }
}

/// Two-lobe Roots blower: rotors stacked vertically in a figure-eight
/// casing, inlet port on the left, outlet port on the right.
pub fn roots_blower_scenario(res: Resolution) -> Result<ScenarioSpec> {
    roots_blower_with(res, RootsOptions::default())
}

pub fn roots_blower_with(res: Resolution, opts: RootsOptions) -> Result<ScenarioSpec> {
    let (t0, p0) = (300.0, 1e5);
    let rho0 = p0 / (R_ARGON * t0);
    let (mu, omega) = (2.117e-5, 0.81);
    let grid = SpaceGrid::new(Vec2::new(-0.4, -0.4), Vec2::new(0.4, 0.4), res.nx, res.ny)?;
    let gas = GasModel::bgk(
        R_ARGON,
        RelaxationLaw::ViscosityPowerLaw,
        mu,
        omega,
        t0,
        rho0,
    )?;

    let poly = lobe_polygon(opts.lobe_radius, opts.profile, opts.segments);
    let r_max = poly.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let c = rotor_half_spacing(opts.lobe_radius, opts.profile, opts.gap);
    let chamber = r_max + opts.gap;
    if c + chamber > 0.4 {
        return Err(Error::config(format!(
            "rotors of radius {r_max:.4} m with gap {:.4} m do not fit in the pump domain",
            opts.gap
        )));
    }
    let port = 0.5 * c;
    let wall = WallTemperature::Uniform(t0);
    let rotor = |name: &str, y: f64, angular: f64| -> Result<Body> {
        let state = RigidBodyState::new(
            Vec2::new(0.0, y),
            1.0,
            1.0,
            MotionMode::Prescribed {
                velocity: Vec2::zeros(),
                angular,
            },
        )?;
        Ok(Body::new(
            name,
            vec![Component::solid(Shape::Polygon(poly.clone()), wall)],
            state,
        ))
    };
    let casing = Body::new(
        "casing",
        vec![Component::exterior(
            vec![
                Shape::circle(Vec2::new(0.0, c), chamber),
                Shape::circle(Vec2::new(0.0, -c), chamber),
                Shape::rect(Vec2::zeros(), Vec2::new(0.5, port), 0.0),
            ],
            wall,
        )],
        RigidBodyState::fixed(Vec2::zeros()),
    );
    let bodies = vec![
        rotor("upper_rotor", c, -opts.speed)?,
        rotor("lower_rotor", -c, opts.speed)?,
        casing,
    ];
    let diffuse = DomainBc::DiffuseWall {
        temperature: t0,
        velocity: Vec2::zeros(),
    };
    let boundaries = DomainBoundaries {
        left: DomainBc::NeumannCopy,
        right: DomainBc::MaxwellianInflow {
            rho: rho0,
            velocity: Vec2::zeros(),
            temperature: t0,
        },
        bottom: diffuse,
        top: diffuse,
    };
    let speed = opts.speed * r_max;
    // Mean pressure along the inlet and outlet boundaries: the first and
    // last cell columns.
    let probes = vec![
        Probe {
            name: "p_inlet".into(),
            lo: grid.x_min,
            hi: Vec2::new(grid.x_min.x + grid.dx, grid.x_max.y),
        },
        Probe {
            name: "p_outlet".into(),
            lo: Vec2::new(grid.x_max.x - grid.dx, grid.x_min.y),
            hi: grid.x_max,
        },
    ];
    let spec = ScenarioSpec {
        name: "roots_blower".into(),
        grid,
        vgrid: default_velocity_grid(R_ARGON, t0, speed, res.nv)?,
        gas,
        boundaries,
        bodies,
        rho0,
        u0: Vec2::zeros(),
        t0,
        solver: SolverConfig {
            integrator: Integrator::SemiImplicit,
            cfl: CflMode::Relaxed { c: 0.5 },
        },
        end: EndCondition::Steps(2000),
        output_every: 10,
        probes,
        tracked_body: Some(0),
    };
    spec.validate()?;
    Ok(spec)
}

/// Scenario by name with its default parameters.
pub fn scenario_by_name(name: &str, res: Resolution, kn: Option<f64>) -> Result<ScenarioSpec> {
    match name {
        "plates" => plates_scenario(kn.unwrap_or(0.5), res),
        "crookes2d" => crookes2d_scenario(res),
        "roots_blower" => roots_blower_scenario(res),
        other => Err(Error::config(format!(
            "unknown scenario '{other}'; available: {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

/// Default resolution of each scenario.
pub fn default_resolution(name: &str) -> Option<Resolution> {
    match name {
        "plates" => Some(Resolution {
            nx: 100,
            ny: 50,
            nv: 16,
        }),
        "crookes2d" => Some(Resolution {
            nx: 100,
            ny: 100,
            nv: 16,
        }),
        "roots_blower" => Some(Resolution {
            nx: 100,
            ny: 100,
            nv: 16,
        }),
        _ => None,
    }
}
