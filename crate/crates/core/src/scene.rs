//! Rigid bodies built from shape components, and the composite level set of
//! all bodies in the domain.

use crate::geometry::{sample_levelset, LevelSetField, SpaceGrid};
use crate::rigid_body::RigidBodyState;
use crate::shapes::Component;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    /// Components in the body frame (origin at the centre of mass, angle 0).
    pub components: Vec<Component>,
    pub state: RigidBodyState,
    /// Period of the x direction when the domain wraps.
    pub period_x: Option<f64>,
}

impl Body {
    pub fn new(name: impl Into<String>, components: Vec<Component>, state: RigidBodyState) -> Self {
        Self {
            name: name.into(),
            components,
            state,
            period_x: None,
        }
    }

    pub fn with_period_x(mut self, period: f64) -> Self {
        self.period_x = Some(period);
        self
    }

    /// World point in the body frame for the pose in `state`.
    pub fn to_local(&self, state: &RigidBodyState, p: Vec2) -> Vec2 {
        let mut d = p - state.x_c;
        if let Some(period) = self.period_x {
            d.x -= period * (d.x / period).round();
        }
        let (s, c) = state.theta.sin_cos();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Level set at `p` for the body posed at `state`, with index of the
    /// closest component.
    pub fn level_with_component(&self, state: &RigidBodyState, p: Vec2, band: f64) -> (f64, usize) {
        let local = self.to_local(state, p);
        self.components
            .iter()
            .enumerate()
            .map(|(k, comp)| (comp.level(local, band), k))
            .fold(
                (f64::INFINITY, 0),
                |best, cur| if cur.0 < best.0 { cur } else { best },
            )
    }

    pub fn wall_temperature(&self, state: &RigidBodyState, p: Vec2, band: f64) -> f64 {
        let (_, k) = self.level_with_component(state, p, band);
        self.components[k].wall_temperature(self.to_local(state, p))
    }

    /// Largest distance from the centre of mass to any surface point.
    pub fn extent(&self) -> f64 {
        use crate::shapes::Region;
        self.components
            .iter()
            .filter_map(|c| match &c.region {
                Region::Solid(s) => Some(s.extent()),
                Region::Exterior(_) => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn max_wall_temperature(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.temperature.max())
            .fold(0.0, f64::max)
    }
}

/// Composite level set `φ = min_b φ_b` over bodies at given poses.
#[derive(Debug, Clone, Copy)]
pub struct ScenePose<'a> {
    pub bodies: &'a [Body],
    pub states: &'a [RigidBodyState],
    pub band: f64,
}

impl ScenePose<'_> {
    pub fn level(&self, p: Vec2) -> f64 {
        self.owner(p).1
    }

    /// Index of the body closest to `p` and the level-set value there.
    pub fn owner(&self, p: Vec2) -> (usize, f64) {
        self.bodies
            .iter()
            .zip(self.states)
            .enumerate()
            .map(|(b, (body, state))| (b, body.level_with_component(state, p, self.band).0))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
    }

    pub fn sample(&self, grid: &SpaceGrid, periodic_x: bool) -> LevelSetField {
        if self.bodies.is_empty() {
            return sample_levelset(|_| 1.0, grid, periodic_x);
        }
        sample_levelset(|p| self.level(p), grid, periodic_x)
    }
}

/// Distance from the boundary within which level-set values are exact.
pub fn exact_band(grid: &SpaceGrid) -> f64 {
    4.0 * grid.dx.max(grid.dy)
}
