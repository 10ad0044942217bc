//! Rigid-body state, wall stress from the gas, and the discrete Newton laws.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::velocity_space::VelocityGrid;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionMode {
    Free,
    FreeRotationOnly,
    FreeTranslationOnly,
    /// Translation restricted to a fixed unit direction, no rotation.
    FreeTranslationAlong(Vec2),
    /// Imposed constant velocities; forces are never read.
    Prescribed {
        velocity: Vec2,
        angular: f64,
    },
}

impl MotionMode {
    pub fn is_prescribed(&self) -> bool {
        matches!(self, MotionMode::Prescribed { .. })
    }

    /// A body held in place.
    pub fn fixed() -> Self {
        MotionMode::Prescribed {
            velocity: Vec2::zeros(),
            angular: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    pub x_c: Vec2,
    pub theta: f64,
    pub u_c: Vec2,
    pub theta_dot: f64,
    pub mass: f64,
    pub inertia: f64,
    pub mode: MotionMode,
}

impl RigidBodyState {
    /// Body at rest at `x_c` with the given inertial data. Prescribed modes
    /// start at their imposed velocities.
    pub fn new(x_c: Vec2, mass: f64, inertia: f64, mode: MotionMode) -> Result<Self> {
        let mut state = Self {
            x_c,
            theta: 0.0,
            u_c: Vec2::zeros(),
            theta_dot: 0.0,
            mass,
            inertia,
            mode,
        };
        if let MotionMode::Prescribed { velocity, angular } = mode {
            state.u_c = velocity;
            state.theta_dot = angular;
        }
        state.validate()?;
        Ok(state)
    }

    pub fn fixed(x_c: Vec2) -> Self {
        Self {
            x_c,
            theta: 0.0,
            u_c: Vec2::zeros(),
            theta_dot: 0.0,
            mass: 1.0,
            inertia: 1.0,
            mode: MotionMode::fixed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let translates = matches!(
            self.mode,
            MotionMode::Free
                | MotionMode::FreeTranslationOnly
                | MotionMode::FreeTranslationAlong(_)
        );
        let rotates = matches!(self.mode, MotionMode::Free | MotionMode::FreeRotationOnly);
        if translates && !(self.mass > 0.0) {
            return Err(Error::config("a translating body needs a positive mass"));
        }
        if rotates && !(self.inertia > 0.0) {
            return Err(Error::config(
                "a rotating body needs a positive moment of inertia",
            ));
        }
        if let MotionMode::FreeTranslationAlong(axis) = self.mode {
            if (axis.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::config("translation axis must be a unit vector"));
            }
        }
        Ok(())
    }

    /// `u_w(r) = u_c + θ̇ (r − x_c)^⊥` with `(a, b)^⊥ = (−b, a)`.
    pub fn wall_velocity(&self, r: Vec2) -> Vec2 {
        let d = r - self.x_c;
        self.u_c + self.theta_dot * Vec2::new(-d.y, d.x)
    }

    /// Position update with the current velocities.
    pub fn advance_pose(&mut self, dt: f64) {
        self.x_c += dt * self.u_c;
        self.theta += dt * self.theta_dot;
    }

    /// Velocity update from the gas force and torque; a no-op for prescribed
    /// motion.
    pub fn advance_velocity(&mut self, force: Vec2, torque: f64, dt: f64) {
        match self.mode {
            MotionMode::Prescribed { .. } => {}
            MotionMode::Free => {
                self.u_c += dt * force / self.mass;
                self.theta_dot += dt * torque / self.inertia;
            }
            MotionMode::FreeRotationOnly => self.theta_dot += dt * torque / self.inertia,
            MotionMode::FreeTranslationOnly => self.u_c += dt * force / self.mass,
            MotionMode::FreeTranslationAlong(axis) => {
                self.u_c += axis * (dt * force.dot(&axis) / self.mass)
            }
        }
    }

    /// Pose then velocity, in that order.
    pub fn advance(&mut self, force: Vec2, torque: f64, dt: f64) {
        self.advance_pose(dt);
        self.advance_velocity(force, torque, dt);
    }
}

/// Momentum flux tensor at a wall point: `f_w` on incoming velocities
/// (`(v − u_w)·n_w < 0`), the gas row `f` on the others.
pub fn wall_stress(
    f: &[f64],
    f_w: &[f64],
    grid: &VelocityGrid,
    u_w: Vec2,
    n_w: Vec2,
) -> Matrix2<f64> {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, v) in grid.nodes().iter().enumerate() {
        let c = v - u_w;
        let val = if c.dot(&n_w) < 0.0 { f_w[p] } else { f[p] };
        sxx += c.x * c.x * val;
        sxy += c.x * c.y * val;
        syy += c.y * c.y * val;
    }
    let w = grid.weight();
    Matrix2::new(sxx * w, sxy * w, sxy * w, syy * w)
}

/// One wall element seen by a body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallElement {
    pub x_w: Vec2,
    pub n_w: Vec2,
    pub lw: f64,
    pub stress: Matrix2<f64>,
}

/// Net force and torque about `x_c`, summed in slice order.
pub fn force_and_torque(x_c: Vec2, elements: &[WallElement]) -> (Vec2, f64) {
    let mut force = Vec2::zeros();
    let mut torque = 0.0;
    for e in elements {
        let traction = e.stress * e.n_w * e.lw;
        force += traction;
        torque += (e.x_w - x_c).perp(&traction);
    }
    (force, torque)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity_space::reduced_maxwellian;
    use approx::assert_relative_eq;

    #[test]
    fn wall_velocity_rotation() {
        let mut s = RigidBodyState::fixed(Vec2::zeros());
        s.theta_dot = 2.0;
        assert_eq!(s.wall_velocity(Vec2::new(1.0, 0.0)), Vec2::new(0.0, 2.0));
        s.u_c = Vec2::new(0.3, -0.1);
        s.x_c = Vec2::new(0.5, 0.5);
        let r = Vec2::new(1.7, -0.2);
        let d = r - s.x_c;
        assert_relative_eq!(s.wall_velocity(r).dot(&d), s.u_c.dot(&d), epsilon = 1e-15);
    }

    #[test]
    fn uniform_motion_and_reversal() {
        let mut s = RigidBodyState::new(Vec2::new(1.0, 2.0), 1.0, 1.0, MotionMode::Free).unwrap();
        s.u_c = Vec2::new(1.0, 0.0);
        s.theta_dot = 0.7;
        let start = s.clone();
        s.advance(Vec2::zeros(), 0.0, 0.1);
        assert_relative_eq!(s.x_c, Vec2::new(1.1, 2.0), epsilon = 1e-15);
        assert_eq!(s.u_c, start.u_c);
        s.advance(Vec2::zeros(), 0.0, -0.1);
        assert_relative_eq!(s.x_c, start.x_c, max_relative = 1e-14);
        assert_relative_eq!(s.theta, start.theta, epsilon = 1e-14);
    }

    #[test]
    fn position_uses_old_velocity() {
        let mut s =
            RigidBodyState::new(Vec2::zeros(), 2.0, 1.0, MotionMode::FreeTranslationOnly).unwrap();
        s.advance(Vec2::new(4.0, 0.0), 10.0, 0.5);
        assert_eq!(s.x_c, Vec2::zeros());
        assert_eq!(s.u_c, Vec2::new(1.0, 0.0));
        assert_eq!(s.theta_dot, 0.0);
    }

    #[test]
    fn prescribed_ignores_forces() {
        let mode = MotionMode::Prescribed {
            velocity: Vec2::zeros(),
            angular: 200.0,
        };
        let mut s = RigidBodyState::new(Vec2::zeros(), 1.0, 1.0, mode).unwrap();
        s.advance(Vec2::new(1e9, 1e9), 1e9, 1e-3);
        assert_relative_eq!(s.theta, 0.2);
        assert_eq!(s.theta_dot, 200.0);
        assert_eq!(s.u_c, Vec2::zeros());
    }

    #[test]
    fn translation_along_axis() {
        let mode = MotionMode::FreeTranslationAlong(Vec2::new(1.0, 0.0));
        let mut s = RigidBodyState::new(Vec2::zeros(), 0.5, 0.0, mode).unwrap();
        s.advance_velocity(Vec2::new(1.0, 3.0), 5.0, 0.1);
        assert_relative_eq!(s.u_c, Vec2::new(0.2, 0.0));
        assert_eq!(s.theta_dot, 0.0);
    }

    #[test]
    fn invalid_inertia_rejected() {
        assert!(RigidBodyState::new(Vec2::zeros(), 0.0, 1.0, MotionMode::Free).is_err());
        assert!(
            RigidBodyState::new(Vec2::zeros(), 1.0, 0.0, MotionMode::FreeRotationOnly).is_err()
        );
        assert!(RigidBodyState::new(Vec2::zeros(), 0.0, 1.0, MotionMode::FreeRotationOnly).is_ok());
    }

    #[test]
    fn zero_distribution_zero_stress() {
        let grid = VelocityGrid::symmetric(Vec2::zeros(), Vec2::new(4.0, 4.0), 8).unwrap();
        let z = vec![0.0; grid.len()];
        let s = wall_stress(&z, &z, &grid, Vec2::zeros(), Vec2::new(1.0, 0.0));
        assert_eq!(s, Matrix2::zeros());
    }

    #[test]
    fn resting_wall_pressure() {
        let grid = VelocityGrid::symmetric(Vec2::zeros(), Vec2::new(6.0, 6.0), 32).unwrap();
        let mut m = vec![0.0; grid.len()];
        reduced_maxwellian(1.3, Vec2::zeros(), 0.9, 1.0, &grid, &mut m).unwrap();
        let n = Vec2::new(0.6, 0.8);
        let s = wall_stress(&m, &m, &grid, Vec2::zeros(), n);
        let p = 1.3 * 0.9;
        assert_relative_eq!(s[(0, 0)], p, max_relative = 1e-3);
        assert_relative_eq!(s[(1, 1)], p, max_relative = 1e-3);
        assert!(s[(0, 1)].abs() < 1e-3 * p);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn closed_surface_pressure_cancels() {
        let stress = Matrix2::identity() * 2.0;
        let elements: Vec<_> = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
            .iter()
            .map(|&(x, y)| WallElement {
                x_w: Vec2::new(x, y),
                n_w: -Vec2::new(x, y),
                lw: 1.0,
                stress,
            })
            .collect();
        let (f, t) = force_and_torque(Vec2::zeros(), &elements);
        assert_eq!(f, Vec2::zeros());
        assert_eq!(t, 0.0);
        assert_eq!(force_and_torque(Vec2::zeros(), &[]), (Vec2::zeros(), 0.0));
    }
}
