//! Analytic solid shapes and their signed distance functions.
//!
//! Distances are negative inside the solid. Shapes live in a body frame;
//! `Body` in the scene module maps world points into that frame.

use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// Rectangle with half extents `half` along its own axes, rotated by
    /// `angle` about `center`.
    Rect {
        center: Vec2,
        half: Vec2,
        angle: f64,
    },
    Polygon(Polygon),
}

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

impl Shape {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        Shape::Circle { center, radius }
    }

    pub fn rect(center: Vec2, half: Vec2, angle: f64) -> Self {
        Shape::Rect {
            center,
            half,
            angle,
        }
    }

    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.signed_distance_banded(p, f64::INFINITY)
    }

    /// Signed distance that is exact within `band` of the boundary. Further
    /// away the sign is exact and the magnitude is at least `band`.
    pub fn signed_distance_banded(&self, p: Vec2, band: f64) -> f64 {
        match self {
            Shape::Circle { center, radius } => (p - center).norm() - radius,
            Shape::Rect {
                center,
                half,
                angle,
            } => {
                let q = rotate(p - center, -angle);
                let d = Vec2::new(q.x.abs() - half.x, q.y.abs() - half.y);
                let outside = Vec2::new(d.x.max(0.0), d.y.max(0.0)).norm();
                outside + d.x.max(d.y).min(0.0)
            }
            Shape::Polygon(poly) => poly.signed_distance_banded(p, band),
        }
    }

    /// Point in the shape's own frame used by two-sided wall temperatures:
    /// the rectangle frame for `Rect`, unchanged otherwise.
    pub fn local(&self, p: Vec2) -> Vec2 {
        match self {
            Shape::Rect { center, angle, .. } => rotate(p - center, -angle),
            _ => p,
        }
    }

    /// Largest distance from the origin to a point of the shape.
    pub fn extent(&self) -> f64 {
        match self {
            Shape::Circle { center, radius } => center.norm() + radius,
            Shape::Rect { center, half, .. } => center.norm() + half.norm(),
            Shape::Polygon(poly) => poly.r_out,
        }
    }
}

/// Simple closed polygon, vertices in either orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    r_out: f64,
    /// Radius of a disc about the origin contained in the polygon, or 0.
    r_in: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        let r_out = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut poly = Self {
            vertices,
            r_out,
            r_in: 0.0,
        };
        if poly.contains(Vec2::zeros()) {
            poly.r_in = poly.boundary_distance(Vec2::zeros());
        }
        poly
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Even-odd ray casting along +x.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn boundary_distance(&self, p: Vec2) -> f64 {
        self.segments()
            .map(|(a, b)| {
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                (p - (a + ab * t)).norm_squared()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    pub fn signed_distance_banded(&self, p: Vec2, band: f64) -> f64 {
        let r = p.norm();
        if r - self.r_out >= band {
            return r - self.r_out;
        }
        if self.r_in - r >= band {
            return r - self.r_in;
        }
        let d = self.boundary_distance(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Shoelace area, positive for counter-clockwise vertices.
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .segments()
            .map(|(a, b)| a.x * b.y - a.y * b.x)
            .sum::<f64>()
    }

    /// True if no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let orient = |a: Vec2, b: Vec2, c: Vec2| (b - a).perp(&(c - a));
        let cross = |(a, b): (Vec2, Vec2), (c, d): (Vec2, Vec2)| {
            let d1 = orient(c, d, a);
            let d2 = orient(c, d, b);
            let d3 = orient(a, b, c);
            let d4 = orient(a, b, d);
            d1 * d2 < 0.0 && d3 * d4 < 0.0
        };
        let segs: Vec<_> = self.segments().collect();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if cross(segs[i], segs[j]) {
                    return false;
                }
            }
        }
        true
    }
}

/// Temperature assigned to the surface of one solid component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallTemperature {
    Uniform(f64),
    /// Hot where the shape-local coordinate along `axis` is non-negative.
    TwoSided {
        hot: f64,
        cold: f64,
        axis: Vec2,
    },
}

impl WallTemperature {
    pub fn at(&self, local: Vec2) -> f64 {
        match *self {
            WallTemperature::Uniform(t) => t,
            WallTemperature::TwoSided { hot, cold, axis } => {
                if local.dot(&axis) >= 0.0 {
                    hot
                } else {
                    cold
                }
            }
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            WallTemperature::Uniform(t) => t,
            WallTemperature::TwoSided { hot, cold, .. } => hot.max(cold),
        }
    }
}

/// Which side of the shapes is solid.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// The shape itself is solid.
    Solid(Shape),
    /// Everything outside the union of the shapes is solid.
    Exterior(Vec<Shape>),
}

/// One solid piece of a body with its wall temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub region: Region,
    pub temperature: WallTemperature,
}

impl Component {
    pub fn solid(shape: Shape, temperature: WallTemperature) -> Self {
        Self {
            region: Region::Solid(shape),
            temperature,
        }
    }

    pub fn exterior(shapes: Vec<Shape>, temperature: WallTemperature) -> Self {
        Self {
            region: Region::Exterior(shapes),
            temperature,
        }
    }

    pub fn level(&self, p: Vec2, band: f64) -> f64 {
        match &self.region {
            Region::Solid(shape) => shape.signed_distance_banded(p, band),
            Region::Exterior(shapes) => -shapes
                .iter()
                .map(|s| s.signed_distance_banded(p, band))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn wall_temperature(&self, p: Vec2) -> f64 {
        let local = match &self.region {
            Region::Solid(shape) => shape.local(p),
            Region::Exterior(_) => p,
        };
        self.temperature.at(local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn circle_distance() {
        let c = Shape::circle(Vec2::new(1.0, 0.0), 0.5);
        assert_relative_eq!(c.signed_distance(Vec2::new(1.0, 0.0)), -0.5);
        assert_relative_eq!(c.signed_distance(Vec2::new(3.0, 0.0)), 1.5);
    }

    #[test]
    fn rect_distance_with_rotation() {
        let r = Shape::rect(Vec2::zeros(), Vec2::new(1.0, 0.1), FRAC_PI_2);
        assert_relative_eq!(
            r.signed_distance(Vec2::new(0.0, 0.5)),
            -0.1,
            epsilon = 1e-15
        );
        assert_relative_eq!(r.signed_distance(Vec2::new(0.3, 0.0)), 0.2, epsilon = 1e-15);
        // Corner region: distance to the corner point (0.1, 1.0).
        assert_relative_eq!(r.signed_distance(Vec2::new(0.4, 1.4)), 0.5, epsilon = 1e-15);
    }

    fn square() -> Polygon {
        Polygon::new(vec![
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ])
    }

    #[test]
    fn polygon_matches_rect() {
        let poly = square();
        let rect = Shape::rect(Vec2::zeros(), Vec2::new(1.0, 1.0), 0.0);
        for &(x, y) in &[
            (0.2, 0.3),
            (1.5, 0.0),
            (2.0, 2.0),
            (-0.9, 0.95),
            (0.0, -3.0),
        ] {
            let p = Vec2::new(x, y);
            assert_relative_eq!(
                poly.signed_distance_banded(p, f64::INFINITY),
                rect.signed_distance(p),
                epsilon = 1e-14
            );
        }
        assert_relative_eq!(poly.signed_area(), 4.0);
        assert!(poly.is_simple());
    }

    #[test]
    fn banded_distance_keeps_sign_and_bound() {
        let poly = square();
        let p = Vec2::new(10.0, 0.0);
        let d = poly.signed_distance_banded(p, 1.0);
        assert!((1.0..=9.0).contains(&d));
        let near = Vec2::new(1.2, 0.0);
        assert_relative_eq!(poly.signed_distance_banded(near, 1.0), 0.2, epsilon = 1e-14);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let poly = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(!poly.is_simple());
    }

    #[test]
    fn exterior_component() {
        let casing = Component::exterior(
            vec![Shape::circle(Vec2::zeros(), 1.0)],
            WallTemperature::Uniform(300.0),
        );
        assert!(casing.level(Vec2::zeros(), 1.0) > 0.0);
        assert!(casing.level(Vec2::new(2.0, 0.0), 1.0) < 0.0);
    }

    #[test]
    fn two_sided_temperature_ties_go_hot() {
        let t = WallTemperature::TwoSided {
            hot: 2.0,
            cold: 1.0,
            axis: Vec2::new(1.0, 0.0),
        };
        assert_eq!(t.at(Vec2::new(0.0, 0.4)), 2.0);
        assert_eq!(t.at(Vec2::new(-1e-9, 0.4)), 1.0);
        assert_eq!(t.at(Vec2::new(0.05, 0.0)), 2.0);
        assert_eq!(t.max(), 2.0);
    }
}
