#![allow(dead_code)]

use cutcell_kinetic::geometry::{virtual_cell_geometry, VirtualCellGeom};
use cutcell_kinetic::Vec2;

pub const UNIT_CORNERS: [Vec2; 4] = [
    Vec2::new(0.0, 0.0),
    Vec2::new(1.0, 0.0),
    Vec2::new(1.0, 1.0),
    Vec2::new(0.0, 1.0),
];

/// Half-plane `{x : n·(x − p) > 0}` as an affine level set.
#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub point: Vec2,
}

impl HalfPlane {
    pub fn from_angle(angle: f64, point: Vec2) -> Self {
        Self {
            normal: Vec2::new(angle.cos(), angle.sin()),
            point,
        }
    }

    pub fn level(&self, x: Vec2) -> f64 {
        self.normal.dot(&(x - self.point))
    }
}

/// Sutherland–Hodgman clip of a convex polygon against `level ≥ 0`.
pub fn clip(poly: &[Vec2], hp: &HalfPlane) -> Vec<Vec2> {
    let mut out = Vec::new();
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (da, db) = (hp.level(a), hp.level(b));
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(a + (b - a) * (da / (da - db)));
        }
    }
    out
}

pub fn shoelace(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

/// Exact gas length of the segment `a→b` inside the half-plane.
pub fn clipped_length(a: Vec2, b: Vec2, hp: &HalfPlane) -> f64 {
    let seg = clip(&[a, b], hp);
    match seg.len() {
        2 => (seg[1] - seg[0]).norm(),
        3 => {
            let mut pts = seg;
            pts.dedup();
            if pts.len() >= 2 {
                (pts[1] - pts[0]).norm()
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

pub struct ExactCut {
    pub area: f64,
    /// `(x+, x−, y+, y−)`
    pub edges: [f64; 4],
}

pub fn exact_unit_cut(hp: &HalfPlane) -> ExactCut {
    let c = UNIT_CORNERS;
    ExactCut {
        area: shoelace(&clip(&c, hp)),
        edges: [
            clipped_length(c[1], c[2], hp),
            clipped_length(c[0], c[3], hp),
            clipped_length(c[3], c[2], hp),
            clipped_length(c[0], c[1], hp),
        ],
    }
}

pub fn unit_cell_geometry(hp: &HalfPlane) -> VirtualCellGeom {
    let phi = UNIT_CORNERS.map(|p| hp.level(p));
    virtual_cell_geometry(phi, UNIT_CORNERS).expect("a half-plane cuts a cell at most twice")
}

/// `|a − b| ≤ tol·max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}
