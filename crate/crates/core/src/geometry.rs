//! Planar polygon helpers in the (P, Q) plane.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PqPoint {
    pub p_mw: f64,
    pub q_mvar: f64,
}

impl PqPoint {
    pub fn new(p_mw: f64, q_mvar: f64) -> Self {
        PqPoint { p_mw, q_mvar }
    }

    pub fn neg(self) -> Self {
        PqPoint::new(-self.p_mw, -self.q_mvar)
    }

    pub fn dist(self, other: PqPoint) -> f64 {
        (self.p_mw - other.p_mw).hypot(self.q_mvar - other.q_mvar)
    }
}

/// Shoelace area, positive for counterclockwise vertex order.
pub fn signed_area(vertices: &[PqPoint]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a.p_mw * b.q_mvar - b.p_mw * a.q_mvar;
    }
    0.5 * twice
}

pub fn area(vertices: &[PqPoint]) -> f64 {
    signed_area(vertices).abs()
}

fn closest_on_segment(p: PqPoint, a: PqPoint, b: PqPoint) -> PqPoint {
    let (dx, dy) = (b.p_mw - a.p_mw, b.q_mvar - a.q_mvar);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.p_mw - a.p_mw) * dx + (p.q_mvar - a.q_mvar) * dy) / len2).clamp(0.0, 1.0);
    PqPoint::new(a.p_mw + t * dx, a.q_mvar + t * dy)
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(p: PqPoint, vertices: &[PqPoint]) -> f64 {
    project_to_boundary(p, vertices).dist(p)
}

pub fn project_to_boundary(p: PqPoint, vertices: &[PqPoint]) -> PqPoint {
    let n = vertices.len();
    let mut best = vertices.first().copied().unwrap_or(p);
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let c = closest_on_segment(p, vertices[i], vertices[(i + 1) % n]);
        let d = c.dist(p);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Even-odd containment; points within `tol` of the boundary count as inside.
pub fn contains(vertices: &[PqPoint], p: PqPoint, tol: f64) -> bool {
    let n = vertices.len();
    if n == 0 {
        return false;
    }
    if boundary_distance(p, vertices) <= tol {
        return true;
    }
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.q_mvar > p.q_mvar) != (b.q_mvar > p.q_mvar) {
            let x = a.p_mw + (p.q_mvar - a.q_mvar) * (b.p_mw - a.p_mw) / (b.q_mvar - a.q_mvar);
            if p.p_mw < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Nearest point of the closed polygon region to `p`.
pub fn project(vertices: &[PqPoint], p: PqPoint) -> PqPoint {
    if contains(vertices, p, 0.0) {
        p
    } else {
        project_to_boundary(p, vertices)
    }
}

/// Range of Q over the polygon's vertical cut at active power `p`.
pub fn q_range_at(vertices: &[PqPoint], p: f64) -> Option<(f64, f64)> {
    let n = vertices.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let (pmin, pmax) = (a.p_mw.min(b.p_mw), a.p_mw.max(b.p_mw));
        if p < pmin || p > pmax {
            continue;
        }
        if a.p_mw == b.p_mw {
            lo = lo.min(a.q_mvar.min(b.q_mvar));
            hi = hi.max(a.q_mvar.max(b.q_mvar));
        } else {
            let t = (p - a.p_mw) / (b.p_mw - a.p_mw);
            let q = a.q_mvar + t * (b.q_mvar - a.q_mvar);
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// (p_min, p_max, q_min, q_max) of the vertex set.
pub fn bounding_box(vertices: &[PqPoint]) -> (f64, f64, f64, f64) {
    vertices.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), v| {
            (
                a.min(v.p_mw),
                b.max(v.p_mw),
                c.min(v.q_mvar),
                d.max(v.q_mvar),
            )
        },
    )
}

fn orient(a: PqPoint, b: PqPoint, c: PqPoint) -> f64 {
    (b.p_mw - a.p_mw) * (c.q_mvar - a.q_mvar) - (b.q_mvar - a.q_mvar) * (c.p_mw - a.p_mw)
}

fn segments_cross(a: PqPoint, b: PqPoint, c: PqPoint, d: PqPoint) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    (d1 > 0.0) != (d2 > 0.0)
        && (d3 > 0.0) != (d4 > 0.0)
        && d1 != 0.0
        && d2 != 0.0
        && d3 != 0.0
        && d4 != 0.0
}

/// No two non-adjacent edges properly cross. Touching edges are tolerated so
/// that collapsed (zero-extent) rays remain valid.
pub fn is_simple(vertices: &[PqPoint]) -> bool {
    let n = vertices.len();
    if n < 4 {
        return true;
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
