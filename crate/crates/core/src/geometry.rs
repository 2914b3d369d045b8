//! Planar helpers in degree space (lon as x, lat as y).

use crate::model::{LatLon, Polygon};

/// Ring without its closing vertex.
pub fn open_ring(ring: &[LatLon]) -> &[LatLon] {
    match ring {
        [first, .., last] if first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

/// Shoelace area in square degrees; positive when counter-clockwise.
pub fn signed_area_deg2(ring: &[LatLon]) -> f64 {
    let pts = open_ring(ring);
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    // Shift to the first vertex to keep the products small.
    let (x0, y0) = (pts[0].lon, pts[0].lat);
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        twice += (a.lon - x0) * (b.lat - y0) - (b.lon - x0) * (a.lat - y0);
    }
    0.5 * twice
}

/// Area centroid, falling back to the vertex mean for zero-area rings.
pub fn centroid(ring: &[LatLon]) -> LatLon {
    let pts = open_ring(ring);
    let n = pts.len();
    let mean = || {
        let (s_lat, s_lon) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lon));
        LatLon::new(s_lat / n as f64, s_lon / n as f64)
    };
    if n < 3 {
        return mean();
    }
    let (x0, y0) = (pts[0].lon, pts[0].lat);
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (ax, ay) = (pts[i].lon - x0, pts[i].lat - y0);
        let (bx, by) = (pts[(i + 1) % n].lon - x0, pts[(i + 1) % n].lat - y0);
        let cross = ax * by - bx * ay;
        a2 += cross;
        cx += (ax + bx) * cross;
        cy += (ay + by) * cross;
    }
    if a2 == 0.0 {
        return mean();
    }
    LatLon::new(y0 + cy / (3.0 * a2), x0 + cx / (3.0 * a2))
}

/// Even-odd crossing test. Boundary points may land on either side.
pub fn point_in_ring(p: LatLon, ring: &[LatLon]) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_in_polygon(p: LatLon, poly: &Polygon) -> bool {
    point_in_ring(p, &poly.exterior) && !poly.holes.iter().any(|h| point_in_ring(p, h))
}

fn orient(a: LatLon, b: LatLon, c: LatLon) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn on_segment(a: LatLon, b: LatLon, p: LatLon) -> bool {
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

/// Any shared point, including touching endpoints and collinear overlap.
pub fn segments_intersect(a: LatLon, b: LatLon, c: LatLon, d: LatLon) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Interiors cross at a single point (no touching, no collinear overlap).
pub fn segments_cross(a: LatLon, b: LatLon, c: LatLon, d: LatLon) -> bool {
    orient(a, b, c) * orient(a, b, d) < 0.0 && orient(c, d, a) * orient(c, d, b) < 0.0
}

/// Distance-free boundary test used to exclude boundary points from
/// interior checks.
pub fn point_on_ring(p: LatLon, ring: &[LatLon]) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    (0..n).any(|i| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        orient(a, b, p).abs() <= 1e-18 && on_segment(a, b, p)
    })
}

/// True when no two non-adjacent edges meet and adjacent edges only share
/// their common vertex.
pub fn ring_is_simple(ring: &[LatLon]) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared vertex is fine; folding back along the same line is not.
                let shared = if j == i + 1 { b } else { a };
                let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(p, shared, q) == 0.0
                    && (on_segment(shared, p, q) || on_segment(shared, q, p))
                {
                    return false;
                }
            } else if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
