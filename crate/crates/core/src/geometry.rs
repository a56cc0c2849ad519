//! Planar geometry helpers: convex hulls over pixel footprints and
//! minimum-area enclosing rectangles.
//!
//! Pixel `(x, y)` covers the unit square `[x, x+1] x [y, y+1]`, so hulls and
//! rectangles built here always enclose whole pixels.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise in a y-up frame,
/// collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc.abs() * 0.5
}

/// Corner points sufficient to describe the hull of a pixel set: for every
/// row, the outer corners of its leftmost and rightmost pixel.
pub fn pixel_corner_points<I>(pixels: I) -> Vec<Point>
where
    I: IntoIterator<Item = (u32, u32)>,
{
    let mut rows: std::collections::BTreeMap<u32, (u32, u32)> = Default::default();
    for (x, y) in pixels {
        rows.entry(y)
            .and_modify(|e| {
                e.0 = e.0.min(x);
                e.1 = e.1.max(x);
            })
            .or_insert((x, x));
    }
    let mut out = Vec::with_capacity(rows.len() * 4);
    for (y, (lo, hi)) in rows {
        let (y0, y1) = (f64::from(y), f64::from(y) + 1.0);
        let (x0, x1) = (f64::from(lo), f64::from(hi) + 1.0);
        out.extend([
            Point::new(x0, y0),
            Point::new(x0, y1),
            Point::new(x1, y0),
            Point::new(x1, y1),
        ]);
    }
    out
}

/// Oriented rectangle. `w` is the extent along the direction `angle`, and
/// `h` the extent across it. Canonical form keeps `w >= h` and
/// `angle` in `[-pi/2, pi/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    #[serde(rename = "angle_rad")]
    pub angle: f64,
}

/// Wraps an angle into `[-pi/2, pi/2)`.
pub fn wrap_half_turn(mut a: f64) -> f64 {
    a = a.rem_euclid(PI);
    if a >= FRAC_PI_2 {
        a -= PI;
    }
    a
}

impl RotatedRect {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64) -> Self {
        let (w, h, angle) = if h > w {
            (h, w, angle + FRAC_PI_2)
        } else {
            (w, h, angle)
        };
        RotatedRect {
            cx,
            cy,
            w,
            h,
            angle: wrap_half_turn(angle),
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.angle.sin_cos();
        let (hw, hh) = (self.w * 0.5, self.h * 0.5);
        let along = Point::new(c * hw, s * hw);
        let across = Point::new(-s * hh, c * hh);
        [
            Point::new(self.cx - along.x - across.x, self.cy - along.y - across.y),
            Point::new(self.cx + along.x - across.x, self.cy + along.y - across.y),
            Point::new(self.cx + along.x + across.x, self.cy + along.y + across.y),
            Point::new(self.cx - along.x + across.x, self.cy - along.y + across.y),
        ]
    }

    /// Same center and size with the angle zeroed.
    pub fn axis_aligned(&self) -> AxisBox {
        AxisBox {
            x0: self.cx - self.w * 0.5,
            y0: self.cy - self.h * 0.5,
            x1: self.cx + self.w * 0.5,
            y1: self.cy + self.h * 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl AxisBox {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn iou(&self, other: &AxisBox) -> f64 {
        let inter = AxisBox {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        }
        .area();
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Minimum-area enclosing rectangle of a point set. One side of the optimum
/// is collinear with a hull edge, so every hull edge direction is tried.
pub fn min_area_rect(points: &[Point]) -> Option<RotatedRect> {
    let hull = convex_hull(points);
    match hull.len() {
        0 => return None,
        1 => return Some(RotatedRect::new(hull[0].x, hull[0].y, 0.0, 0.0, 0.0)),
        _ => {}
    }
    let mut best: Option<(f64, RotatedRect)> = None;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = (b.x - a.x).hypot(b.y - a.y);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &hull {
            let u = p.x * ux + p.y * uy;
            let v = -p.x * uy + p.y * ux;
            lo_u = lo_u.min(u);
            hi_u = hi_u.max(u);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
        let area = (hi_u - lo_u) * (hi_v - lo_v);
        let better = match &best {
            None => true,
            Some((best_area, _)) => area < *best_area - 1e-9,
        };
        if better {
            let (mu, mv) = ((lo_u + hi_u) * 0.5, (lo_v + hi_v) * 0.5);
            let cx = mu * ux - mv * uy;
            let cy = mu * uy + mv * ux;
            let rect = RotatedRect::new(cx, cy, hi_u - lo_u, hi_v - lo_v, uy.atan2(ux));
            best = Some((area, rect));
        }
    }
    best.map(|(_, r)| r)
}

/// Minimum-area rectangle enclosing every listed pixel.
pub fn pixel_min_area_rect<I>(pixels: I) -> Option<RotatedRect>
where
    I: IntoIterator<Item = (u32, u32)>,
{
    min_area_rect(&pixel_corner_points(pixels))
}

/// Distance from a point inside a convex polygon to its boundary.
pub fn depth_inside_convex(poly: &[Point], p: Point) -> f64 {
    let mut best = f64::MAX;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let len = (b.x - a.x).hypot(b.y - a.y);
        if len == 0.0 {
            continue;
        }
        let d = cross(a, b, p).abs() / len;
        best = best.min(d);
    }
    best
}

/// Point-in-convex-polygon test for a counter-clockwise hull, boundary
/// inclusive.
pub fn inside_convex(poly: &[Point], p: Point) -> bool {
    if poly.len() < 3 {
        return false;
    }
    (0..poly.len()).all(|i| cross(poly[i], poly[(i + 1) % poly.len()], p) >= -1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_hull_area() {
        let pixels = (0..10).flat_map(|y| (0..10).map(move |x| (x, y)));
        let hull = convex_hull(&pixel_corner_points(pixels));
        assert_eq!(hull.len(), 4);
        assert_eq!(polygon_area(&hull), 100.0);
    }

    #[test]
    fn min_rect_of_axis_aligned_bar() {
        let pixels = (0..4).flat_map(|y| (0..20).map(move |x| (x + 3, y + 7)));
        let r = pixel_min_area_rect(pixels).unwrap();
        assert!((r.w - 20.0).abs() < 1e-9 && (r.h - 4.0).abs() < 1e-9);
        assert!(r.angle.abs() < 1e-9);
        assert!((r.cx - 13.0).abs() < 1e-9 && (r.cy - 9.0).abs() < 1e-9);
    }

    #[test]
    fn rect_canonical_form() {
        let r = RotatedRect::new(0.0, 0.0, 2.0, 10.0, 0.0);
        assert_eq!(r.w, 10.0);
        assert_eq!(r.h, 2.0);
        assert!((r.angle + FRAC_PI_2).abs() < 1e-12);
        let r = RotatedRect::new(0.0, 0.0, 10.0, 2.0, PI);
        assert!(r.angle.abs() < 1e-12);
    }

    #[test]
    fn rotated_points_give_rotated_rect() {
        let theta = 30f64.to_radians();
        let (s, c) = theta.sin_cos();
        let mut pts = Vec::new();
        for i in 0..=40 {
            for j in 0..=8 {
                let (u, v) = (f64::from(i), f64::from(j));
                pts.push(Point::new(u * c - v * s, u * s + v * c));
            }
        }
        let r = min_area_rect(&pts).unwrap();
        assert!((r.angle - theta).abs() < 1e-9, "{}", r.angle);
        assert!((r.w - 40.0).abs() < 1e-9 && (r.h - 8.0).abs() < 1e-9);
    }

    #[test]
    fn axis_box_iou() {
        let a = AxisBox { x0: 0.0, y0: 0.0, x1: 10.0, y1: 10.0 };
        let b = AxisBox { x0: 5.0, y0: 0.0, x1: 15.0, y1: 10.0 };
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
    }
}
