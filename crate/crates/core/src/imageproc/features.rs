//! Per-region scalar features and shape attributes.

use serde::{Deserialize, Serialize};

use super::channels::{ChannelId, ChannelImage};
use super::mser::{Polarity, RegionGeometry};
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Minimum hull-deficiency depth, in pixels, for a concavity to count as a
/// convexity defect.
pub const DEFECT_MIN_DEPTH: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.xmax - self.xmin + 1
    }

    pub fn height(&self) -> u32 {
        self.ymax - self.ymin + 1
    }
}

/// A connected pixel set from one channel with its similarity features and
/// shape attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub channel: ChannelId,
    pub polarity: Polarity,
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BoundingBox,
    pub centroid: (f64, f64),
    pub area: usize,
    pub intensity_mean: f64,
    pub boundary_intensity_mean: f64,
    pub border_gradient_mean: f64,
    pub major_axis: f64,
    pub stroke_width_mean: f64,
    pub hu_moments: [f64; 7],
    pub hull_compactness: f64,
    pub convexity_defect_count: u32,
    pub aspect_ratio: f64,
}

/// Region mask on its bounding box grown by one pixel, so the outer ring
/// always has a cell.
struct LocalMask {
    /// Image coordinates of local cell (0, 0).
    ox: i64,
    oy: i64,
    w: usize,
    h: usize,
    cells: Vec<bool>,
}

impl LocalMask {
    fn new(pixels: &[(u32, u32)], bbox: &BoundingBox) -> Self {
        let ox = i64::from(bbox.xmin) - 1;
        let oy = i64::from(bbox.ymin) - 1;
        let w = bbox.width() as usize + 2;
        let h = bbox.height() as usize + 2;
        let mut cells = vec![false; w * h];
        for &(x, y) in pixels {
            let lx = (i64::from(x) - ox) as usize;
            let ly = (i64::from(y) - oy) as usize;
            cells[ly * w + lx] = true;
        }
        LocalMask { ox, oy, w, h, cells }
    }

    #[inline]
    fn at(&self, lx: i64, ly: i64) -> bool {
        if lx < 0 || ly < 0 || lx >= self.w as i64 || ly >= self.h as i64 {
            return false;
        }
        self.cells[ly as usize * self.w + lx as usize]
    }
}

fn bounding_box(pixels: &[(u32, u32)]) -> BoundingBox {
    let mut b = BoundingBox {
        xmin: u32::MAX,
        ymin: u32::MAX,
        xmax: 0,
        ymax: 0,
    };
    for &(x, y) in pixels {
        b.xmin = b.xmin.min(x);
        b.ymin = b.ymin.min(y);
        b.xmax = b.xmax.max(x);
        b.ymax = b.ymax.max(y);
    }
    b
}

/// 3x3 Sobel magnitude at `(x, y)` with replicated borders, clamped to 255.
pub fn sobel_magnitude(channel: &ChannelImage, x: u32, y: u32) -> f64 {
    let (w, h) = (i64::from(channel.width()), i64::from(channel.height()));
    let px = |dx: i64, dy: i64| -> f64 {
        let cx = (i64::from(x) + dx).clamp(0, w - 1) as u32;
        let cy = (i64::from(y) + dy).clamp(0, h - 1) as u32;
        f64::from(channel.get(cx, cy))
    };
    let gx = (px(1, -1) + 2.0 * px(1, 0) + px(1, 1)) - (px(-1, -1) + 2.0 * px(-1, 0) + px(-1, 1));
    let gy = (px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)) - (px(-1, -1) + 2.0 * px(0, -1) + px(1, -1));
    gx.hypot(gy).min(255.0)
}

/// City-block distance from each region cell to the nearest non-region
/// cell. Cells outside the region hold 0.
fn distance_transform(mask: &LocalMask) -> Vec<u32> {
    let (w, h) = (mask.w, mask.h);
    let big = (w + h) as u32;
    let mut dt: Vec<u32> = mask.cells.iter().map(|&c| if c { big } else { 0 }).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if dt[i] == 0 {
                continue;
            }
            let mut d = dt[i];
            if x > 0 {
                d = d.min(dt[i - 1] + 1);
            }
            if y > 0 {
                d = d.min(dt[i - w] + 1);
            }
            dt[i] = d;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if dt[i] == 0 {
                continue;
            }
            let mut d = dt[i];
            if x + 1 < w {
                d = d.min(dt[i + 1] + 1);
            }
            if y + 1 < h {
                d = d.min(dt[i + w] + 1);
            }
            dt[i] = d;
        }
    }
    dt
}

/// Mean of `2*DT - 1` over ridge cells of the distance transform (cells
/// not exceeded by any 8-neighbour).
#[cfg(test)]
fn stroke_width_of(mask_pixels: &[(u32, u32)]) -> f64 {
    let bbox = bounding_box(mask_pixels);
    let mask = LocalMask::new(mask_pixels, &bbox);
    stroke_width(&mask)
}

fn stroke_width(mask: &LocalMask) -> f64 {
    let dt = distance_transform(mask);
    let (w, h) = (mask.w as i64, mask.h as i64);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let d = dt[(y * w + x) as usize];
            if d == 0 {
                continue;
            }
            let mut ridge = true;
            'nb: for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    if dt[(ny * w + nx) as usize] > d {
                        ridge = false;
                        break 'nb;
                    }
                }
            }
            if ridge {
                sum += 2.0 * f64::from(d) - 1.0;
                count += 1;
            }
        }
    }
    if count == 0 {
        1.0
    } else {
        (sum / count as f64).max(1.0)
    }
}

/// Hu's seven moment invariants of a pixel mask.
pub fn hu_moments(pixels: &[(u32, u32)]) -> [f64; 7] {
    let n = pixels.len() as f64;
    if pixels.is_empty() {
        return [0.0; 7];
    }
    let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + f64::from(x), b + f64::from(y))
    });
    let (mx, my) = (sx / n, sy / n);
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    let (mut m30, mut m03, mut m21, mut m12) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = f64::from(x) - mx;
        let dy = f64::from(y) - my;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
        m30 += dx * dx * dx;
        m03 += dy * dy * dy;
        m21 += dx * dx * dy;
        m12 += dx * dy * dy;
    }
    let s2 = n * n;
    let s3 = n.powf(2.5);
    let (n20, n02, n11) = (m20 / s2, m02 / s2, m11 / s2);
    let (n30, n03, n21, n12) = (m30 / s3, m03 / s3, m21 / s3, m12 / s3);

    let h1 = n20 + n02;
    let h2 = (n20 - n02).powi(2) + 4.0 * n11 * n11;
    let h3 = (n30 - 3.0 * n12).powi(2) + (3.0 * n21 - n03).powi(2);
    let h4 = (n30 + n12).powi(2) + (n21 + n03).powi(2);
    let a = n30 + n12;
    let b = n21 + n03;
    let h5 = (n30 - 3.0 * n12) * a * (a * a - 3.0 * b * b)
        + (3.0 * n21 - n03) * b * (3.0 * a * a - b * b);
    let h6 = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
    let h7 = (3.0 * n21 - n03) * a * (a * a - 3.0 * b * b)
        - (n30 - 3.0 * n12) * b * (3.0 * a * a - b * b);
    [h1, h2, h3, h4, h5, h6, h7]
}

/// Centroid, and `4 * sqrt(largest eigenvalue)` of the pixel covariance.
fn centroid_and_major_axis(pixels: &[(u32, u32)]) -> ((f64, f64), f64) {
    let n = pixels.len() as f64;
    let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + f64::from(x), b + f64::from(y))
    });
    let (mx, my) = (sx / n, sy / n);
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = f64::from(x) - mx;
        let dy = f64::from(y) - my;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    let (cxx, cyy, cxy) = (cxx / n, cyy / n, cxy / n);
    let half_tr = 0.5 * (cxx + cyy);
    let disc = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let lmax = (half_tr + disc).max(0.0);
    ((mx, my), 4.0 * lmax.sqrt())
}

/// Hull compactness and the number of deep hull deficiencies.
fn hull_attributes(pixels: &[(u32, u32)], mask: &LocalMask) -> (f64, u32) {
    let hull = geometry::convex_hull(&geometry::pixel_corner_points(pixels.iter().copied()));
    let hull_area = geometry::polygon_area(&hull);
    let compactness = if hull_area > 0.0 {
        (pixels.len() as f64 / hull_area).min(1.0)
    } else {
        1.0
    };

    // Cells whose centers fall inside the hull but outside the region.
    let (w, h) = (mask.w, mask.h);
    let mut in_hull = vec![false; w * h];
    for ly in 0..h {
        for lx in 0..w {
            let c = Point::new(
                (mask.ox + lx as i64) as f64 + 0.5,
                (mask.oy + ly as i64) as f64 + 0.5,
            );
            in_hull[ly * w + lx] = geometry::inside_convex(&hull, c);
        }
    }
    let deficient = |i: usize| in_hull[i] && !mask.cells[i];

    let mut seen = vec![false; w * h];
    let mut defects = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || !deficient(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut opens_out = false;
        let mut depth: f64 = 0.0;
        while let Some(i) = stack.pop() {
            let (lx, ly) = ((i % w) as i64, (i / w) as i64);
            let c = Point::new(
                (mask.ox + lx) as f64 + 0.5,
                (mask.oy + ly) as f64 + 0.5,
            );
            depth = depth.max(geometry::depth_inside_convex(&hull, c));
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (lx + dx, ly + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    opens_out = true;
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !in_hull[j] {
                    opens_out = true;
                } else if !seen[j] && deficient(j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        // Enclosed holes are not hull defects.
        if opens_out && depth > DEFECT_MIN_DEPTH {
            defects += 1;
        }
    }
    (compactness, defects)
}

/// Fills every feature of a region from its footprint and source channel.
/// Rings and gradients are truncated at the image border.
pub fn compute_region_features(geom: &RegionGeometry, channel: &ChannelImage) -> Result<Region> {
    compute_features_for_pixels(geom.pixels.clone(), geom.polarity, channel)
}

pub fn compute_features_for_pixels(
    mut pixels: Vec<(u32, u32)>,
    polarity: Polarity,
    channel: &ChannelImage,
) -> Result<Region> {
    if pixels.is_empty() {
        return Err(Error::InvalidInput("region has no pixels".into()));
    }
    if pixels
        .iter()
        .any(|&(x, y)| x >= channel.width() || y >= channel.height())
    {
        return Err(Error::InvalidInput("region pixel outside the channel".into()));
    }
    pixels.sort_unstable_by_key(|&(x, y)| (y, x));
    pixels.dedup();

    let bbox = bounding_box(&pixels);
    let mask = LocalMask::new(&pixels, &bbox);
    let area = pixels.len();

    let intensity_sum: f64 = pixels.iter().map(|&(x, y)| f64::from(channel.get(x, y))).sum();

    let (iw, ih) = (i64::from(channel.width()), i64::from(channel.height()));
    let mut ring_sum = 0.0;
    let mut ring_n = 0usize;
    let mut grad_sum = 0.0;
    let mut border_n = 0usize;
    for ly in 0..mask.h as i64 {
        for lx in 0..mask.w as i64 {
            let (gx, gy) = (mask.ox + lx, mask.oy + ly);
            if mask.at(lx, ly) {
                let is_border = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|&(dx, dy)| !mask.at(lx + dx, ly + dy));
                if is_border {
                    grad_sum += sobel_magnitude(channel, gx as u32, gy as u32);
                    border_n += 1;
                }
            } else if gx >= 0 && gy >= 0 && gx < iw && gy < ih {
                let touches = (-1..=1i64)
                    .flat_map(|dy| (-1..=1i64).map(move |dx| (dx, dy)))
                    .any(|(dx, dy)| mask.at(lx + dx, ly + dy));
                if touches {
                    ring_sum += f64::from(channel.get(gx as u32, gy as u32));
                    ring_n += 1;
                }
            }
        }
    }
    let intensity_mean = intensity_sum / area as f64;
    let boundary_intensity_mean = if ring_n > 0 {
        ring_sum / ring_n as f64
    } else {
        intensity_mean
    };
    let border_gradient_mean = if border_n > 0 {
        grad_sum / border_n as f64
    } else {
        0.0
    };

    let (centroid, major_axis) = centroid_and_major_axis(&pixels);
    let stroke_width_mean = stroke_width(&mask);
    let hu = hu_moments(&pixels);
    let (hull_compactness, convexity_defect_count) = hull_attributes(&pixels, &mask);
    let aspect_ratio = f64::from(bbox.width()) / f64::from(bbox.height());

    Ok(Region {
        channel: channel.channel(),
        polarity,
        pixels,
        bbox,
        centroid,
        area,
        intensity_mean,
        boundary_intensity_mean,
        border_gradient_mean,
        major_axis,
        stroke_width_mean,
        hu_moments: hu,
        hull_compactness,
        convexity_defect_count,
        aspect_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_pixels(x0: u32, y0: u32, w: u32, h: u32) -> Vec<(u32, u32)> {
        (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| (x, y))).collect()
    }

    fn paint(w: u32, h: u32, bg: u8, fg: u8, pixels: &[(u32, u32)]) -> ChannelImage {
        let mut data = vec![bg; (w * h) as usize];
        for &(x, y) in pixels {
            data[(y * w + x) as usize] = fg;
        }
        ChannelImage::new(w, h, ChannelId::Gray, data).unwrap()
    }

    #[test]
    fn bar_stroke_width() {
        let px = rect_pixels(10, 10, 5, 30);
        assert!((stroke_width_of(&px) - 5.0).abs() <= 0.5);
        for w in [3u32, 5, 7, 9] {
            let px = rect_pixels(4, 4, w, 40);
            let sw = stroke_width_of(&px);
            assert!((sw - f64::from(w)).abs() <= 1.0, "w={w} sw={sw}");
        }
    }

    #[test]
    fn solid_square_is_convex() {
        let px = rect_pixels(5, 5, 12, 12);
        let ch = paint(30, 30, 255, 0, &px);
        let r = compute_features_for_pixels(px, Polarity::Dark, &ch).unwrap();
        assert_eq!(r.hull_compactness, 1.0);
        assert_eq!(r.convexity_defect_count, 0);
        assert_eq!(r.intensity_mean, 0.0);
        assert_eq!(r.boundary_intensity_mean, 255.0);
        assert_eq!(r.aspect_ratio, 1.0);
    }

    #[test]
    fn u_shape_has_one_defect() {
        let mut px = rect_pixels(5, 5, 3, 20);
        px.extend(rect_pixels(17, 5, 3, 20));
        px.extend(rect_pixels(8, 22, 9, 3));
        let ch = paint(40, 40, 255, 0, &px);
        let r = compute_features_for_pixels(px, Polarity::Dark, &ch).unwrap();
        assert_eq!(r.convexity_defect_count, 1);
        assert!(r.hull_compactness < 0.6);
    }

    #[test]
    fn ring_hole_is_not_a_defect() {
        let mut px = Vec::new();
        for (x, y) in rect_pixels(5, 5, 15, 15) {
            if !(9..16).contains(&x) || !(9..16).contains(&y) {
                px.push((x, y));
            }
        }
        let ch = paint(30, 30, 255, 0, &px);
        let r = compute_features_for_pixels(px, Polarity::Dark, &ch).unwrap();
        assert_eq!(r.convexity_defect_count, 0);
    }

    #[test]
    fn border_touching_region_is_fine() {
        let px = rect_pixels(0, 0, 6, 6);
        let ch = paint(20, 20, 200, 10, &px);
        let r = compute_features_for_pixels(px, Polarity::Dark, &ch).unwrap();
        assert_eq!(r.boundary_intensity_mean, 200.0);
        assert!(r.border_gradient_mean > 0.0);
    }

    #[test]
    fn hu_of_rotated_l_shape() {
        let mut px = rect_pixels(0, 0, 4, 15);
        px.extend(rect_pixels(4, 11, 8, 4));
        let rot: Vec<(u32, u32)> = px.iter().map(|&(x, y)| (20 - y, x)).collect();
        let a = hu_moments(&px);
        let b = hu_moments(&rot);
        for i in 0..7 {
            assert!((a[i] - b[i]).abs() <= 1e-3 * a[i].abs().max(b[i].abs()) + 1e-15);
        }
    }

    #[test]
    fn out_of_bounds_pixel_rejected() {
        let ch = paint(5, 5, 0, 0, &[]);
        assert!(compute_features_for_pixels(vec![(9, 9)], Polarity::Dark, &ch).is_err());
    }
}
