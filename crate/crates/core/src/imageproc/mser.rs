//! Maximally stable extremal regions over an 8-connected component tree.
//!
//! The tree is built with a union-find over pixels sorted by intensity
//! (Berger et al. style), then canonicalized so that every tree node is
//! represented by one canonical pixel. A node is stable when its area
//! variation across `delta` gray levels is a local minimum along its root
//! path.

use serde::{Deserialize, Serialize};

use super::channels::{ChannelId, ChannelImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Dark region on a lighter surround (`value <= level`).
    Dark,
    /// Light region on a darker surround.
    Bright,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MserParams {
    pub delta: u8,
    pub min_area: usize,
    /// Upper area bound as a fraction of the image area.
    pub max_area_ratio: f64,
    pub max_variation: f64,
}

impl Default for MserParams {
    fn default() -> Self {
        MserParams {
            delta: 5,
            min_area: 30,
            max_area_ratio: 0.4,
            max_variation: 0.25,
        }
    }
}

impl MserParams {
    pub fn max_area(&self, image_area: usize) -> usize {
        (self.max_area_ratio * image_area as f64).floor() as usize
    }

    /// Images too small for `min_area < max_area` are not an error; they
    /// yield no regions.
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::InvalidInput("mser delta must be >= 1".into()));
        }
        if !(self.max_variation > 0.0) {
            return Err(Error::InvalidInput("mser max_variation must be > 0".into()));
        }
        if !(self.max_area_ratio > 0.0 && self.max_area_ratio <= 1.0) {
            return Err(Error::InvalidInput(
                "mser max_area_ratio must lie in (0, 1]".into(),
            ));
        }
        if self.min_area == 0 {
            return Err(Error::InvalidInput("mser min_area must be > 0".into()));
        }
        Ok(())
    }
}

/// Pixel footprint of one extremal region, before feature computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionGeometry {
    pub channel: ChannelId,
    pub polarity: Polarity,
    /// Threshold level at which the region appears (in the polarity's own
    /// value space).
    pub level: u8,
    /// Row-major sorted pixel coordinates.
    pub pixels: Vec<(u32, u32)>,
}

/// Both polarities; dark regions first.
pub fn extract_mser(channel: &ChannelImage, params: &MserParams) -> Result<Vec<RegionGeometry>> {
    params.validate()?;
    let mut out = extract_polarity(channel, params, Polarity::Dark);
    out.extend(extract_polarity(channel, params, Polarity::Bright));
    Ok(out)
}

pub fn extract_polarity(
    channel: &ChannelImage,
    params: &MserParams,
    polarity: Polarity,
) -> Vec<RegionGeometry> {
    let values: Vec<u8> = match polarity {
        Polarity::Dark => channel.data().to_vec(),
        Polarity::Bright => channel.data().iter().map(|v| 255 - v).collect(),
    };
    let tree = ComponentTree::build(&values, channel.width(), channel.height());
    tree.stable_regions(params)
        .into_iter()
        .map(|(level, pixels)| {
            let w = channel.width();
            let mut pixels: Vec<(u32, u32)> = pixels.into_iter().map(|p| (p % w, p / w)).collect();
            pixels.sort_unstable_by_key(|&(x, y)| (y, x));
            RegionGeometry {
                channel: channel.channel(),
                polarity,
                level,
                pixels,
            }
        })
        .collect()
}

const UNSET: u32 = u32::MAX;

/// Min-tree of an 8-bit image with canonical-pixel node representation.
pub(crate) struct ComponentTree<'a> {
    values: &'a [u8],
    /// Processing order (ascending value).
    order: Vec<u32>,
    /// Canonicalized parent pointers.
    parent: Vec<u32>,
    /// Area of the node represented by each canonical pixel.
    area: Vec<u32>,
    root: u32,
}

impl<'a> ComponentTree<'a> {
    pub(crate) fn build(values: &'a [u8], width: u32, height: u32) -> Self {
        let n = values.len();
        debug_assert_eq!(n, width as usize * height as usize);

        let mut counts = [0usize; 257];
        for &v in values {
            counts[v as usize + 1] += 1;
        }
        for i in 1..257 {
            counts[i] += counts[i - 1];
        }
        let mut order = vec![0u32; n];
        for (i, &v) in values.iter().enumerate() {
            order[counts[v as usize]] = i as u32;
            counts[v as usize] += 1;
        }

        // Union by rank on `zpar`; `repr` maps a union-find root to the most
        // recently processed pixel of its component, which is the node the
        // component hangs under.
        let mut parent = vec![UNSET; n];
        let mut zpar = vec![UNSET; n];
        let mut rank = vec![0u8; n];
        let mut repr = vec![UNSET; n];
        let (w, h) = (width as usize, height as usize);
        let wi = w as isize;
        let offsets = [-wi - 1, -wi, -wi + 1, -1, 1, wi - 1, wi, wi + 1];
        let mut neighbours = [0usize; 8];
        for &p in &order {
            let pu = p as usize;
            parent[pu] = p;
            zpar[pu] = p;
            repr[pu] = p;
            let mut zp = p;
            let (px, py) = (pu % w, pu / w);
            let count = if px > 0 && py > 0 && px + 1 < w && py + 1 < h {
                for (slot, off) in neighbours.iter_mut().zip(offsets) {
                    *slot = (pu as isize + off) as usize;
                }
                8
            } else {
                let mut k = 0;
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (qx, qy) = (px as isize + dx, py as isize + dy);
                        if (dx, dy) == (0, 0) || qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                            continue;
                        }
                        neighbours[k] = qy as usize * w + qx as usize;
                        k += 1;
                    }
                }
                k
            };
            for &q in &neighbours[..count] {
                if zpar[q] == UNSET {
                    continue;
                }
                let r = find_root(&mut zpar, q as u32);
                if r == zp {
                    continue;
                }
                parent[repr[r as usize] as usize] = p;
                let (ru, zu) = (r as usize, zp as usize);
                if rank[zu] < rank[ru] {
                    zpar[zu] = r;
                    zp = r;
                } else {
                    zpar[ru] = zp;
                    if rank[zu] == rank[ru] {
                        rank[zu] += 1;
                    }
                }
                repr[zp as usize] = p;
            }
        }

        for &p in order.iter().rev() {
            let q = parent[p as usize];
            let pq = parent[q as usize];
            if values[pq as usize] == values[q as usize] {
                parent[p as usize] = pq;
            }
        }

        let mut area = vec![1u32; n];
        let root = *order.last().unwrap_or(&0);
        for &p in &order {
            if p != root {
                let q = parent[p as usize];
                area[q as usize] += area[p as usize];
            }
        }

        ComponentTree {
            values,
            order,
            parent,
            area,
            root,
        }
    }

    fn is_canonical(&self, p: u32) -> bool {
        p == self.root || self.values[self.parent[p as usize] as usize] != self.values[p as usize]
    }

    fn level(&self, node: u32) -> u8 {
        self.values[node as usize]
    }

    /// Area of the component containing `node` at threshold `level`.
    fn area_at(&self, node: u32, level: u32) -> u32 {
        let mut a = node;
        while a != self.root {
            let p = self.parent[a as usize];
            if u32::from(self.values[p as usize]) > level {
                break;
            }
            a = p;
        }
        self.area[a as usize]
    }

    fn variation_at(&self, node: u32, level: u32, delta: u32) -> f64 {
        let own = self.area[node as usize];
        let grown = self.area_at(node, level + delta);
        f64::from(grown - own) / f64::from(own)
    }

    /// Stable nodes as `(level, pixel indices)`, in ascending level order.
    pub(crate) fn stable_regions(&self, params: &MserParams) -> Vec<(u8, Vec<u32>)> {
        let n = self.values.len();
        if n == 0 {
            return Vec::new();
        }
        let max_area = params.max_area(n);
        let min_area = params.min_area;
        if min_area > max_area {
            return Vec::new();
        }
        let delta = u32::from(params.delta);

        let canonical: Vec<u32> = self
            .order
            .iter()
            .copied()
            .filter(|&p| self.is_canonical(p))
            .collect();

        let mut variation = vec![f64::NAN; n];
        for &c in &canonical {
            variation[c as usize] = self.variation_at(c, u32::from(self.level(c)), delta);
        }

        // Largest child of every node, used for the descending neighbour in
        // the level sequence.
        let mut main_child = vec![UNSET; n];
        for &c in &canonical {
            if c == self.root {
                continue;
            }
            let p = self.parent[c as usize] as usize;
            let cur = main_child[p];
            if cur == UNSET || self.area[c as usize] > self.area[cur as usize] {
                main_child[p] = c;
            }
        }

        let mut selected = Vec::new();
        for &c in &canonical {
            let a = self.area[c as usize] as usize;
            if a < min_area || a > max_area {
                continue;
            }
            let var = variation[c as usize];
            if var > params.max_variation {
                continue;
            }
            let level = u32::from(self.level(c));
            if c != self.root {
                let p = self.parent[c as usize];
                if u32::from(self.level(p)) == level + 1 && var > variation[p as usize] {
                    continue;
                }
            }
            let ch = main_child[c as usize];
            if ch != UNSET && level > 0 {
                let below = self.variation_at(ch, level - 1, delta);
                if var >= below {
                    continue;
                }
            }
            selected.push(c);
        }

        if selected.is_empty() {
            return Vec::new();
        }
        self.collect_pixels(&canonical, &selected)
    }

    fn collect_pixels(&self, canonical: &[u32], selected: &[u32]) -> Vec<(u8, Vec<u32>)> {
        let n = self.values.len();
        // Dense node index for canonical pixels.
        let mut node_of = vec![UNSET; n];
        for (i, &c) in canonical.iter().enumerate() {
            node_of[c as usize] = i as u32;
        }
        let m = canonical.len();

        let owner = |p: u32| -> u32 {
            if node_of[p as usize] != UNSET {
                node_of[p as usize]
            } else {
                node_of[self.parent[p as usize] as usize]
            }
        };

        let mut own_start = vec![0u32; m + 1];
        for p in 0..n as u32 {
            own_start[owner(p) as usize + 1] += 1;
        }
        for i in 0..m {
            own_start[i + 1] += own_start[i];
        }
        let mut own = vec![0u32; n];
        let mut fill = own_start.clone();
        for p in 0..n as u32 {
            let o = owner(p) as usize;
            own[fill[o] as usize] = p;
            fill[o] += 1;
        }

        let mut child_start = vec![0u32; m + 1];
        for &c in canonical {
            if c != self.root {
                let pn = node_of[self.parent[c as usize] as usize];
                child_start[pn as usize + 1] += 1;
            }
        }
        for i in 0..m {
            child_start[i + 1] += child_start[i];
        }
        let mut children = vec![0u32; m.saturating_sub(1)];
        let mut cfill = child_start.clone();
        for (i, &c) in canonical.iter().enumerate() {
            if c != self.root {
                let pn = node_of[self.parent[c as usize] as usize] as usize;
                children[cfill[pn] as usize] = i as u32;
                cfill[pn] += 1;
            }
        }

        let mut out = Vec::with_capacity(selected.len());
        let mut stack = Vec::new();
        for &c in selected {
            let mut pixels = Vec::with_capacity(self.area[c as usize] as usize);
            stack.clear();
            stack.push(node_of[c as usize]);
            while let Some(node) = stack.pop() {
                let node = node as usize;
                pixels.extend_from_slice(&own[own_start[node] as usize..own_start[node + 1] as usize]);
                stack.extend_from_slice(
                    &children[child_start[node] as usize..child_start[node + 1] as usize],
                );
            }
            out.push((self.level(c), pixels));
        }
        out
    }
}

fn find_root(zpar: &mut [u32], p: u32) -> u32 {
    let mut r = p;
    while zpar[r as usize] != r {
        r = zpar[r as usize];
    }
    let mut q = p;
    while zpar[q as usize] != r {
        let next = zpar[q as usize];
        zpar[q as usize] = r;
        q = next;
    }
    r
}
