//! Occluder lattice and voxel traversal used to mark unobserved cells.
//!
//! Occluders are cubic voxels of the cloud binned in the hand frame. A cell
//! center is hidden from a viewpoint when the segment from the viewpoint to
//! the center passes through an occupied voxel whose point centroid lies
//! strictly nearer the viewpoint (along the segment) than the center.

use crate::geom::Vec3;

/// Fractional lattice offset. Keeps voxel faces away from the 60³ cell
/// centers of the default hand geometry.
pub const LATTICE_PHASE: f64 = 0.25;

const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct OcclusionGrid {
    leaf: f64,
    lo: [i64; 3],
    dims: [usize; 3],
    cells: Vec<u32>,
    centroids: Vec<Vec3>,
}

impl OcclusionGrid {
    /// Lattice coordinate of `p`; voxel `k` spans `[k, k+1)`.
    #[inline]
    fn lattice(&self, p: &Vec3) -> Vec3 {
        p / self.leaf - Vec3::repeat(LATTICE_PHASE)
    }

    pub fn voxel_of(leaf: f64, p: &Vec3) -> [i64; 3] {
        let g = p / leaf - Vec3::repeat(LATTICE_PHASE);
        [g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64]
    }

    /// Bins `points` (already in the frame the lattice lives in). The grid
    /// spans the points' voxels plus the box `[extra_lo, extra_hi]`.
    pub fn build(points: &[Vec3], leaf: f64, extra_lo: &Vec3, extra_hi: &Vec3) -> Self {
        let mut lo = Self::voxel_of(leaf, extra_lo);
        let mut hi = Self::voxel_of(leaf, extra_hi);
        let keys: Vec<[i64; 3]> = points.iter().map(|p| Self::voxel_of(leaf, p)).collect();
        for k in &keys {
            for a in 0..3 {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
        }
        let dims = [
            (hi[0] - lo[0] + 1) as usize,
            (hi[1] - lo[1] + 1) as usize,
            (hi[2] - lo[2] + 1) as usize,
        ];
        let mut cells = vec![EMPTY; dims[0] * dims[1] * dims[2]];
        let mut sums: Vec<(Vec3, usize)> = Vec::new();
        for (p, k) in points.iter().zip(&keys) {
            let idx = ((k[0] - lo[0]) as usize * dims[1] + (k[1] - lo[1]) as usize) * dims[2] + (k[2] - lo[2]) as usize;
            if cells[idx] == EMPTY {
                cells[idx] = sums.len() as u32;
                sums.push((Vec3::zeros(), 0));
            }
            let s = &mut sums[cells[idx] as usize];
            s.0 += p;
            s.1 += 1;
        }
        let centroids = sums.into_iter().map(|(s, n)| s / n as f64).collect();
        OcclusionGrid {
            leaf,
            lo,
            dims,
            cells,
            centroids,
        }
    }

    pub fn leaf(&self) -> f64 {
        self.leaf
    }

    /// Occupied voxels as (index, centroid), in lattice order.
    pub fn occupied_voxels(&self) -> Vec<([i64; 3], Vec3)> {
        let mut out = Vec::new();
        for x in 0..self.dims[0] {
            for y in 0..self.dims[1] {
                for z in 0..self.dims[2] {
                    let c = self.cells[(x * self.dims[1] + y) * self.dims[2] + z];
                    if c != EMPTY {
                        out.push((
                            [x as i64 + self.lo[0], y as i64 + self.lo[1], z as i64 + self.lo[2]],
                            self.centroids[c as usize],
                        ));
                    }
                }
            }
        }
        out
    }

    /// Axis-aligned box of voxel `key` in the point frame.
    pub fn voxel_box(leaf: f64, key: [i64; 3]) -> (Vec3, Vec3) {
        let lo = Vec3::new(
            (key[0] as f64 + LATTICE_PHASE) * leaf,
            (key[1] as f64 + LATTICE_PHASE) * leaf,
            (key[2] as f64 + LATTICE_PHASE) * leaf,
        );
        (lo, lo + Vec3::repeat(leaf))
    }

    #[inline]
    fn cell(&self, v: [i64; 3]) -> u32 {
        let x = (v[0] - self.lo[0]) as usize;
        let y = (v[1] - self.lo[1]) as usize;
        let z = (v[2] - self.lo[2]) as usize;
        self.cells[(x * self.dims[1] + y) * self.dims[2] + z]
    }

    /// Whether `target` is hidden from `eye` (see module docs).
    pub fn occluded(&self, eye: &Vec3, target: &Vec3) -> bool {
        let ga = self.lattice(eye);
        let gb = self.lattice(target);
        let d = gb - ga;
        let seg = target - eye;
        let seg_len2 = seg.norm_squared();
        if seg_len2 == 0.0 {
            return false;
        }

        // clip t ∈ [0, 1] to the lattice box
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for a in 0..3 {
            let lo = self.lo[a] as f64;
            let hi = (self.lo[a] + self.dims[a] as i64) as f64;
            if d[a] == 0.0 {
                if ga[a] < lo || ga[a] >= hi {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo - ga[a]) / d[a], (hi - ga[a]) / d[a]);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        if t0 > t1 {
            return false;
        }

        let start = ga + d * t0;
        let mut voxel = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let max_idx = self.lo[a] + self.dims[a] as i64 - 1;
            voxel[a] = (start[a].floor() as i64).clamp(self.lo[a], max_idx);
            if d[a] > 0.0 {
                step[a] = 1;
                t_max[a] = ((voxel[a] + 1) as f64 - ga[a]) / d[a];
                t_delta[a] = 1.0 / d[a];
            } else if d[a] < 0.0 {
                step[a] = -1;
                t_max[a] = (voxel[a] as f64 - ga[a]) / d[a];
                t_delta[a] = -1.0 / d[a];
            }
        }

        loop {
            let c = self.cell(voxel);
            if c != EMPTY {
                let t_c = (self.centroids[c as usize] - eye).dot(&seg) / seg_len2;
                if t_c < 1.0 {
                    return true;
                }
            }
            let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[a] > t1 {
                return false;
            }
            voxel[a] += step[a];
            if voxel[a] < self.lo[a] || voxel[a] >= self.lo[a] + self.dims[a] as i64 {
                return false;
            }
            t_max[a] += t_delta[a];
        }
    }
}

/// Whether the segment `eye + t·seg`, `t ∈ [0, 1]`, meets the box `[lo, hi]`.
#[inline]
fn segment_hits_box(eye: &Vec3, seg: &Vec3, lo: &Vec3, hi: &Vec3) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if seg[a].abs() < 1e-300 {
            if eye[a] < lo[a] || eye[a] >= hi[a] {
                return false;
            }
            continue;
        }
        let ta = (lo[a] - eye[a]) / seg[a];
        let tb = (hi[a] - eye[a]) / seg[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    t0 <= t1
}

/// Reference visibility test: slab-intersects the segment with every
/// occupied voxel. Quadratic; for tests only.
pub fn occluded_brute_force(voxels: &[([i64; 3], Vec3)], leaf: f64, eye: &Vec3, target: &Vec3) -> bool {
    let seg = target - eye;
    voxels.iter().any(|(key, centroid)| {
        let (lo, hi) = OcclusionGrid::voxel_box(leaf, *key);
        segment_hits_box(eye, &seg, &lo, &hi) && (centroid - eye).dot(&seg) / seg.norm_squared() < 1.0
    })
}

/// Occluding voxels of one viewpoint, bucketed by their image-plane
/// footprint. A ray can only meet a voxel whose projected corner rectangle
/// contains the ray's projection, so each query slab-tests just the voxels
/// in one bucket. Answers equal [`occluded_brute_force`].
pub struct ShadowIndex<'a> {
    grid: &'a OcclusionGrid,
    eye: Vec3,
    /// Set when some voxel reaches behind the eye; queries then use the DDA.
    fallback: bool,
    boxes: Vec<(Vec3, Vec3, Vec3)>,
    u: Vec3,
    v: Vec3,
    w: Vec3,
    origin: [f64; 2],
    bin: f64,
    dims: [usize; 2],
    starts: Vec<u32>,
    ids: Vec<u32>,
}

const MAX_BINS: usize = 256;

impl OcclusionGrid {
    /// Index for queries from `eye`; `toward` fixes the image plane.
    pub fn shadow_index(&self, eye: &Vec3, toward: &Vec3) -> ShadowIndex<'_> {
        let w = (toward - eye).try_normalize(1e-12).unwrap_or_else(Vec3::z);
        let helper = if w.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = w.cross(&helper).normalize();
        let v = w.cross(&u);
        let mut index = ShadowIndex {
            grid: self,
            eye: *eye,
            fallback: false,
            boxes: Vec::new(),
            u,
            v,
            w,
            origin: [0.0; 2],
            bin: 1.0,
            dims: [0, 0],
            starts: vec![0],
            ids: Vec::new(),
        };
        let mut rects = Vec::new();
        for (key, centroid) in self.occupied_voxels() {
            let (lo, hi) = Self::voxel_box(self.leaf, key);
            let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
            for c in 0..8 {
                let corner = Vec3::new(
                    if c & 1 == 0 { lo.x } else { hi.x },
                    if c & 2 == 0 { lo.y } else { hi.y },
                    if c & 4 == 0 { lo.z } else { hi.z },
                );
                let Some([a, b]) = index.project(&corner) else {
                    index.fallback = true;
                    return index;
                };
                r = [r[0].min(a), r[1].min(b), r[2].max(a), r[3].max(b)];
            }
            // guard against rounding at footprint edges
            let pad = 1e-9 * (r[2] - r[0] + r[3] - r[1]).max(1e-12);
            rects.push([r[0] - pad, r[1] - pad, r[2] + pad, r[3] + pad]);
            index.boxes.push((lo, hi, centroid));
        }
        if rects.is_empty() {
            return index;
        }
        let lo = [
            rects.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min),
            rects.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min),
        ];
        let hi = [
            rects.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max),
            rects.iter().map(|r| r[3]).fold(f64::NEG_INFINITY, f64::max),
        ];
        let typical = rects.iter().map(|r| (r[2] - r[0]).max(r[3] - r[1])).sum::<f64>() / rects.len() as f64;
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let bin = typical.max(span / MAX_BINS as f64).max(1e-12);
        let dims = [
            ((hi[0] - lo[0]) / bin).floor() as usize + 1,
            ((hi[1] - lo[1]) / bin).floor() as usize + 1,
        ];
        index.origin = lo;
        index.bin = bin;
        index.dims = dims;
        let bins_of = |r: &[f64; 4]| {
            let i0 = ((r[0] - lo[0]) / bin).floor() as usize;
            let i1 = (((r[2] - lo[0]) / bin).floor() as usize).min(dims[0] - 1);
            let j0 = ((r[1] - lo[1]) / bin).floor() as usize;
            let j1 = (((r[3] - lo[1]) / bin).floor() as usize).min(dims[1] - 1);
            (i0..=i1).flat_map(move |i| (j0..=j1).map(move |j| i * dims[1] + j))
        };
        let mut counts = vec![0u32; dims[0] * dims[1] + 1];
        for r in &rects {
            for b in bins_of(r) {
                counts[b + 1] += 1;
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; *counts.last().unwrap() as usize];
        for (id, r) in rects.iter().enumerate() {
            for b in bins_of(r) {
                ids[fill[b] as usize] = id as u32;
                fill[b] += 1;
            }
        }
        index.starts = counts;
        index.ids = ids;
        index
    }
}

impl ShadowIndex<'_> {
    #[inline]
    fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        let d = p - self.eye;
        let depth = d.dot(&self.w);
        if depth <= 1e-12 {
            return None;
        }
        Some([d.dot(&self.u) / depth, d.dot(&self.v) / depth])
    }

    pub fn occluded(&self, target: &Vec3) -> bool {
        if self.fallback {
            return self.grid.occluded(&self.eye, target);
        }
        if self.boxes.is_empty() {
            return false;
        }
        let Some([a, b]) = self.project(target) else {
            return self.grid.occluded(&self.eye, target);
        };
        let i = ((a - self.origin[0]) / self.bin).floor();
        let j = ((b - self.origin[1]) / self.bin).floor();
        if i < 0.0 || j < 0.0 || i >= self.dims[0] as f64 || j >= self.dims[1] as f64 {
            return false;
        }
        let bucket = i as usize * self.dims[1] + j as usize;
        let seg = target - self.eye;
        let seg_len2 = seg.norm_squared();
        if seg_len2 == 0.0 {
            return false;
        }
        self.ids[self.starts[bucket] as usize..self.starts[bucket + 1] as usize]
            .iter()
            .any(|&id| {
                let (lo, hi, centroid) = &self.boxes[id as usize];
                (centroid - self.eye).dot(&seg) / seg_len2 < 1.0 && segment_hits_box(&self.eye, &seg, lo, hi)
            })
    }
}
