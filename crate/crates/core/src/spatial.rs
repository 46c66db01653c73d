//! Uniform hash grid for fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::geom::Vec3;

#[derive(Debug, Clone)]
pub struct HashGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    points: Vec<Vec3>,
}

impl HashGrid {
    /// Indexes `points` with cubic cells of edge `cell`.
    pub fn build(points: &[Vec3], cell: f64) -> Self {
        assert!(cell > 0.0, "hash grid cell must be positive");
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        HashGrid {
            cell,
            cells,
            points: points.to_vec(),
        }
    }

    fn key(p: &Vec3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Indices of all points within `radius` (inclusive) of `center`, ascending.
    pub fn within_radius(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(center, radius, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn for_each_within(&self, center: &Vec3, radius: f64, mut f: impl FnMut(usize)) {
        let r2 = radius * radius;
        let lo = Self::key(&(center - Vec3::repeat(radius)), self.cell);
        let hi = Self::key(&(center + Vec3::repeat(radius)), self.cell);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(bucket) = self.cells.get(&[x, y, z]) {
                        for &i in bucket {
                            if (self.points[i as usize] - center).norm_squared() <= r2 {
                                f(i as usize);
                            }
                        }
                    }
                }
            }
        }
    }
}
