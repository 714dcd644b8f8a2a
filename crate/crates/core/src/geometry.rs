//! Square simulation region, Poisson point sampling, and a bucket-grid
//! spatial index for nearest-candidate searches.
//!
//! Positions are meters; intensities are points per square kilometer.

use crate::{Result, SimError};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub const METERS_PER_KM: f64 = 1000.0;

/// Position in meters, `[x, y]`.
pub type Point = [f64; 2];

/// Euclidean distance in meters.
#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned square centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    half_width_km: f64,
}

impl Region {
    pub fn new(half_width_km: f64) -> Result<Self> {
        if !half_width_km.is_finite() || half_width_km <= 0.0 {
            return Err(SimError::InvalidParameter(format!(
                "region half-width must be positive and finite, got {half_width_km}"
            )));
        }
        Ok(Self { half_width_km })
    }

    pub fn half_width_km(&self) -> f64 {
        self.half_width_km
    }

    pub fn half_width_m(&self) -> f64 {
        self.half_width_km * METERS_PER_KM
    }

    /// Full side length in meters.
    pub fn side_m(&self) -> f64 {
        2.0 * self.half_width_m()
    }

    pub fn area_km2(&self) -> f64 {
        let side = 2.0 * self.half_width_km;
        side * side
    }

    pub fn contains(&self, p: Point) -> bool {
        let hw = self.half_width_m();
        p[0].abs() <= hw && p[1].abs() <= hw
    }
}

/// A labeled batch of points from one sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub label: String,
    pub points: Vec<Point>,
}

impl PointSet {
    pub fn new(label: impl Into<String>, points: Vec<Point>) -> Self {
        Self { label: label.into(), points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples a homogeneous Poisson point process on `region`: the count is
/// Poisson with mean `intensity * area`, positions are iid uniform.
pub fn sample_ppp(
    label: &str,
    intensity_per_km2: f64,
    region: Region,
    rng: &mut impl Rng,
) -> Result<PointSet> {
    if !intensity_per_km2.is_finite() || intensity_per_km2 < 0.0 {
        return Err(SimError::InvalidParameter(format!(
            "{label} intensity must be nonnegative and finite, got {intensity_per_km2}"
        )));
    }
    let mean = intensity_per_km2 * region.area_km2();
    let count = if mean > 0.0 {
        let dist = Poisson::new(mean).map_err(|e| {
            SimError::InvalidParameter(format!("{label} point count distribution: {e}"))
        })?;
        dist.sample(rng) as u64
    } else {
        0
    };
    let hw = region.half_width_m();
    let points = (0..count)
        .map(|_| [rng.random_range(-hw..hw), rng.random_range(-hw..hw)])
        .collect();
    Ok(PointSet::new(label, points))
}

/// Most cells per side the index will use, regardless of point count.
const MAX_CELLS_PER_SIDE: usize = 256;

/// Uniform bucket grid over a square region with CSR bucket storage.
///
/// Bucket side resolves to `side / cells_per_side` where `cells_per_side`
/// is capped three ways: the hard cap above, `floor(side / min_cell_m)` so
/// buckets are never finer than a caller-relevant scale, and about
/// `4 * sqrt(n)` so sparse sets get coarse grids instead of thousands of
/// empty buckets per ring scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point>,
    min_m: f64,
    cell_size_m: f64,
    cells_per_side: usize,
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl SpatialIndex {
    /// Builds the index. `min_cell_m <= 0` means no minimum bucket side.
    pub fn build(points: &[Point], region: Region, min_cell_m: f64) -> Self {
        let side = region.side_m();
        let mut cells = MAX_CELLS_PER_SIDE;
        if min_cell_m > 0.0 {
            cells = cells.min((side / min_cell_m).floor() as usize);
        }
        let sparse_cap = (4.0 * (points.len() as f64).sqrt()).ceil() as usize;
        cells = cells.min(sparse_cap).max(1);
        let cell_size = side / cells as f64;
        let min_m = -region.half_width_m();

        let n_cells = cells * cells;
        let mut counts = vec![0u32; n_cells + 1];
        let cell_of = |p: Point| -> usize {
            let ci = (((p[0] - min_m) / cell_size) as usize).min(cells - 1);
            let cj = (((p[1] - min_m) / cell_size) as usize).min(cells - 1);
            cj * cells + ci
        };
        for &p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..=n_cells {
            counts[i] += counts[i - 1];
        }
        let starts = counts;
        let mut cursor = starts.clone();
        let mut ids = vec![0u32; points.len()];
        for (id, &p) in points.iter().enumerate() {
            let c = cell_of(p);
            ids[cursor[c] as usize] = id as u32;
            cursor[c] += 1;
        }
        Self {
            points: points.to_vec(),
            min_m,
            cell_size_m: cell_size,
            cells_per_side: cells,
            starts,
            ids,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, id: u32) -> Point {
        self.points[id as usize]
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Grid cell containing `p`; positions outside the region clamp to the
    /// border cells.
    #[inline]
    pub fn cell_coords(&self, p: Point) -> (usize, usize) {
        let clamp = |v: f64| -> usize {
            if v < 0.0 {
                0
            } else {
                (v as usize).min(self.cells_per_side - 1)
            }
        };
        (
            clamp((p[0] - self.min_m) / self.cell_size_m),
            clamp((p[1] - self.min_m) / self.cell_size_m),
        )
    }

    /// Ids bucketed in cell `(ci, cj)`.
    #[inline]
    pub fn cell_ids(&self, ci: usize, cj: usize) -> &[u32] {
        let c = cj * self.cells_per_side + ci;
        let lo = self.starts[c] as usize;
        let hi = self.starts[c + 1] as usize;
        &self.ids[lo..hi]
    }

    /// Lower bound on the distance from any point in the cell holding `p`
    /// to any point in a cell at Chebyshev ring `k`.
    #[inline]
    pub fn ring_min_distance_m(&self, ring: u32) -> f64 {
        (f64::from(ring) - 1.0).max(0.0) * self.cell_size_m
    }

    /// Largest ring index that still intersects the grid from `(ci, cj)`.
    pub fn max_ring(&self, ci: usize, cj: usize) -> u32 {
        let n = self.cells_per_side - 1;
        let m = ci.max(n - ci).max(cj).max(n - cj);
        m as u32
    }

    /// Calls `f(ci, cj)` for each in-grid cell on Chebyshev ring `k`
    /// around `(ci, cj)`, in a fixed deterministic order.
    pub fn for_each_ring_cell(&self, ci: usize, cj: usize, k: u32, mut f: impl FnMut(usize, usize)) {
        let n = self.cells_per_side as i64;
        let (ci, cj) = (ci as i64, cj as i64);
        let k = i64::from(k);
        if k == 0 {
            f(ci as usize, cj as usize);
            return;
        }
        let inside = |x: i64, y: i64| x >= 0 && x < n && y >= 0 && y < n;
        // Top and bottom rows, then side columns without the corners.
        for y in [cj - k, cj + k] {
            if y < 0 || y >= n {
                continue;
            }
            for x in (ci - k).max(0)..=(ci + k).min(n - 1) {
                f(x as usize, y as usize);
            }
        }
        for x in [ci - k, ci + k] {
            if x < 0 || x >= n {
                continue;
            }
            for y in ((cj - k + 1).max(0))..=((cj + k - 1).min(n - 1)) {
                if inside(x, y) {
                    f(x as usize, y as usize);
                }
            }
        }
    }

    /// Ids of all indexed points within `radius_m` of `center` (inclusive).
    pub fn neighbors_within(&self, center: Point, radius_m: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if radius_m < 0.0 || self.points.is_empty() {
            return out;
        }
        let lo = self.cell_coords([center[0] - radius_m, center[1] - radius_m]);
        let hi = self.cell_coords([center[0] + radius_m, center[1] + radius_m]);
        for cj in lo.1..=hi.1 {
            for ci in lo.0..=hi.0 {
                for &id in self.cell_ids(ci, cj) {
                    if distance(center, self.points[id as usize]) <= radius_m {
                        out.push(id);
                    }
                }
            }
        }
        out
    }
}
