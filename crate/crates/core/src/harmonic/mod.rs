//! Dyadic decomposition machinery on square rasters: maximal functions,
//! Calderon-Zygmund stopping-time decompositions, Whitney tilings of open
//! sets and the averaging extension operator for uniform domains.
//!
//! Rasters carry the lattice measure (every cell has volume one) and
//! dyadic cubes have side `2^level` cells anchored at multiples of the
//! side.

mod jones;
mod maximal;
mod whitney;

pub use jones::{bmo_norm_domain, jones_assign, jones_extend, JonesAssignment, JonesExtension};
pub use maximal::{cz_decompose, dyadic_maximal, shifted_maximal, CZDecomposition};
pub use whitney::{
    distance_transform, whitney_decompose, whitney_decompose_complement, whitney_decompose_truncated,
    WhitneyDecomposition,
};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Real samples on a square raster with the lattice measure.
pub type GridFunction = Array2<f64>;

/// Axis-aligned dyadic cube: side `2^level` cells, anchor a multiple of
/// the side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: u32,
    /// Anchor cell (lowest corner), in cells.
    pub anchor: (usize, usize),
}

impl DyadicCube {
    pub fn new(level: u32, anchor: (usize, usize)) -> Self {
        let side = 1usize << level;
        debug_assert!(anchor.0 % side == 0 && anchor.1 % side == 0, "anchor off lattice");
        Self { level, anchor }
    }

    /// Side length in cells.
    pub fn side(&self) -> usize {
        1usize << self.level
    }

    /// Center in cell coordinates (cell centers at integers + 1/2).
    pub fn center(&self) -> (f64, f64) {
        let s = self.side() as f64;
        (self.anchor.0 as f64 + s / 2.0, self.anchor.1 as f64 + s / 2.0)
    }

    pub fn contains_cell(&self, cell: (usize, usize)) -> bool {
        let s = self.side();
        cell.0 >= self.anchor.0
            && cell.0 < self.anchor.0 + s
            && cell.1 >= self.anchor.1
            && cell.1 < self.anchor.1 + s
    }

    /// The dyadic parent (anchor rounded down to the doubled lattice).
    pub fn parent(&self) -> DyadicCube {
        let s = self.side() * 2;
        DyadicCube {
            level: self.level + 1,
            anchor: (self.anchor.0 / s * s, self.anchor.1 / s * s),
        }
    }

    /// Cells of the cube, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = self.side();
        let (ax, ay) = self.anchor;
        (ax..ax + s).flat_map(move |i| (ay..ay + s).map(move |j| (i, j)))
    }

    /// Smallest `lambda` such that `other` is contained in `lambda * self`
    /// (same center, `lambda` times the side).
    pub fn scale_to_contain(&self, other: &DyadicCube) -> f64 {
        let (cx, cy) = self.center();
        let (ox, oy) = other.center();
        let half_other = other.side() as f64 / 2.0;
        let reach = (cx - ox).abs().max((cy - oy).abs()) + half_other;
        2.0 * reach / self.side() as f64
    }

    /// Euclidean distance between the two closed cubes (0 if they touch).
    pub fn set_distance(&self, other: &DyadicCube) -> f64 {
        let gap = |a0: usize, asz: usize, b0: usize, bsz: usize| -> f64 {
            let a1 = a0 + asz;
            let b1 = b0 + bsz;
            if b0 > a1 {
                (b0 - a1) as f64
            } else if a0 > b1 {
                (a0 - b1) as f64
            } else {
                0.0
            }
        };
        let dx = gap(self.anchor.0, self.side(), other.anchor.0, other.side());
        let dy = gap(self.anchor.1, self.side(), other.anchor.1, other.side());
        (dx * dx + dy * dy).sqrt()
    }

    /// CSV row `level,ax,ay`.
    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.level, self.anchor.0, self.anchor.1)
    }
}

/// Serializes a cube list as CSV `level,ax,ay` rows with a header.
pub fn cubes_to_csv(cubes: &[DyadicCube]) -> String {
    let mut out = String::from("level,ax,ay\n");
    for c in cubes {
        out.push_str(&c.csv_row());
        out.push('\n');
    }
    out
}

pub fn cubes_from_csv(text: &str) -> Result<Vec<DyadicCube>> {
    let mut cubes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.starts_with("level") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::MalformedHeader(format!("cube row {line:?}")));
        }
        let level: u32 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("cube row {line:?}")))?;
        let ax: usize = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("cube row {line:?}")))?;
        let ay: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("cube row {line:?}")))?;
        cubes.push(DyadicCube::new(level, (ax, ay)));
    }
    Ok(cubes)
}

/// Boolean mask marking an open set on a square power-of-two raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterDomain {
    mask: Array2<bool>,
}

impl RasterDomain {
    pub fn new(mask: Array2<bool>) -> Result<Self> {
        let (nx, ny) = mask.dim();
        if nx != ny || !nx.is_power_of_two() || nx < 4 {
            return Err(Error::InvalidGridSize(nx.max(ny)));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { mask })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        Self::new(Array2::from_shape_fn((n, n), |(i, j)| f(i, j)))
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::from_fn(n, |_, _| true)
    }

    pub fn n(&self) -> usize {
        self.mask.dim().0
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.mask[cell]
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Complement cells within the raster.
    pub fn complement(&self) -> Result<RasterDomain> {
        RasterDomain::new(self.mask.mapv(|b| !b))
    }

    pub fn touches_border(&self) -> bool {
        let n = self.n();
        (0..n).any(|i| {
            self.mask[(i, 0)] || self.mask[(i, n - 1)] || self.mask[(0, i)] || self.mask[(n - 1, i)]
        })
    }

    /// Whole raster as the root cube.
    pub fn root_cube(&self) -> DyadicCube {
        DyadicCube::new(self.n().trailing_zeros(), (0, 0))
    }
}

/// `(sum |f|^p)^{1/p}` with the lattice measure.
pub fn raster_lp(f: &GridFunction, p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    f.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}
