//! Whitney tiling of an open raster set by dyadic cubes whose side is
//! comparable to their distance from the boundary, built on an exact
//! Euclidean distance transform.

use ndarray::Array2;

use super::{DyadicCube, RasterDomain};
use crate::error::{Error, Result};

/// One-dimensional squared-distance transform (lower envelope of
/// parabolas).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        d[q] = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Exact Euclidean distance (between cell centers) from every cell to the
/// nearest cell where `feature` is true. Cells of the feature set get 0.
pub fn distance_transform(feature: &Array2<bool>) -> Array2<f64> {
    let (nx, ny) = feature.dim();
    // a finite stand-in for +infinity keeps the parabola envelope NaN-free
    let big = (2 * (nx * nx + ny * ny)) as f64;
    let mut work = Array2::from_shape_fn((nx, ny), |c| if feature[c] { 0.0 } else { big });
    let n = nx.max(ny);
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut f = vec![0.0; n];
    // columns
    for i in 0..nx {
        for j in 0..ny {
            f[j] = work[(i, j)];
        }
        edt_1d(&f[..ny], &mut d[..ny], &mut v[..ny], &mut z[..ny + 1]);
        for j in 0..ny {
            work[(i, j)] = d[j];
        }
    }
    // rows
    for j in 0..ny {
        for i in 0..nx {
            f[i] = work[(i, j)];
        }
        edt_1d(&f[..nx], &mut d[..nx], &mut v[..nx], &mut z[..nx + 1]);
        for i in 0..nx {
            work[(i, j)] = d[i];
        }
    }
    work.mapv(f64::sqrt)
}

/// Dyadic tiling of an open set with cube sides comparable to the
/// boundary distance.
#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    pub cubes: Vec<DyadicCube>,
    pub domain: RasterDomain,
    /// Distance of every cell to the complement of the tiled set.
    dt: Array2<f64>,
    /// Per-level minimum of `dt` over dyadic cubes.
    min_pyramid: Vec<Array2<f64>>,
}

impl WhitneyDecomposition {
    /// `dist(Q, boundary)`: minimum cell distance over the cube.
    pub fn cube_distance(&self, cube: &DyadicCube) -> f64 {
        let level = cube.level as usize;
        self.min_pyramid[level][(cube.anchor.0 >> level, cube.anchor.1 >> level)]
    }

    pub fn distance_field(&self) -> &Array2<f64> {
        &self.dt
    }

    /// Largest cube (ties broken lexicographically by center).
    pub fn largest_cube(&self) -> DyadicCube {
        *self
            .cubes
            .iter()
            .max_by(|a, b| {
                (a.level, std::cmp::Reverse(a.anchor)).cmp(&(b.level, std::cmp::Reverse(b.anchor)))
            })
            .expect("decomposition is never empty")
    }
}

fn min_pyramid(dt: &Array2<f64>, max_level: usize) -> Vec<Array2<f64>> {
    let n = dt.dim().0;
    let mut levels = vec![dt.clone()];
    for level in 1..=max_level {
        let m = n >> level;
        let prev = &levels[level - 1];
        levels.push(Array2::from_shape_fn((m, m), |(i, j)| {
            prev[(2 * i, 2 * j)]
                .min(prev[(2 * i + 1, 2 * j)])
                .min(prev[(2 * i, 2 * j + 1)])
                .min(prev[(2 * i + 1, 2 * j + 1)])
        }));
    }
    levels
}

fn count_pyramid(mask: &Array2<bool>, max_level: usize) -> Vec<Array2<u32>> {
    let n = mask.dim().0;
    let mut levels = vec![mask.mapv(|b| b as u32)];
    for level in 1..=max_level {
        let m = n >> level;
        let prev = &levels[level - 1];
        levels.push(Array2::from_shape_fn((m, m), |(i, j)| {
            prev[(2 * i, 2 * j)]
                + prev[(2 * i + 1, 2 * j)]
                + prev[(2 * i, 2 * j + 1)]
                + prev[(2 * i + 1, 2 * j + 1)]
        }));
    }
    levels
}

/// Quadtree refinement: a cube inside the set is accepted once its
/// boundary distance reaches its side (twice the L-infinity radius, the
/// comparability window then being `side <= dist <= 8 sqrt(2) side`);
/// unit cells inside the set are always accepted so the tiling is exact
/// at raster resolution.
fn whitney_engine(domain: &RasterDomain, dt: Array2<f64>) -> WhitneyDecomposition {
    let n = domain.n();
    let root_level = n.trailing_zeros() as usize;
    let mins = min_pyramid(&dt, root_level);
    let counts = count_pyramid(domain.mask(), root_level);

    let mut cubes = Vec::new();
    let mut stack = vec![DyadicCube::new(root_level as u32, (0, 0))];
    while let Some(cube) = stack.pop() {
        let level = cube.level as usize;
        let side = cube.side();
        let idx = (cube.anchor.0 >> level, cube.anchor.1 >> level);
        let occupied = counts[level][idx];
        if occupied == 0 {
            continue;
        }
        let full = occupied as usize == side * side;
        if full && (mins[level][idx] >= side as f64 || side == 1) {
            cubes.push(cube);
            continue;
        }
        if side == 1 {
            continue;
        }
        let half = side / 2;
        let (ax, ay) = cube.anchor;
        for (dx, dy) in [(0, 0), (half, 0), (0, half), (half, half)] {
            stack.push(DyadicCube::new(cube.level - 1, (ax + dx, ay + dy)));
        }
    }
    cubes.sort();
    WhitneyDecomposition {
        cubes,
        domain: domain.clone(),
        dt,
        min_pyramid: mins,
    }
}

/// Whitney decomposition of an open set that stays clear of the raster
/// border (otherwise the boundary distance is ill-defined).
pub fn whitney_decompose(domain: &RasterDomain) -> Result<WhitneyDecomposition> {
    if domain.touches_border() {
        return Err(Error::DomainTouchesBorder);
    }
    let dt = distance_transform(&domain.mask().mapv(|b| !b));
    Ok(whitney_engine(domain, dt))
}

/// Whitney decomposition allowing the set to reach the raster border;
/// the tiling is then a truncation of the unbounded picture and cubes
/// near the border may be smaller than the distance alone would allow.
pub fn whitney_decompose_truncated(domain: &RasterDomain) -> Result<WhitneyDecomposition> {
    let complement = domain.mask().mapv(|b| !b);
    if !complement.iter().any(|&b| b) {
        return Err(Error::EmptyDomain);
    }
    let dt = distance_transform(&complement);
    Ok(whitney_engine(domain, dt))
}

/// Whitney decomposition of the complement cells of `domain`, with the
/// boundary distance measured to `domain` itself (the raster border is
/// interior to the complement, not boundary).
pub fn whitney_decompose_complement(domain: &RasterDomain) -> Result<WhitneyDecomposition> {
    let exterior = domain.complement()?;
    let dt = distance_transform(domain.mask());
    Ok(whitney_engine(&exterior, dt))
}
