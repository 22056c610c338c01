//! Dyadic maximal function and the stopping-time decomposition at a level
//! `alpha`: a bounded good part plus a bad part supported on the maximal
//! dyadic cubes where the average of `|f|` exceeds `alpha`.

use ndarray::Array2;

use super::{DyadicCube, GridFunction};
use crate::error::{Error, Result};

/// Per-level cube averages of `|f|`, level 0 = single cells.
fn average_pyramid(f: &GridFunction, max_level: usize) -> Vec<Array2<f64>> {
    let n = f.dim().0;
    let mut levels = Vec::with_capacity(max_level + 1);
    levels.push(f.mapv(f64::abs));
    for level in 1..=max_level {
        let m = n >> level;
        let prev = &levels[level - 1];
        let cur = Array2::from_shape_fn((m, m), |(i, j)| {
            0.25 * (prev[(2 * i, 2 * j)]
                + prev[(2 * i + 1, 2 * j)]
                + prev[(2 * i, 2 * j + 1)]
                + prev[(2 * i + 1, 2 * j + 1)])
        });
        levels.push(cur);
    }
    levels
}

/// Dyadic maximal function: at each cell the largest `|f|`-average over
/// the anchored dyadic cubes containing it, up to side `2^max_level`.
pub fn dyadic_maximal(f: &GridFunction, max_level: usize) -> GridFunction {
    let n = f.dim().0;
    assert!(n.is_power_of_two(), "raster side must be a power of two");
    let max_level = max_level.min(n.trailing_zeros() as usize);
    let pyramid = average_pyramid(f, max_level);
    Array2::from_shape_fn((n, n), |(i, j)| {
        let mut best = 0.0f64;
        for (level, avgs) in pyramid.iter().enumerate() {
            best = best.max(avgs[(i >> level, j >> level)]);
        }
        best
    })
}

/// Maximal function over the anchored dyadic lattice and its three
/// one-third-shifted translates (cubes clipped to the raster). A cheap
/// stand-in for the uncentered maximal function, comparable within a
/// dimensional constant.
pub fn shifted_maximal(f: &GridFunction, max_level: usize) -> GridFunction {
    let n = f.dim().0;
    let max_level = max_level.min(n.trailing_zeros() as usize);
    let abs = f.mapv(f64::abs);
    let sat = crate::norms::summed_area(&abs, |v| v);
    let s = crate::norms::third_shift(n);
    let mut out = dyadic_maximal(f, max_level);
    for (sx, sy) in [(s, 0usize), (0, s), (s, s)] {
        for level in 0..=max_level {
            let side = 1usize << level;
            let mut x0 = sx % side;
            while x0 + side <= n {
                let mut y0 = sy % side;
                while y0 + side <= n {
                    let avg =
                        crate::norms::rect_sum(&sat, x0, y0, side) / (side * side) as f64;
                    for i in x0..x0 + side {
                        for j in y0..y0 + side {
                            if avg > out[(i, j)] {
                                out[(i, j)] = avg;
                            }
                        }
                    }
                    y0 += side;
                }
                x0 += side;
            }
        }
    }
    out
}

/// Split of `f` at level `alpha`: `f = good + bad` with the good part
/// bounded by `alpha` and the bad part supported on the maximal dyadic
/// cubes of average above `alpha`.
#[derive(Debug, Clone)]
pub struct CZDecomposition {
    pub alpha: f64,
    pub good: GridFunction,
    pub bad: GridFunction,
    pub bad_cubes: Vec<DyadicCube>,
    /// `|{Mf > alpha}|` in cells; equals the total bad-cube area.
    pub level_set_cells: usize,
}

impl CZDecomposition {
    /// Average of `|f|` over a bad cube, recomputed from the parts.
    pub fn bad_cube_average(&self, cube: &DyadicCube) -> f64 {
        let sum: f64 = cube
            .cells()
            .map(|c| (self.good[c] + self.bad[c]).abs())
            .sum();
        sum / (cube.side() * cube.side()) as f64
    }
}

/// Stopping-time decomposition from the root: descend until the average
/// of `|f|` over the cube drops to `alpha` or below.
pub fn cz_decompose(f: &GridFunction, alpha: f64) -> Result<CZDecomposition> {
    if !(alpha > 0.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "(0, inf)",
        });
    }
    let n = f.dim().0;
    assert!(n.is_power_of_two(), "raster side must be a power of two");
    let root_level = n.trailing_zeros() as usize;
    let pyramid = average_pyramid(f, root_level);

    let mut bad_cubes = Vec::new();
    let mut stack = vec![DyadicCube::new(root_level as u32, (0, 0))];
    while let Some(cube) = stack.pop() {
        let level = cube.level as usize;
        let avg = pyramid[level][(cube.anchor.0 >> level, cube.anchor.1 >> level)];
        if avg > alpha {
            bad_cubes.push(cube);
            continue;
        }
        if level == 0 {
            continue;
        }
        let half = cube.side() / 2;
        let (ax, ay) = cube.anchor;
        for (dx, dy) in [(0, 0), (half, 0), (0, half), (half, half)] {
            stack.push(DyadicCube::new(cube.level - 1, (ax + dx, ay + dy)));
        }
    }
    bad_cubes.sort();

    let mut bad_mask = Array2::from_elem((n, n), false);
    for cube in &bad_cubes {
        for cell in cube.cells() {
            bad_mask[cell] = true;
        }
    }
    let good = Array2::from_shape_fn((n, n), |c| if bad_mask[c] { 0.0 } else { f[c] });
    let bad = Array2::from_shape_fn((n, n), |c| if bad_mask[c] { f[c] } else { 0.0 });
    let level_set_cells = bad_mask.iter().filter(|&&b| b).count();

    // Chebyshev with p0 = 2 holds exactly for the stopping-time cubes
    let l2_sq: f64 = f.iter().map(|v| v * v).sum();
    debug_assert!(
        (level_set_cells as f64) * alpha * alpha <= l2_sq * (1.0 + 1e-12),
        "stopping-time cubes violate the Chebyshev bound"
    );

    Ok(CZDecomposition {
        alpha,
        good,
        bad,
        bad_cubes,
        level_set_cells,
    })
}
