//! Averaging extension across Whitney tilings: every exterior cube
//! borrows the average of the function over a matched interior cube of at
//! least its size, extending BMO functions on a uniform domain to the
//! whole raster with controlled norm growth.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::whitney::WhitneyDecomposition;
use super::{DyadicCube, GridFunction, RasterDomain};
use crate::error::{Error, Result};
use crate::norms::bmo_scan;

/// One matched pair of the assignment.
#[derive(Debug, Clone, Copy)]
pub struct AssignedPair {
    pub exterior: DyadicCube,
    pub interior: DyadicCube,
    /// True when no interior cube of sufficient size existed and the
    /// largest cube was used instead.
    pub fallback: bool,
    /// Euclidean distance between the two cubes as sets.
    pub set_distance: f64,
    /// The exterior cube reaches into the border guard band (outer
    /// quarter of the raster); geometric assertions skip such pairs.
    pub in_guard_band: bool,
}

#[derive(Debug, Clone)]
pub struct JonesAssignment {
    pub pairs: Vec<AssignedPair>,
    /// Largest interior Whitney cube; the fallback target.
    pub q0: DyadicCube,
    /// Smallest `lambda` with the interior domain contained in
    /// `lambda * q0`.
    pub c_prime: f64,
    /// Largest mutual-containment constant over non-fallback pairs off
    /// the guard band: `T subset C'' Q'` and `Q' subset C'' T`.
    pub c_doubleprime: f64,
}

/// Per-level occupancy of cube anchors, for nearest-cube queries.
struct LevelIndex {
    side: usize,
    occupied: Array2<bool>,
}

fn build_level_index(cubes: &[DyadicCube], n: usize) -> BTreeMap<u32, LevelIndex> {
    let mut map: BTreeMap<u32, LevelIndex> = BTreeMap::new();
    for cube in cubes {
        let side = cube.side();
        let m = n / side;
        let entry = map.entry(cube.level).or_insert_with(|| LevelIndex {
            side,
            occupied: Array2::from_elem((m, m), false),
        });
        entry.occupied[(cube.anchor.0 / side, cube.anchor.1 / side)] = true;
    }
    map
}

/// Nearest occupied anchor of one level by cube-center distance,
/// ring-searched outward from the query point. Ties resolved by
/// lexicographic center.
fn nearest_in_level(index: &LevelIndex, query: (f64, f64)) -> Option<(f64, DyadicCube)> {
    let m = index.occupied.dim().0;
    let side = index.side as f64;
    let qi = ((query.0 / side - 0.5).round() as i64).clamp(0, m as i64 - 1);
    let qj = ((query.1 / side - 0.5).round() as i64).clamp(0, m as i64 - 1);
    let center_of = |i: i64, j: i64| ((i as f64 + 0.5) * side, (j as f64 + 0.5) * side);
    let dist2 = |i: i64, j: i64| {
        let (cx, cy) = center_of(i, j);
        (cx - query.0).powi(2) + (cy - query.1).powi(2)
    };
    let mut best: Option<(f64, (i64, i64))> = None;
    let mut ring = 0i64;
    loop {
        if ring as usize > 2 * m {
            break;
        }
        // once something is found, scan a few more rings so no closer
        // center hides on a later ring
        if let Some((bd2, _)) = best {
            let ring_min = (ring - 1).max(0) as f64 * side - side;
            if ring_min > 0.0 && ring_min * ring_min > bd2 {
                break;
            }
        }
        let lo_i = qi - ring;
        let hi_i = qi + ring;
        let lo_j = qj - ring;
        let hi_j = qj + ring;
        let mut visit = |i: i64, j: i64| {
            if i < 0 || j < 0 || i >= m as i64 || j >= m as i64 {
                return;
            }
            if !index.occupied[(i as usize, j as usize)] {
                return;
            }
            let d2 = dist2(i, j);
            let candidate = (d2, (i, j));
            best = Some(match best {
                None => candidate,
                Some(cur) => {
                    let better = d2 < cur.0 - 1e-9
                        || ((d2 - cur.0).abs() <= 1e-9 && center_of(i, j) < center_of(cur.1 .0, cur.1 .1));
                    if better {
                        candidate
                    } else {
                        cur
                    }
                }
            });
        };
        if ring == 0 {
            visit(qi, qj);
        } else {
            for i in lo_i..=hi_i {
                visit(i, lo_j);
                visit(i, hi_j);
            }
            for j in (lo_j + 1)..hi_j {
                visit(lo_i, j);
                visit(hi_i, j);
            }
        }
        ring += 1;
    }
    best.map(|(d2, (i, j))| {
        let level = (index.side as u32).trailing_zeros();
        (
            d2.sqrt(),
            DyadicCube::new(level, (i as usize * index.side, j as usize * index.side)),
        )
    })
}

// Border guard: 1/4 of the raster in total width, n/8 per side. Cubes
// touching it see the truncation of the unbounded picture and are
// excluded from the sharp geometric assertions.
fn in_guard_band(cube: &DyadicCube, n: usize) -> bool {
    let guard = n / 8;
    let s = cube.side();
    let (ax, ay) = cube.anchor;
    ax < guard || ay < guard || ax + s > n - guard || ay + s > n - guard
}

/// Matches every exterior Whitney cube with the closest interior cube of
/// at least its size (center-to-center distance, lexicographic
/// tie-break); falls back to the largest interior cube when none exists.
pub fn jones_assign(
    interior: &WhitneyDecomposition,
    exterior: &WhitneyDecomposition,
    bounded: bool,
) -> Result<JonesAssignment> {
    if interior.cubes.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let n = interior.domain.n();
    assert_eq!(n, exterior.domain.n(), "rasters must match");
    debug_assert!(
        interior
            .domain
            .mask()
            .iter()
            .zip(exterior.domain.mask().iter())
            .all(|(a, b)| a != b),
        "decompositions must cover complementary cell sets"
    );

    let q0 = interior.largest_cube();
    // smallest lambda with the interior domain inside lambda * q0
    let (cx, cy) = q0.center();
    let mut reach = 0.0f64;
    for (cell, &inside) in interior.domain.mask().indexed_iter() {
        if inside {
            let dx = (cell.0 as f64 + 0.5 - cx).abs();
            let dy = (cell.1 as f64 + 0.5 - cy).abs();
            reach = reach.max(dx.max(dy) + 0.5);
        }
    }
    let c_prime = 2.0 * reach / q0.side() as f64;

    let levels = build_level_index(&interior.cubes, n);
    let mut pairs = Vec::with_capacity(exterior.cubes.len());
    let mut c_doubleprime = 0.0f64;
    for q in &exterior.cubes {
        let center = q.center();
        let mut best: Option<(f64, DyadicCube)> = None;
        for (_, index) in levels.range(q.level..) {
            if let Some((d, cube)) = nearest_in_level(index, center) {
                best = Some(match best {
                    None => (d, cube),
                    Some(cur) => {
                        let better = d < cur.0 - 1e-9
                            || ((d - cur.0).abs() <= 1e-9 && cube.center() < cur.1.center());
                        if better {
                            (d, cube)
                        } else {
                            cur
                        }
                    }
                });
            }
        }
        let (interior_cube, fallback) = match best {
            Some((_, cube)) => (cube, false),
            None => {
                if !bounded {
                    // truncation artifact: the unbounded picture always has
                    // a large enough cube, the raster may not
                }
                (q0, true)
            }
        };
        let guard = in_guard_band(q, n);
        if !fallback && !guard {
            let lam = interior_cube
                .scale_to_contain(q)
                .max(q.scale_to_contain(&interior_cube));
            c_doubleprime = c_doubleprime.max(lam);
        }
        pairs.push(AssignedPair {
            exterior: *q,
            interior: interior_cube,
            fallback,
            set_distance: q.set_distance(&interior_cube),
            in_guard_band: guard,
        });
    }
    Ok(JonesAssignment {
        pairs,
        q0,
        c_prime,
        c_doubleprime,
    })
}

/// The extension produced by [`jones_extend`].
#[derive(Debug, Clone)]
pub struct JonesExtension {
    pub extended: GridFunction,
    /// Max of `|extension| / shifted_maximal(f)` over non-fallback
    /// exterior cells (the pointwise domination constant).
    pub maximal_bound_constant: f64,
    pub q0: DyadicCube,
    pub c_prime: f64,
    pub c_doubleprime: f64,
}

/// `f` on the domain, the matched interior average on every exterior
/// cube.
pub fn jones_extend(
    f: &GridFunction,
    domain: &RasterDomain,
    assignment: &JonesAssignment,
) -> Result<JonesExtension> {
    let n = domain.n();
    assert_eq!(f.dim(), (n, n), "function raster mismatch");
    let mut extended = Array2::from_shape_fn((n, n), |c| if domain.contains(c) { f[c] } else { 0.0 });
    let mut covered = domain.mask().clone();
    for pair in &assignment.pairs {
        let t = &pair.interior;
        let avg: f64 = t.cells().map(|c| f[c]).sum::<f64>() / (t.side() * t.side()) as f64;
        for cell in pair.exterior.cells() {
            extended[cell] = avg;
            covered[cell] = true;
        }
    }
    if let Some((cell, _)) = covered.indexed_iter().find(|(_, &c)| !c) {
        return Err(Error::IncompleteAssignment {
            level: 0,
            ax: cell.0 as i64,
            ay: cell.1 as i64,
        });
    }

    // pointwise domination by the (shifted dyadic) maximal function of
    // f extended by zero
    let zero_extended = Array2::from_shape_fn((n, n), |c| if domain.contains(c) { f[c] } else { 0.0 });
    let maximal = super::maximal::shifted_maximal(&zero_extended, n.trailing_zeros() as usize);
    let mut constant = 0.0f64;
    for pair in &assignment.pairs {
        if pair.fallback || pair.in_guard_band {
            continue;
        }
        for cell in pair.exterior.cells() {
            let m = maximal[cell];
            if m > 0.0 {
                constant = constant.max(extended[cell].abs() / m);
            }
        }
    }
    Ok(JonesExtension {
        extended,
        maximal_bound_constant: constant,
        q0: assignment.q0,
        c_prime: assignment.c_prime,
        c_doubleprime: assignment.c_doubleprime,
    })
}

/// Supremum of the mean oscillation over dyadic cubes (and the one-third
/// shifted lattices) fully contained in the domain; cube sides from
/// `n/2^max_depth` (never below 2 cells) up to the raster.
pub fn bmo_norm_domain(
    f: &GridFunction,
    domain: &RasterDomain,
    max_depth: usize,
) -> Result<f64> {
    let n = domain.n();
    assert_eq!(f.dim(), (n, n), "function raster mismatch");
    if max_depth < 1 || (1usize << max_depth) > n {
        return Err(Error::DepthTooFine { depth: max_depth, n });
    }
    // a cube of the minimum side must fit somewhere
    let fits = {
        let mask = domain.mask();
        let mut found = false;
        'outer: for i in 0..n - 1 {
            for j in 0..n - 1 {
                if mask[(i, j)] && mask[(i + 1, j)] && mask[(i, j + 1)] && mask[(i + 1, j + 1)] {
                    found = true;
                    break 'outer;
                }
            }
        }
        found
    };
    if !fits {
        return Err(Error::NoCubeFits);
    }
    Ok(bmo_scan(f, Some(domain.mask()), max_depth))
}

/// `bmo_norm_domain` at the finest admissible depth.
pub fn bmo_norm_domain_full(f: &GridFunction, domain: &RasterDomain) -> Result<f64> {
    let depth = domain.n().trailing_zeros() as usize - 1;
    bmo_norm_domain(f, domain, depth)
}
