//! The nonlocal seminorm `[f] = (sum_k m_k sum_j |f_{j+k} - f_j|^p h^d)^{1/p}`
//! and the norm built from it.
//!
//! Functions vanish outside the box. The inner sum runs over all of Z^d, so a
//! pair with exactly one endpoint inside the box is counted twice (once per
//! orientation); restricting j to the box and adding the mirrored
//! one-sided term reproduces that exactly. Offsets beyond the explicit range
//! cannot connect two in-box cells, so the ring enters through 2 ||f||_p^p
//! exactly and the final tail through the upper-bound surrogate
//! 2^{p-1} * 2 * tail_mass * ||f||_p^p, reported separately.

use rayon::prelude::*;

use crate::error::DiscretizationError;
use crate::grid::{GridFunction, SetMask};
use crate::masses::KernelCellMasses;

/// Decomposition of the seminorm's p-th power.
#[derive(Debug, Clone, Copy)]
pub struct SeminormParts {
    /// Pairs with both endpoints in the box.
    pub pair_pow: f64,
    /// Pairs with one endpoint outside (within the explicit offsets).
    pub open_pow: f64,
    /// Ring zone, exactly `2 ring_mass ||f||_p^p`.
    pub ring_pow: f64,
    /// Far-field surrogate `2^p tail_mass ||f||_p^p`.
    pub tail_pow: f64,
}

impl SeminormParts {
    pub fn total_pow(&self) -> f64 {
        self.pair_pow + self.open_pow + self.ring_pow + self.tail_pow
    }

    pub fn value(&self, p: f64) -> f64 {
        self.total_pow().powf(1.0 / p)
    }

    pub fn tail_fraction(&self) -> f64 {
        let t = self.total_pow();
        if t == 0.0 {
            0.0
        } else {
            self.tail_pow / t
        }
    }
}

fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Seminorm p-th power with its zone decomposition.
pub fn seminorm_parts(
    f: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
) -> Result<SeminormParts, DiscretizationError> {
    masses.geometry_matches(&f.geom)?;
    assert!(p >= 1.0);
    let hv = f.geom.cell_volume();
    let lp_pow = f.lp_pow(p);
    let (pair, open) = match f.geom.d {
        1 => pair_sums_1d(f, masses, p),
        _ => pair_sums_2d(f, masses, p),
    };
    Ok(SeminormParts {
        pair_pow: pair * hv,
        open_pow: open * hv,
        ring_pow: 2.0 * masses.ring_mass * lp_pow,
        tail_pow: 2f64.powf(p - 1.0) * 2.0 * masses.tail_mass * lp_pow,
    })
}

fn pair_sums_1d(f: &GridFunction, masses: &KernelCellMasses, p: f64) -> (f64, f64) {
    let n = f.geom.n;
    let v = &f.values;
    // Prefix sums of |f|^p for the one-sided (out-of-box) terms.
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + pow_p(v[j], p);
    }
    let total_pow = prefix[n];
    let sums: Vec<(f64, f64)> = (1..=masses.k_near as i64)
        .into_par_iter()
        .map(|k| {
            let m = masses.mass_1d(k);
            if m == 0.0 {
                return (0.0, 0.0);
            }
            let ku = k as usize;
            let mut pair = 0.0;
            for j in 0..n.saturating_sub(ku) {
                pair += pow_p(v[j + ku] - v[j], p);
            }
            // j + k out of the box, both orientations.
            let head = prefix[ku.min(n)];
            let tail = total_pow - prefix[n - ku.min(n)];
            (2.0 * m * pair, 2.0 * m * (head + tail))
        })
        .collect();
    sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1))
}

fn pair_sums_2d(f: &GridFunction, masses: &KernelCellMasses, p: f64) -> (f64, f64) {
    let n = f.geom.n as i64;
    let v = &f.values;
    // 2D prefix table of |f|^p.
    let nn = f.geom.n;
    let mut prefix = vec![0.0; (nn + 1) * (nn + 1)];
    for y in 0..nn {
        for x in 0..nn {
            prefix[(y + 1) * (nn + 1) + (x + 1)] = pow_p(v[y * nn + x], p)
                + prefix[y * (nn + 1) + (x + 1)]
                + prefix[(y + 1) * (nn + 1) + x]
                - prefix[y * (nn + 1) + x];
        }
    }
    let total_pow = prefix[nn * (nn + 1) + nn];
    let rect = |x0: i64, y0: i64, x1: i64, y1: i64| -> f64 {
        // inclusive cell range, clipped
        let (x0, y0) = (x0.max(0), y0.max(0));
        let (x1, y1) = (x1.min(n - 1), y1.min(n - 1));
        if x0 > x1 || y0 > y1 {
            return 0.0;
        }
        let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
        prefix[(y1 + 1) * (nn + 1) + (x1 + 1)] - prefix[y0 * (nn + 1) + (x1 + 1)]
            - prefix[(y1 + 1) * (nn + 1) + x0]
            + prefix[y0 * (nn + 1) + x0]
    };
    // Half of the symmetric offset set: ky > 0, or ky == 0 and kx > 0.
    let kn = masses.k_near as i64;
    let offsets: Vec<(i64, i64)> = (0..=kn)
        .flat_map(|ky| {
            let lo = if ky == 0 { 1 } else { -kn };
            (lo..=kn).map(move |kx| (kx, ky))
        })
        .collect();
    let sums: Vec<(f64, f64)> = offsets
        .into_par_iter()
        .map(|(kx, ky)| {
            let m = masses.mass_2d(kx, ky);
            if m == 0.0 {
                return (0.0, 0.0);
            }
            let mut pair = 0.0;
            let y_lo = 0.max(-ky);
            let y_hi = (n - 1).min(n - 1 - ky);
            let x_lo = 0.max(-kx);
            let x_hi = (n - 1).min(n - 1 - kx);
            for jy in y_lo..=y_hi {
                let row = (jy * n) as usize;
                let row_k = ((jy + ky) * n + kx) as usize;
                for jx in x_lo..=x_hi {
                    pair += pow_p(v[row_k + jx as usize] - v[row + jx as usize], p);
                }
            }
            // |f|^p over cells whose +k (resp. -k) neighbor leaves the box.
            let in_plus = rect(x_lo, y_lo, x_hi, y_hi);
            let in_minus = rect(0.max(kx), 0.max(ky), (n - 1).min(n - 1 + kx), (n - 1).min(n - 1 + ky));
            let open = (total_pow - in_plus) + (total_pow - in_minus);
            (2.0 * m * pair, 2.0 * m * open)
        })
        .collect();
    sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1))
}

/// The seminorm value `(total p-power)^{1/p}`.
pub fn seminorm(
    f: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
) -> Result<f64, DiscretizationError> {
    Ok(seminorm_parts(f, masses, p)?.value(p))
}

/// `||f||_p + [f]`.
pub fn sobolev_norm(
    f: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
) -> Result<f64, DiscretizationError> {
    Ok(f.lp_norm(p) + seminorm(f, masses, p)?)
}

/// `||f||_p^p + [f]^p`, the p-power objective used by the capacity solver.
pub fn sobolev_pow(
    f: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
) -> Result<f64, DiscretizationError> {
    Ok(f.lp_pow(p) + seminorm_parts(f, masses, p)?.total_pow())
}

/// Pair sum restricted to a region: both endpoints must lie in `region`.
///
/// Covers exactly the double integral over region x region; no boundary, ring
/// or tail terms apply. The explicit offsets must span the region's diameter
/// (guaranteed when the masses were built with k_cut >= n).
pub fn restricted_seminorm_pow(
    f: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
    region: &SetMask,
) -> Result<f64, DiscretizationError> {
    masses.geometry_matches(&f.geom)?;
    masses.geometry_matches(&region.geom)?;
    let hv = f.geom.cell_volume();
    let n = f.geom.n as i64;
    let v = &f.values;
    let inside = &region.cells;
    let total: f64 = match f.geom.d {
        1 => (1..=masses.k_near as i64)
            .into_par_iter()
            .map(|k| {
                let m = masses.mass_1d(k);
                if m == 0.0 {
                    return 0.0;
                }
                let ku = k as usize;
                let mut acc = 0.0;
                for j in 0..f.geom.n.saturating_sub(ku) {
                    if inside[j] && inside[j + ku] {
                        acc += pow_p(v[j + ku] - v[j], p);
                    }
                }
                2.0 * m * acc
            })
            .sum(),
        _ => {
            let kn = masses.k_near as i64;
            let offsets: Vec<(i64, i64)> = (0..=kn)
                .flat_map(|ky| {
                    let lo = if ky == 0 { 1 } else { -kn };
                    (lo..=kn).map(move |kx| (kx, ky))
                })
                .collect();
            offsets
                .into_par_iter()
                .map(|(kx, ky)| {
                    let m = masses.mass_2d(kx, ky);
                    if m == 0.0 {
                        return 0.0;
                    }
                    let mut acc = 0.0;
                    for jy in 0.max(-ky)..=(n - 1).min(n - 1 - ky) {
                        for jx in 0.max(-kx)..=(n - 1).min(n - 1 - kx) {
                            let a = (jy * n + jx) as usize;
                            let b = ((jy + ky) * n + jx + kx) as usize;
                            if inside[a] && inside[b] {
                                acc += pow_p(v[b] - v[a], p);
                            }
                        }
                    }
                    2.0 * m * acc
                })
                .sum()
        }
    };
    Ok(total * hv)
}

/// Norms of the pointwise max and min; the exchange inequality
/// `J(max) + J(min) <= J(f1) + J(f2)` holds pointwise and is asserted here.
pub fn minmax_pair(
    f1: &GridFunction,
    f2: &GridFunction,
    masses: &KernelCellMasses,
    p: f64,
) -> Result<(f64, f64), DiscretizationError> {
    let (hi, lo) = f1.pointwise_minmax(f2)?;
    let j_hi = sobolev_pow(&hi, masses, p)?;
    let j_lo = sobolev_pow(&lo, masses, p)?;
    let j_1 = sobolev_pow(f1, masses, p)?;
    let j_2 = sobolev_pow(f2, masses, p)?;
    if j_hi + j_lo > j_1 + j_2 {
        return Err(DiscretizationError::InvalidGrid(format!(
            "min/max exchange inequality violated: {} > {}",
            j_hi + j_lo,
            j_1 + j_2
        )));
    }
    Ok((sobolev_norm(&hi, masses, p)?, sobolev_norm(&lo, masses, p)?))
}
