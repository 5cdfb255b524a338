//! Lower Matuszewska index estimation by pair-slope scan.
//!
//! The lower index at zero is the supremum of exponents `a` admitting
//! `phi(r2)/phi(r1) >= A (r2/r1)^a` for small radii. The computable proxy
//! used here is the infimum of log-log pair slopes over a geometric grid,
//! gated to pairs with ratio >= 4 to suppress local noise. The grid window
//! recedes with `decades` (at zero it spans [10^-2D, 10^-D]) so the estimate
//! converges onto the asymptotic index as `decades` grows.

use crate::error::KernelError;

pub const POINTS_PER_DECADE: usize = 64;
/// Minimum r2/r1 ratio admitted into the slope scan.
pub const PAIR_RATIO_GATE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    AtZero,
    AtInfinity,
}

/// Fitted lower-index inequality `phi(r2)/phi(r1) >= A (r2/r1)^index`.
#[derive(Debug, Clone)]
pub struct IndexEstimate {
    pub index: f64,
    /// Worst-case constant backed out over the sampled pairs.
    pub scale_a: f64,
    pub range: (f64, f64),
    pub location: Location,
}

impl IndexEstimate {
    /// Replays the fitted inequality on a profile over the stored range.
    pub fn holds_for<F: Fn(f64) -> f64>(&self, profile: F, rel_tol: f64) -> bool {
        let grid = sample_grid(self.range);
        let vals: Vec<f64> = grid.iter().map(|&r| profile(r)).collect();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                if grid[j] / grid[i] < PAIR_RATIO_GATE {
                    continue;
                }
                let lhs = vals[j] / vals[i];
                let rhs = self.scale_a * (grid[j] / grid[i]).powf(self.index);
                if lhs < rhs * (1.0 - rel_tol) {
                    return false;
                }
            }
        }
        true
    }
}

fn sample_grid(range: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = range;
    let decades = (hi / lo).log10();
    let count = (decades * POINTS_PER_DECADE as f64).round() as usize;
    (0..=count).map(|i| lo * 10f64.powf(decades * i as f64 / count as f64)).collect()
}

/// Window of the sampled grid for a given location and depth.
pub fn sample_range(location: Location, decades: u32) -> (f64, f64) {
    let d = decades as f64;
    match location {
        Location::AtZero => (10f64.powf(-2.0 * d), 10f64.powf(-d)),
        Location::AtInfinity => (10f64.powf(d), 10f64.powf(2.0 * d)),
    }
}

/// Estimates the lower Matuszewska index of `profile` at zero or infinity.
pub fn matuszewska_lower_index<F: Fn(f64) -> f64>(
    profile: F,
    location: Location,
    decades: u32,
) -> Result<IndexEstimate, KernelError> {
    assert!(decades >= 1);
    let range = sample_range(location, decades);
    let grid = sample_grid(range);
    let logs: Vec<f64> = grid.iter().map(|&r| r.ln()).collect();
    let mut vals = Vec::with_capacity(grid.len());
    for &r in &grid {
        let v = profile(r);
        if !(v > 0.0) || !v.is_finite() {
            return Err(KernelError::NonPositiveSample { rho: r });
        }
        vals.push(v.ln());
    }
    let mut index = f64::INFINITY;
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            if logs[j] - logs[i] < PAIR_RATIO_GATE.ln() - 1e-12 {
                continue;
            }
            let slope = (vals[j] - vals[i]) / (logs[j] - logs[i]);
            index = index.min(slope);
        }
    }
    // Back out the worst-case constant for the fitted exponent.
    let mut scale_a = f64::INFINITY;
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            if logs[j] - logs[i] < PAIR_RATIO_GATE.ln() - 1e-12 {
                continue;
            }
            let a = (vals[j] - vals[i] - index * (logs[j] - logs[i])).exp();
            scale_a = scale_a.min(a);
        }
    }
    Ok(IndexEstimate { index, scale_a, range, location })
}

/// The dual profile `r -> 1 / phi(1/r)`.
///
/// It has the same lower index at infinity as `phi` has at zero (and vice
/// versa); with the receding sample windows the two estimator runs evaluate
/// the profile at exactly mirrored radii.
pub fn dual_index_transform<F: Fn(f64) -> f64 + 'static>(profile: F) -> impl Fn(f64) -> f64 {
    move |r: f64| 1.0 / profile(1.0 / r)
}
