//! Integrated kernel masses per grid offset.
//!
//! The seminorm quadrature never evaluates the kernel pointwise: each lattice
//! offset k carries the mass `m_k = int_{cell_k} nu(h) dh`, so the scheme
//! stays stable for kernels that are singular at the origin and preserves the
//! total mass per annulus. Three zones cover the plane:
//!
//!   * explicit offsets with |k|_inf <= k_near (k_near caps at n, the box
//!     diameter, beyond which no grid pair exists);
//!   * a "ring" between the near zone and the far cutoff radius k_cut * h;
//!     pairs there have at most one endpoint in the box, so the ring enters
//!     every evaluation exactly through the L^p mass;
//!   * the remainder beyond the cutoff, kept as `tail_mass` and applied via
//!     the upper-bound surrogate (a+b)^p <= 2^{p-1}(a^p + b^p).
//!
//! The origin cell needs care: its raw mass may be infinite. The cell stores
//! the mass of the cell minus a centered sub-cell of side h/2^6, and the full
//! cell's p-th moment is redistributed onto the axis neighbors so that the
//! p-moment of the discretization matches the kernel's.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::error::{DiscretizationError, KernelError};
use crate::grid::GridGeometry;
use crate::kernel::{self, KernelSpec};
use crate::quad;

const CELL_TOL: f64 = 1e-10;
/// The origin sub-cell has side h / 2^ORIGIN_DEPTH.
const ORIGIN_DEPTH: u32 = 6;

#[derive(Debug, Clone)]
pub struct KernelCellMasses {
    pub geom: GridGeometry,
    /// Integrability order the origin moment rule was built for.
    pub p: f64,
    pub kernel_hash: u64,
    /// Explicit offsets cover |k|_inf <= k_near.
    pub k_near: usize,
    /// Far cutoff in cells; the covered radius is k_cut * h.
    pub k_cut: usize,
    /// Offset masses; 1D length 2*k_near+1, 2D (2*k_near+1)^2 row-major.
    masses: Vec<f64>,
    /// Mass between the near zone and the cutoff radius.
    pub ring_mass: f64,
    /// Kernel mass beyond everything covered above.
    pub tail_mass: f64,
    /// p-th moment of the origin cell, redistributed onto axis neighbors.
    pub origin_moment: f64,
    /// Raw mass of the origin cell minus the sub-cell (kept for accounting).
    pub origin_cell_mass: f64,
    /// Sum of the explicit off-origin masses.
    pub total_near_mass: f64,
}

impl KernelCellMasses {
    pub fn mass_1d(&self, k: i64) -> f64 {
        let kn = self.k_near as i64;
        debug_assert!(k.abs() <= kn);
        self.masses[(k + kn) as usize]
    }

    pub fn mass_2d(&self, kx: i64, ky: i64) -> f64 {
        let kn = self.k_near as i64;
        let w = 2 * self.k_near + 1;
        debug_assert!(kx.abs() <= kn && ky.abs() <= kn);
        self.masses[(ky + kn) as usize * w + (kx + kn) as usize]
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.k_cut as f64 * self.geom.h()
    }

    pub fn near_radius(&self) -> f64 {
        (self.k_near as f64 + 0.5) * self.geom.h()
    }

    /// Sum of explicit masses at Euclidean offset length >= r, plus ring and
    /// tail. Approximates L(r) for r below the near radius.
    pub fn tail_sum_from(&self, r: f64) -> f64 {
        let h = self.geom.h();
        let kn = self.k_near as i64;
        let mut sum = self.ring_mass + self.tail_mass;
        match self.geom.d {
            1 => {
                for k in -kn..=kn {
                    if k != 0 && (k.abs() as f64) * h >= r {
                        sum += self.mass_1d(k);
                    }
                }
            }
            _ => {
                for ky in -kn..=kn {
                    for kx in -kn..=kn {
                        if (kx, ky) == (0, 0) {
                            continue;
                        }
                        if ((kx * kx + ky * ky) as f64).sqrt() * h >= r {
                            sum += self.mass_2d(kx, ky);
                        }
                    }
                }
            }
        }
        sum
    }

    /// Relative deviation between the discretized concentration function at
    /// scale `r` and the kernel's h_p(r). The origin moment enters through
    /// the redistributed axis masses, so no separate term appears.
    pub fn hp_consistency(&self, kernel: &KernelSpec, r: f64) -> Result<f64, DiscretizationError> {
        let h = self.geom.h();
        let p = self.p;
        let kn = self.k_near as i64;
        let mut proxy = self.ring_mass + self.tail_mass;
        match self.geom.d {
            1 => {
                for k in -kn..=kn {
                    if k == 0 {
                        continue;
                    }
                    let len = (k.abs() as f64) * h;
                    proxy += self.mass_1d(k) * (len / r).powf(p).min(1.0);
                }
            }
            _ => {
                for ky in -kn..=kn {
                    for kx in -kn..=kn {
                        if (kx, ky) == (0, 0) {
                            continue;
                        }
                        let len = ((kx * kx + ky * ky) as f64).sqrt() * h;
                        proxy += self.mass_2d(kx, ky) * (len / r).powf(p).min(1.0);
                    }
                }
            }
        }
        let hp = kernel::concentration_hp(kernel, r).map_err(DiscretizationError::Kernel)?;
        Ok((proxy - hp).abs() / hp)
    }

    pub fn geometry_matches(&self, geom: &GridGeometry) -> Result<(), DiscretizationError> {
        if self.geom != *geom {
            return Err(DiscretizationError::GeometryMismatch(format!(
                "masses built for {:?}, got {:?}",
                self.geom, geom
            )));
        }
        Ok(())
    }

    /// Binary sidecar: magic, geometry key, then the raw mass array.
    pub fn save(&self, path: &Path) -> Result<(), DiscretizationError> {
        let mut buf = Vec::with_capacity(64 + 8 * self.masses.len());
        buf.extend_from_slice(b"NUCAPMASS1");
        buf.extend_from_slice(&(self.geom.d as u64).to_le_bytes());
        buf.extend_from_slice(&(self.geom.n as u64).to_le_bytes());
        buf.extend_from_slice(&self.geom.extent.to_le_bytes());
        buf.extend_from_slice(&self.p.to_le_bytes());
        buf.extend_from_slice(&self.kernel_hash.to_le_bytes());
        buf.extend_from_slice(&(self.k_near as u64).to_le_bytes());
        buf.extend_from_slice(&(self.k_cut as u64).to_le_bytes());
        buf.extend_from_slice(&self.ring_mass.to_le_bytes());
        buf.extend_from_slice(&self.tail_mass.to_le_bytes());
        buf.extend_from_slice(&self.origin_moment.to_le_bytes());
        buf.extend_from_slice(&self.origin_cell_mass.to_le_bytes());
        buf.extend_from_slice(&self.total_near_mass.to_le_bytes());
        buf.extend_from_slice(&(self.masses.len() as u64).to_le_bytes());
        for m in &self.masses {
            buf.extend_from_slice(&m.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| DiscretizationError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DiscretizationError> {
        let buf = fs::read(path).map_err(|e| DiscretizationError::Io(e.to_string()))?;
        if buf.len() < 10 + 13 * 8 || &buf[..10] != b"NUCAPMASS1" {
            return Err(DiscretizationError::Io("not a nucap mass sidecar".into()));
        }
        let mut pos = 10usize;
        let mut word = || {
            let v = u64::from_le_bytes(buf[pos..pos + 8].try_into().unwrap());
            pos += 8;
            v
        };
        let d = word() as u32;
        let n = word() as usize;
        let extent = f64::from_bits(word());
        let p = f64::from_bits(word());
        let kernel_hash = word();
        let k_near = word() as usize;
        let k_cut = word() as usize;
        let ring_mass = f64::from_bits(word());
        let tail_mass = f64::from_bits(word());
        let origin_moment = f64::from_bits(word());
        let origin_cell_mass = f64::from_bits(word());
        let total_near_mass = f64::from_bits(word());
        let count = word() as usize;
        if buf.len() != pos + 8 * count {
            return Err(DiscretizationError::Io("truncated mass sidecar".into()));
        }
        let mut masses = Vec::with_capacity(count);
        for i in 0..count {
            masses.push(f64::from_le_bytes(buf[pos + 8 * i..pos + 8 * i + 8].try_into().unwrap()));
        }
        let geom = GridGeometry::new(d, extent, n)?;
        Ok(Self {
            geom,
            p,
            kernel_hash,
            k_near,
            k_cut,
            masses,
            ring_mass,
            tail_mass,
            origin_moment,
            origin_cell_mass,
            total_near_mass,
        })
    }

    /// Conventional cache file name keyed by kernel hash and geometry.
    pub fn cache_name(kernel_hash: u64, geom: &GridGeometry, k_cut: usize) -> String {
        format!(
            "masses-{kernel_hash:016x}-d{}-n{}-x{}-k{}.bin",
            geom.d, geom.n, geom.extent, k_cut
        )
    }
}

/// Far cutoff (in cells) putting the covered radius at `factor * extent`.
pub fn far_cutoff_cells(geom: &GridGeometry, factor: f64) -> usize {
    ((factor * geom.extent) / geom.h()).ceil() as usize
}

/// Builds the cell masses for a kernel on a grid geometry.
///
/// `k_cut` is the far cutoff in cells; explicit offsets stop at
/// `min(k_cut, n)` and the remainder up to `k_cut * h` becomes the ring.
pub fn build_cell_masses(
    kernel: &KernelSpec,
    geom: GridGeometry,
    k_cut: usize,
) -> Result<KernelCellMasses, DiscretizationError> {
    if kernel.d != geom.d {
        return Err(DiscretizationError::GeometryMismatch(format!(
            "kernel dimension {} vs grid dimension {}",
            kernel.d, geom.d
        )));
    }
    let h = geom.h();
    let k_near = k_cut.min(geom.n);
    match geom.d {
        1 => build_1d(kernel, geom, h, k_near, k_cut),
        _ => build_2d(kernel, geom, h, k_near, k_cut),
    }
}

fn build_1d(
    kernel: &KernelSpec,
    geom: GridGeometry,
    h: f64,
    k_near: usize,
    k_cut: usize,
) -> Result<KernelCellMasses, DiscretizationError> {
    let profile = |rho: f64| kernel.profile(rho);
    let side = 2 * k_near + 1;
    let mut masses = vec![0.0; side];
    let mut total_near = 0.0;
    for k in 1..=k_near {
        let a = (k as f64 - 0.5) * h;
        let b = (k as f64 + 0.5) * h;
        let m = quad::adaptive(&profile, a, b, CELL_TOL, 0.0, 400)
            .map_err(DiscretizationError::Kernel)?
            .max(0.0);
        masses[k_near + k] = m;
        masses[k_near - k] = m;
        total_near += 2.0 * m;
    }
    // Origin cell: p-th moment over the full cell, annulus mass for accounting.
    let p = kernel.p;
    let moment_half = quad::require_converged(
        quad::integrate_to_zero(&|rho: f64| rho.powf(p) * profile(rho), 0.5 * h, CELL_TOL)
            .map_err(origin_budget)?,
    )
    .map_err(origin_budget)?;
    let origin_moment = 2.0 * moment_half;
    // Sub-cell of side h/2^6, so half-side h/2^7.
    let sub_half = h / 2f64.powi(ORIGIN_DEPTH as i32 + 1);
    let origin_cell_mass = 2.0
        * quad::adaptive(&profile, sub_half, 0.5 * h, CELL_TOL, 0.0, 400)
            .map_err(DiscretizationError::Kernel)?;
    // Moment-preserving redistribution onto the two axis neighbors.
    let add = origin_moment / (2.0 * h.powf(p));
    masses[k_near + 1] += add;
    masses[k_near - 1] += add;
    total_near += 2.0 * add;

    let near_edge = (k_near as f64 + 0.5) * h;
    let cutoff = (k_cut as f64).max(k_near as f64 + 0.5) * h;
    let ring_mass = if cutoff > near_edge {
        2.0 * quad::adaptive(&profile, near_edge, cutoff, CELL_TOL, 0.0, 400)
            .map_err(DiscretizationError::Kernel)?
    } else {
        0.0
    };
    let tail_mass = 2.0
        * quad::require_converged(
            quad::integrate_to_inf(&profile, cutoff, CELL_TOL)
                .map_err(DiscretizationError::Kernel)?,
        )
        .map_err(DiscretizationError::Kernel)?;
    Ok(KernelCellMasses {
        geom,
        p,
        kernel_hash: kernel.hash(),
        k_near,
        k_cut,
        masses,
        ring_mass,
        tail_mass,
        origin_moment,
        origin_cell_mass,
        total_near_mass: total_near,
    })
}

fn origin_budget(e: KernelError) -> DiscretizationError {
    match e {
        KernelError::QuadratureFailure { .. } | KernelError::DivergentTail => {
            DiscretizationError::SingularCellBudget { target: 1e-4, reached: f64::NAN }
        }
        other => DiscretizationError::Kernel(other),
    }
}

fn build_2d(
    kernel: &KernelSpec,
    geom: GridGeometry,
    h: f64,
    k_near: usize,
    k_cut: usize,
) -> Result<KernelCellMasses, DiscretizationError> {
    let profile = |rho: f64| kernel.profile(rho);
    let side = 2 * k_near + 1;
    let mut masses = vec![0.0; side * side];
    let kn = k_near as i64;
    let idx = |kx: i64, ky: i64| ((ky + kn) as usize) * side + (kx + kn) as usize;
    // Radial symmetry: integrate one octant (0 <= ky <= kx), mirror the rest.
    let f2 = |x: f64, y: f64| profile(x.hypot(y));
    let mut total_near = 0.0;
    for kx in 0..=kn {
        for ky in 0..=kx {
            if kx == 0 && ky == 0 {
                continue;
            }
            let (x0, x1) = ((kx as f64 - 0.5) * h, (kx as f64 + 0.5) * h);
            let (y0, y1) = ((ky as f64 - 0.5) * h, (ky as f64 + 0.5) * h);
            let m = quad::adaptive_rect(&f2, x0, x1, y0, y1, 1e-9, 0.0, 14)
                .map_err(DiscretizationError::Kernel)?
                .max(0.0);
            let mut seen = std::collections::HashSet::new();
            for &(sx, sy) in &[(kx, ky), (ky, kx)] {
                for &ex in &[1i64, -1] {
                    for &ey in &[1i64, -1] {
                        let key = (sx * ex, sy * ey);
                        if seen.insert(key) {
                            masses[idx(key.0, key.1)] = m;
                            total_near += m;
                        }
                    }
                }
            }
        }
    }
    // Origin cell via radial square integrals.
    let p = kernel.p;
    let half = 0.5 * h;
    let origin_moment = square_moment(&profile, half, p).map_err(origin_budget)?;
    let sub_half = half / 2f64.powi(ORIGIN_DEPTH as i32);
    let origin_cell_mass =
        square_annulus_mass(&profile, half, sub_half).map_err(DiscretizationError::Kernel)?;
    let add = origin_moment / (4.0 * h.powf(p));
    for (kx, ky) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
        masses[idx(kx, ky)] += add;
        total_near += add;
    }

    // Ring between the near square and the cutoff circle. The cutoff must
    // clear the square's corners so the uncovered set is exactly {|y| > R}.
    let near_half = (k_near as f64 + 0.5) * h;
    let min_cut = (near_half * 2f64.sqrt() / h).ceil() as usize + 1;
    let k_cut = if k_cut > k_near { k_cut.max(min_cut) } else { k_cut };
    let cutoff = (k_cut as f64).max((near_half / h) * 2f64.sqrt() + 1.0) * h;
    let outside_square =
        square_exterior_mass(&profile, near_half).map_err(DiscretizationError::Kernel)?;
    let l_cut = kernel::tail_mass_at(kernel, cutoff).map_err(DiscretizationError::Kernel)?;
    let ring_mass = (outside_square - l_cut).max(0.0);
    Ok(KernelCellMasses {
        geom,
        p,
        kernel_hash: kernel.hash(),
        k_near,
        k_cut,
        masses,
        ring_mass,
        tail_mass: l_cut,
        origin_moment,
        origin_cell_mass,
        total_near_mass: total_near,
    })
}

/// `int_{[-a,a]^2} |y|^q nu(|y|) dy` by polar reduction over the square.
fn square_moment<F: Fn(f64) -> f64>(profile: &F, a: f64, q: f64) -> Result<f64, KernelError> {
    let inner = quad::require_converged(quad::integrate_to_zero(
        &|rho: f64| 2.0 * PI * rho.powf(q + 1.0) * profile(rho),
        a,
        CELL_TOL,
    )?)?;
    let corner = quad::adaptive(
        &|rho: f64| {
            let ang = 2.0 * PI - 8.0 * (a / rho).min(1.0).acos();
            ang * rho.powf(q + 1.0) * profile(rho)
        },
        a,
        a * 2f64.sqrt(),
        1e-9,
        0.0,
        400,
    )?;
    Ok(inner + corner)
}

/// Mass of `[-a,a]^2 \ [-b,b]^2` (the origin annulus), singularity excluded.
fn square_annulus_mass<F: Fn(f64) -> f64>(profile: &F, a: f64, b: f64) -> Result<f64, KernelError> {
    debug_assert!(b < a);
    let ang_in = |half: f64, rho: f64| -> f64 {
        if rho <= half {
            2.0 * PI
        } else if rho < half * 2f64.sqrt() {
            2.0 * PI - 8.0 * (half / rho).acos()
        } else {
            0.0
        }
    };
    let f = |rho: f64| (ang_in(a, rho) - ang_in(b, rho)) * rho * profile(rho);
    // Kinks at b*sqrt(2) and a: integrate the pieces separately.
    let s2 = 2f64.sqrt();
    if b * s2 <= a {
        Ok(quad::adaptive(&f, b, b * s2, 1e-9, 0.0, 400)?
            + quad::adaptive(&f, b * s2, a, 1e-9, 0.0, 400)?
            + quad::adaptive(&f, a, a * s2, 1e-9, 0.0, 400)?)
    } else {
        quad::adaptive(&f, b, a * s2, 1e-9, 0.0, 400)
    }
}

/// `nu({ |y|_inf > a })` by polar reduction.
fn square_exterior_mass<F: Fn(f64) -> f64>(profile: &F, a: f64) -> Result<f64, KernelError> {
    let corners = quad::adaptive(
        &|rho: f64| 8.0 * (a / rho).min(1.0).acos() * rho * profile(rho),
        a,
        a * 2f64.sqrt(),
        1e-9,
        0.0,
        400,
    )?;
    let beyond = quad::require_converged(quad::integrate_to_inf(
        &|rho: f64| 2.0 * PI * rho * profile(rho),
        a * 2f64.sqrt(),
        CELL_TOL,
    )?)?;
    Ok(corners + beyond)
}
