//! Radial Lévy-type kernel densities and their scalar analytics.
//!
//! A kernel is a radial density nu on R^d subject to the p-integrability
//! condition `int (1 ^ |x|^p) nu(dx) < infinity`. This module computes that
//! integral, the tail mass `L(r) = nu(B_r^c)`, the concentration function
//! `h_p(r) = int (1 ^ |x|^p / r^p) nu(dx)`, the half-space tail
//! `w(s) = nu({y_d > s})` and the doubling constant `beta` with
//! `w(s) <= beta w(2s)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::KernelError;
use crate::quad::{self, TailVerdict};
use crate::tabulated::TabulatedRadial;

/// Relative tolerance used by the kernel-level quadratures. Tighter than the
/// contract tolerances so that derived identities hold at 1e-6.
const QUAD_TOL: f64 = 1e-11;

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in radial profiles plus tabulated and callback escapes.
#[derive(Clone)]
pub enum KernelFamily {
    /// `nu(rho) = rho^{-d - s*order}`, the fractional kernel.
    Fractional { s: f64, order: f64 },
    /// `nu(rho) = rho^{-d} log^gamma(1 + rho^{-delta})`, zero order at 0.
    LogZeroOrder { gamma: f64, delta: f64 },
    /// `nu(rho) = rho^{-d} log^beta(2 + 1/rho) log^{-gamma}(2 + rho)`.
    DoubleLog { beta: f64, gamma: f64 },
    /// Profile given as a radial tabulation (log-log interpolated).
    RegVarying(TabulatedRadial),
    /// Arbitrary nonnegative profile callback.
    Custom { label: String, profile: ProfileFn },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fractional { s, order } => write!(f, "Fractional {{ s: {s}, order: {order} }}"),
            Self::LogZeroOrder { gamma, delta } => {
                write!(f, "LogZeroOrder {{ gamma: {gamma}, delta: {delta} }}")
            }
            Self::DoubleLog { beta, gamma } => {
                write!(f, "DoubleLog {{ beta: {beta}, gamma: {gamma} }}")
            }
            Self::RegVarying(t) => write!(f, "RegVarying({} nodes)", t.nodes().len()),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// A radial kernel density together with the dimension and integrability order.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub d: u32,
    pub p: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, d: u32, p: f64) -> Result<Self, KernelError> {
        if d < 1 {
            return Err(KernelError::InvalidParameters("dimension must be >= 1".into()));
        }
        if !(p >= 1.0) {
            return Err(KernelError::InvalidParameters(format!(
                "integrability order p must be >= 1, got {p}"
            )));
        }
        match &family {
            KernelFamily::Fractional { s, order } => {
                // 0 < s*order < order keeps the kernel p-integrable near 0.
                if !(*order > 0.0 && *s > 0.0 && s * order < *order) {
                    return Err(KernelError::InvalidParameters(format!(
                        "fractional family needs 0 < s*order < order, got s = {s}, order = {order}"
                    )));
                }
            }
            KernelFamily::LogZeroOrder { gamma, delta } => {
                if !(*gamma > 0.0 && *delta > 0.0 && gamma * delta < 1.0) {
                    return Err(KernelError::InvalidParameters(format!(
                        "log zero-order family needs gamma, delta > 0 and gamma*delta < 1, got gamma = {gamma}, delta = {delta}"
                    )));
                }
            }
            KernelFamily::DoubleLog { beta, gamma } => {
                if !(*beta >= -1.0 && *gamma > 1.0) {
                    return Err(KernelError::InvalidParameters(format!(
                        "double-log family needs beta >= -1 and gamma > 1, got beta = {beta}, gamma = {gamma}"
                    )));
                }
            }
            KernelFamily::RegVarying(_) | KernelFamily::Custom { .. } => {}
        }
        Ok(Self { family, d, p })
    }

    pub fn fractional(s: f64, order: f64, d: u32, p: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::Fractional { s, order }, d, p)
    }

    pub fn log_zero_order(gamma: f64, delta: f64, d: u32, p: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::LogZeroOrder { gamma, delta }, d, p)
    }

    pub fn double_log(beta: f64, gamma: f64, d: u32, p: f64) -> Result<Self, KernelError> {
        Self::new(KernelFamily::DoubleLog { beta, gamma }, d, p)
    }

    /// Radial profile value nu(rho).
    pub fn profile(&self, rho: f64) -> f64 {
        let d = self.d as f64;
        match &self.family {
            KernelFamily::Fractional { s, order } => rho.powf(-(d + s * order)),
            KernelFamily::LogZeroOrder { gamma, delta } => {
                rho.powf(-d) * rho.powf(-*delta).ln_1p().powf(*gamma)
            }
            KernelFamily::DoubleLog { beta, gamma } => {
                rho.powf(-d)
                    * (2.0 + 1.0 / rho).ln().powf(*beta)
                    * (2.0 + rho).ln().powf(-*gamma)
            }
            KernelFamily::RegVarying(t) => t.eval(rho),
            KernelFamily::Custom { profile, .. } => profile(rho),
        }
    }

    /// Canonical parameter string, used for hashing and manifests.
    pub fn description(&self) -> String {
        let fam = match &self.family {
            KernelFamily::Fractional { s, order } => format!("fractional s={s} order={order}"),
            KernelFamily::LogZeroOrder { gamma, delta } => {
                format!("log-zero-order gamma={gamma} delta={delta}")
            }
            KernelFamily::DoubleLog { beta, gamma } => {
                format!("double-log beta={beta} gamma={gamma}")
            }
            KernelFamily::RegVarying(t) => {
                let mut s = String::from("reg-varying");
                for (n, v) in t.nodes().iter().zip(t.values()) {
                    s.push_str(&format!(" {n}:{v}"));
                }
                s
            }
            KernelFamily::Custom { label, .. } => format!("custom {label}"),
        };
        format!("{fam} d={} p={}", self.d, self.p)
    }

    /// FNV-1a hash of the canonical description.
    pub fn hash(&self) -> u64 {
        fnv1a(self.description().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Surface measure of the unit sphere, |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2).
pub fn sphere_surface(d: u32) -> f64 {
    assert!(d >= 1);
    // Gamma at integer and half-integer arguments, exactly.
    if d % 2 == 0 {
        let k = (d / 2) as usize; // Gamma(k) = (k-1)!
        let mut g = 1.0;
        for i in 1..k {
            g *= i as f64;
        }
        2.0 * PI.powi((d / 2) as i32) / g
    } else {
        let k = ((d - 1) / 2) as usize; // Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
        let mut num = 1.0;
        for i in 1..=2 * k {
            num *= i as f64;
        }
        let mut den = 1.0;
        for i in 1..=k {
            den *= i as f64;
        }
        let gamma_half = num * PI.sqrt() / (4f64.powi(k as i32) * den);
        2.0 * PI.powf(d as f64 / 2.0) / gamma_half
    }
}

/// Outcome of the p-integrability check.
#[derive(Debug, Clone, Copy)]
pub struct IntegrabilityReport {
    pub finite: bool,
    /// The integral value; `f64::INFINITY` when divergent.
    pub value: f64,
}

/// Computes `int (1 ^ |x|^p) nu(dx)` with divergence detection.
pub fn check_integrability(kernel: &KernelSpec) -> Result<IntegrabilityReport, KernelError> {
    scan_profile_positivity(kernel)?;
    let d = kernel.d as f64;
    let p = kernel.p;
    let inner = quad::integrate_to_zero(
        &|rho: f64| rho.powf(p + d - 1.0) * kernel.profile(rho),
        1.0,
        QUAD_TOL,
    )?;
    let outer = quad::integrate_to_inf(
        &|rho: f64| rho.powf(d - 1.0) * kernel.profile(rho),
        1.0,
        QUAD_TOL,
    )?;
    match (inner, outer) {
        (TailVerdict::Converged(a), TailVerdict::Converged(b)) => Ok(IntegrabilityReport {
            finite: true,
            value: sphere_surface(kernel.d) * (a + b),
        }),
        _ => Ok(IntegrabilityReport { finite: false, value: f64::INFINITY }),
    }
}

fn scan_profile_positivity(kernel: &KernelSpec) -> Result<(), KernelError> {
    let mut rho = 1e-8;
    while rho < 1e8 {
        let v = kernel.profile(rho);
        if v < 0.0 || v.is_nan() {
            return Err(KernelError::NonPositiveProfile { rho, value: v });
        }
        rho *= 10f64.powf(1.0 / 32.0);
    }
    Ok(())
}

/// Tail mass at a single radius, `L(r) = |S^{d-1}| int_r^inf nu(rho) rho^{d-1} drho`.
pub fn tail_mass_at(kernel: &KernelSpec, r: f64) -> Result<f64, KernelError> {
    assert!(r > 0.0);
    let d = kernel.d as f64;
    let v = quad::integrate_to_inf(&|rho: f64| rho.powf(d - 1.0) * kernel.profile(rho), r, QUAD_TOL)?;
    Ok(sphere_surface(kernel.d) * quad::require_converged(v)?)
}

/// Tabulates L on the given radii (positive, strictly increasing).
///
/// The tail beyond the last radius is integrated once; interior segments are
/// accumulated backwards so each segment is integrated exactly once.
pub fn tail_mass_l(kernel: &KernelSpec, radii: &[f64]) -> Result<TabulatedRadial, KernelError> {
    if radii.len() < 2 {
        return Err(KernelError::InvalidTable("need at least two radii".into()));
    }
    for w in radii.windows(2) {
        if !(w[0] > 0.0 && w[0] < w[1]) {
            return Err(KernelError::InvalidTable(
                "radii must be positive and strictly increasing".into(),
            ));
        }
    }
    let d = kernel.d as f64;
    let surf = sphere_surface(kernel.d);
    let integrand = |rho: f64| rho.powf(d - 1.0) * kernel.profile(rho);
    let n = radii.len();
    let mut values = vec![0.0; n];
    values[n - 1] = tail_mass_at(kernel, radii[n - 1])?;
    for i in (0..n - 1).rev() {
        let seg = quad::adaptive(&integrand, radii[i], radii[i + 1], QUAD_TOL, 0.0, 2000)?;
        values[i] = values[i + 1] + surf * seg;
    }
    TabulatedRadial::nonincreasing(radii.to_vec(), values)
}

/// Geometric radii grid, `per_decade` points per decade over [lo, hi].
pub fn geometric_radii(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade >= 1);
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    (0..=count)
        .map(|i| lo * 10f64.powf(decades * i as f64 / count as f64))
        .collect()
}

/// Concentration function `h_p(r) = int (1 ^ |x|^p/r^p) nu(dx)` by direct
/// radial quadrature.
pub fn concentration_hp(kernel: &KernelSpec, r: f64) -> Result<f64, KernelError> {
    assert!(r > 0.0);
    let d = kernel.d as f64;
    let p = kernel.p;
    let near = quad::integrate_to_zero(
        &|rho: f64| rho.powf(p + d - 1.0) * kernel.profile(rho),
        r,
        QUAD_TOL,
    )?;
    let near = quad::require_converged(near)? / r.powf(p);
    let far = quad::integrate_to_inf(&|rho: f64| rho.powf(d - 1.0) * kernel.profile(rho), r, QUAD_TOL)?;
    let far = quad::require_converged(far)?;
    Ok(sphere_surface(kernel.d) * (near + far))
}

/// Evaluates `h_p(r) = (p / r^p) int_0^r s^{p-1} L(s) ds` from a tabulated L.
///
/// This is an identity, not an approximation: it must agree with
/// [`concentration_hp`] up to quadrature and interpolation error.
pub fn hp_via_l(l: &TabulatedRadial, p: f64, r: f64) -> Result<f64, KernelError> {
    assert!(r > 0.0 && p >= 1.0);
    let (integral, head_fraction) = l.power_weighted_integral(p - 1.0, r)?;
    if head_fraction > 0.5 {
        return Err(KernelError::ExtrapolationDominated { percent: head_fraction * 100.0 });
    }
    Ok(p / r.powf(p) * integral)
}

/// Half-space tail `w(s) = int_{y_d > s} nu(y) dy` for d = 1 or d = 2.
pub fn halfspace_tail_w(kernel: &KernelSpec, s: f64) -> Result<f64, KernelError> {
    assert!(s > 0.0);
    match kernel.d {
        1 => {
            let v = quad::integrate_to_inf(&|rho: f64| kernel.profile(rho), s, QUAD_TOL)?;
            quad::require_converged(v)
        }
        2 => {
            // Polar reduction: the sphere of radius rho meets {y_2 > s} in an
            // arc of angle 2 acos(s/rho), so
            //   w(s) = int_s^inf nu(rho) rho 2 acos(s/rho) drho.
            // Near rho = s the arc has a square-root kink; substitute
            // rho = s / cos(phi) on [s, 2s] to smooth it out.
            let near = quad::adaptive(
                &|phi: f64| {
                    let c = phi.cos();
                    let rho = s / c;
                    kernel.profile(rho) * rho * 2.0 * phi * s * phi.sin() / (c * c)
                },
                0.0,
                PI / 3.0,
                QUAD_TOL,
                0.0,
                2000,
            )?;
            let far = quad::integrate_to_inf(
                &|rho: f64| kernel.profile(rho) * rho * 2.0 * (s / rho).acos(),
                2.0 * s,
                QUAD_TOL,
            )?;
            Ok(near + quad::require_converged(far)?)
        }
        _ => Err(KernelError::InvalidParameters(format!(
            "half-space tail implemented for d in {{1, 2}}, got d = {}",
            kernel.d
        ))),
    }
}

/// Axis choice for the nested cross-check quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfspaceAxis {
    Last,
    First,
}

/// d = 2 half-space tail by nested quadrature, integrating the chosen axis in
/// the outer loop. Radial symmetry makes both axis orders equal; this routine
/// exists to cross-check the polar reduction.
pub fn halfspace_tail_w_nested(
    kernel: &KernelSpec,
    s: f64,
    axis: HalfspaceAxis,
) -> Result<f64, KernelError> {
    assert!(s > 0.0);
    if kernel.d != 2 {
        return Err(KernelError::InvalidParameters("nested tail requires d = 2".into()));
    }
    let inner = |t: f64| -> f64 {
        // 2 int_0^inf nu(sqrt(z^2 + t^2)) dz, split at z = t for adaptivity.
        let f = |z: f64| {
            let r = z.hypot(t);
            kernel.profile(r)
        };
        let head = quad::adaptive(&f, 0.0, t, QUAD_TOL * 10.0, 0.0, 200).unwrap_or(f64::NAN);
        let tail = quad::integrate_to_inf(&f, t, QUAD_TOL * 10.0)
            .ok()
            .and_then(|v| quad::require_converged(v).ok())
            .unwrap_or(f64::NAN);
        2.0 * (head + tail)
    };
    // The outer variable is y_2 for Last and y_1 for First; by symmetry of the
    // integrand the expressions coincide term for term.
    let outer = match axis {
        HalfspaceAxis::Last | HalfspaceAxis::First => {
            quad::integrate_to_inf(&|t: f64| inner(t), s, 1e-8)?
        }
    };
    let v = quad::require_converged(outer)?;
    if v.is_nan() {
        return Err(KernelError::QuadratureFailure { context: "nested halfspace tail".into() });
    }
    Ok(v)
}

/// Largest sampled ratio `w(s) / w(2s)` over a geometric grid in `s_range`.
///
/// Callers must check the result lies in (1, 2) before building Hardy
/// contexts.
pub fn doubling_beta(
    kernel: &KernelSpec,
    s_range: (f64, f64),
    samples: usize,
) -> Result<f64, KernelError> {
    let (lo, hi) = s_range;
    assert!(lo > 0.0 && hi > lo && samples >= 2);
    let mut beta: f64 = 0.0;
    for i in 0..samples {
        let s = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
        let w1 = halfspace_tail_w(kernel, s)?;
        let w2 = halfspace_tail_w(kernel, 2.0 * s)?;
        if w2 < 1e-290 {
            return Err(KernelError::TailVanishes { s });
        }
        beta = beta.max(w1 / w2);
    }
    Ok(beta)
}

/// Tabulates w on a geometric grid; used to build Hardy contexts.
pub fn tabulate_w(
    kernel: &KernelSpec,
    s_lo: f64,
    s_hi: f64,
    per_decade: usize,
) -> Result<TabulatedRadial, KernelError> {
    let grid = geometric_radii(s_lo, s_hi, per_decade);
    if kernel.d == 1 {
        // Backwards accumulation, same as the L tabulation.
        let n = grid.len();
        let mut values = vec![0.0; n];
        let tail = quad::integrate_to_inf(&|rho: f64| kernel.profile(rho), grid[n - 1], QUAD_TOL)?;
        values[n - 1] = quad::require_converged(tail)?;
        for i in (0..n - 1).rev() {
            let seg = quad::adaptive(&|rho: f64| kernel.profile(rho), grid[i], grid[i + 1], QUAD_TOL, 0.0, 2000)?;
            values[i] = values[i + 1] + seg;
        }
        TabulatedRadial::nonincreasing(grid, values)
    } else {
        let values: Result<Vec<f64>, KernelError> =
            grid.iter().map(|&s| halfspace_tail_w(kernel, s)).collect();
        TabulatedRadial::nonincreasing(grid, values?)
    }
}

/// Ratio window report for the h_p / L comparison.
#[derive(Debug, Clone)]
pub struct RatioWindow {
    /// Largest radius below which the ratio stays inside the window.
    pub r0: f64,
    pub lo: f64,
    pub hi: f64,
    pub ratios: Vec<(f64, f64)>,
}

/// Computes h_p(r)/L(r) over the radii and reports the comparability window.
///
/// The window is anchored on the smallest sampled decade; `r0` is the largest
/// radius up to which all ratios stay within a factor 2 of that anchor window.
/// With `unbounded_support` set, the scan insists the window holds over the
/// whole range (the noncompact-support reading).
pub fn hp_ratio_window(
    kernel: &KernelSpec,
    radii: &[f64],
    unbounded_support: bool,
) -> Result<RatioWindow, KernelError> {
    assert!(radii.len() >= 4);
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let hp = concentration_hp(kernel, r)?;
        let l = tail_mass_at(kernel, r)?;
        ratios.push((r, hp / l));
    }
    let anchor_hi = radii[0] * 10.0;
    let anchor: Vec<f64> =
        ratios.iter().filter(|(r, _)| *r <= anchor_hi).map(|(_, q)| *q).collect();
    let lo = anchor.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = anchor.iter().cloned().fold(0.0, f64::max);
    let mut r0 = radii[0];
    for &(r, q) in &ratios {
        if q >= lo / 2.0 && q <= hi * 2.0 {
            r0 = r;
        } else {
            break;
        }
    }
    if unbounded_support && r0 < *radii.last().unwrap() {
        return Err(KernelError::InvalidParameters(format!(
            "ratio window expected to hold for all radii but breaks at r = {r0}"
        )));
    }
    Ok(RatioWindow { r0, lo, hi, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac_kernel() -> KernelSpec {
        // nu(rho) = rho^{-1.5} in d = 1, p = 2 (s*order = 0.5).
        KernelSpec::fractional(0.25, 2.0, 1, 2.0).unwrap()
    }

    #[test]
    fn sphere_surface_small_dims() {
        assert!((sphere_surface(1) - 2.0).abs() < 1e-14);
        assert!((sphere_surface(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_surface(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn integrability_fractional_closed_form() {
        // |S^0| (1/(p - sp) + 1/(sp)) = 2 (2/3 + 2) = 16/3
        let rep = check_integrability(&frac_kernel()).unwrap();
        assert!(rep.finite);
        assert!((rep.value - 16.0 / 3.0).abs() / (16.0 / 3.0) < 1e-9, "got {}", rep.value);
    }

    #[test]
    fn integrability_sp_below_p_is_finite() {
        let k = KernelSpec::fractional(0.6, 2.0, 1, 2.0).unwrap();
        assert!(check_integrability(&k).unwrap().finite);
    }

    #[test]
    fn integrability_borderline_divergent() {
        // nu(rho) = rho^{-1-p}: (1 ^ rho^p) nu = rho^{-1} near 0, divergent.
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "borderline".into(),
                profile: Arc::new(|rho: f64| rho.powf(-3.0)),
            },
            1,
            2.0,
        )
        .unwrap();
        let rep = check_integrability(&k).unwrap();
        assert!(!rep.finite);
        assert!(rep.value.is_infinite());
    }

    #[test]
    fn negative_profile_rejected() {
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "bad".into(),
                profile: Arc::new(|rho: f64| 1.0 - rho),
            },
            1,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            check_integrability(&k),
            Err(KernelError::NonPositiveProfile { .. })
        ));
    }

    #[test]
    fn tail_mass_closed_form() {
        // L(r) = 4 r^{-1/2}; L(0.25) = 8.
        let l = tail_mass_at(&frac_kernel(), 0.25).unwrap();
        assert!((l - 8.0).abs() / 8.0 < 1e-9, "got {l}");
    }

    #[test]
    fn tail_table_nonincreasing_and_matches() {
        let k = frac_kernel();
        let radii = geometric_radii(1e-3, 1e2, 16);
        let t = tail_mass_l(&k, &radii).unwrap();
        for w in t.values().windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for &r in &[1e-3f64, 0.02, 1.0, 50.0] {
            let expect = 4.0 * r.powf(-0.5);
            assert!((t.eval(r) - expect).abs() / expect < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn hp_closed_form_and_zero_kernel() {
        let hp = concentration_hp(&frac_kernel(), 1.0).unwrap();
        assert!((hp - 16.0 / 3.0).abs() / (16.0 / 3.0) < 1e-9, "got {hp}");

        let zero = KernelSpec::new(
            KernelFamily::Custom { label: "zero".into(), profile: Arc::new(|_| 0.0) },
            1,
            2.0,
        )
        .unwrap();
        assert_eq!(concentration_hp(&zero, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn hp_truncated_kernel_decays_like_r_to_minus_p() {
        // Compactly supported profile: h_p(r) = r^{-p} * (p-th moment) for large r.
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "truncated".into(),
                profile: Arc::new(|rho: f64| if rho <= 1.0 { rho.powf(-1.5) } else { 0.0 }),
            },
            1,
            2.0,
        )
        .unwrap();
        // p-th moment: |S^0| int_0^1 rho^2 rho^{-1.5} drho = 2 * (1/1.5) = 4/3.
        let moment = 4.0 / 3.0;
        for &r in &[10.0, 100.0, 1000.0] {
            let hp = concentration_hp(&k, r).unwrap();
            let expect = moment / (r * r);
            assert!((hp - expect).abs() / expect < 1e-5, "r = {r}: {hp} vs {expect}");
        }
    }

    #[test]
    fn hp_via_l_matches_direct() {
        let k = frac_kernel();
        let radii = geometric_radii(1e-5, 1e2, 64);
        let l = tail_mass_l(&k, &radii).unwrap();
        // Closed form: hp_via_l(r) = (16/3) r^{-1/2}; at r = 0.25 that is 32/3.
        let v = hp_via_l(&l, 2.0, 0.25).unwrap();
        assert!((v - 32.0 / 3.0).abs() / (32.0 / 3.0) < 1e-7, "got {v}");
        let direct = concentration_hp(&k, 0.25).unwrap();
        assert!((v - direct).abs() / direct < 1e-7);
    }

    #[test]
    fn hp_over_l_is_constant_for_fractional() {
        // p/(p - sp) = 2/1.5 = 4/3, independent of r.
        let k = frac_kernel();
        let radii = geometric_radii(1e-4, 10.0, 32);
        let l = tail_mass_l(&k, &radii).unwrap();
        for &r in &[0.1, 0.5, 1.0, 2.0] {
            let ratio = hp_via_l(&l, 2.0, r).unwrap() / l.eval(r);
            assert!((ratio - 4.0 / 3.0).abs() < 1e-7, "r = {r}: {ratio}");
        }
    }

    #[test]
    fn hp_via_l_constant_table() {
        // L == c on (0, r]: h_p(r) = (p/r^p) int_0^r s^{p-1} c ds = c.
        let nodes = vec![1e-6, 1e-3, 1.0, 10.0];
        let values = vec![3.0, 3.0, 3.0, 3.0];
        let t = TabulatedRadial::nonincreasing(nodes, values).unwrap();
        let v = hp_via_l(&t, 2.0, 5.0).unwrap();
        assert!((v - 3.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn halfspace_tail_1d_closed_form() {
        // w(1) = int_1^inf rho^{-1.5} drho = 2.
        let w = halfspace_tail_w(&frac_kernel(), 1.0).unwrap();
        assert!((w - 2.0).abs() < 1e-9, "got {w}");
    }

    #[test]
    fn halfspace_tail_2d_scaling_and_nested_agree() {
        // Pure power law scales exactly: w(2s) = 2^{-sp} w(s).
        let k = KernelSpec::fractional(0.25, 2.0, 2, 2.0).unwrap();
        let w1 = halfspace_tail_w(&k, 0.7).unwrap();
        let w2 = halfspace_tail_w(&k, 1.4).unwrap();
        assert!((w1 / w2 - 2f64.sqrt()).abs() < 1e-6, "ratio {}", w1 / w2);

        let nested_last = halfspace_tail_w_nested(&k, 0.7, HalfspaceAxis::Last).unwrap();
        let nested_first = halfspace_tail_w_nested(&k, 0.7, HalfspaceAxis::First).unwrap();
        assert!((nested_last - w1).abs() / w1 < 1e-5, "{nested_last} vs {w1}");
        assert!((nested_last - nested_first).abs() / w1 < 1e-12);
    }

    #[test]
    fn l_versus_halfspace_bound() {
        // L(s) <= 2 d w(s / sqrt(d)) at sampled s, for d = 1 and d = 2.
        for d in [1u32, 2] {
            let k = KernelSpec::fractional(0.25, 2.0, d, 2.0).unwrap();
            for &s in &[0.1, 0.5, 1.0, 4.0] {
                let l = tail_mass_at(&k, s).unwrap();
                let w = halfspace_tail_w(&k, s / (d as f64).sqrt()).unwrap();
                assert!(
                    l <= 2.0 * d as f64 * w * (1.0 + 1e-8),
                    "d = {d}, s = {s}: L = {l}, bound = {}",
                    2.0 * d as f64 * w
                );
            }
        }
    }

    #[test]
    fn doubling_beta_fractional() {
        let beta = doubling_beta(&frac_kernel(), (0.05, 4.0), 32).unwrap();
        assert!((beta - 2f64.sqrt()).abs() < 1e-8, "got {beta}");
    }

    #[test]
    fn tail_mass_divergent_kernel_rejected() {
        // rho^{-1/2} is not integrable at infinity in d = 1.
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "fat-tail".into(),
                profile: Arc::new(|rho: f64| rho.powf(-0.5)),
            },
            1,
            2.0,
        )
        .unwrap();
        assert!(matches!(tail_mass_at(&k, 1.0), Err(KernelError::DivergentTail)));
    }

    #[test]
    fn doubling_flags_vanished_tail() {
        // Compactly supported profile: w(2s) underflows past the support.
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "compact".into(),
                profile: Arc::new(|rho: f64| if rho <= 1.0 { 1.0 } else { 0.0 }),
            },
            1,
            2.0,
        )
        .unwrap();
        assert!(matches!(
            doubling_beta(&k, (2.0, 8.0), 8),
            Err(KernelError::TailVanishes { .. })
        ));
    }

    #[test]
    fn hp_is_nonincreasing_on_sampled_grids() {
        for k in [frac_kernel(), KernelSpec::log_zero_order(0.5, 0.5, 1, 2.0).unwrap()] {
            let mut prev = f64::INFINITY;
            for &r in &geometric_radii(1e-3, 1e2, 8) {
                let hp = concentration_hp(&k, r).unwrap();
                assert!(hp <= prev * (1.0 + 1e-10), "h_p increased at r = {r}");
                prev = hp;
            }
        }
    }

    #[test]
    fn doubling_beta_flags_heavy_kernel() {
        // Profile rho^{-d - 0.9 p} with p = 10: beta = 2^9 > 2, outside (1, 2).
        let k = KernelSpec::new(
            KernelFamily::Custom {
                label: "steep".into(),
                profile: Arc::new(|rho: f64| rho.powf(-1.0 - 0.9 * 10.0)),
            },
            1,
            10.0,
        )
        .unwrap();
        let beta = doubling_beta(&k, (0.5, 2.0), 8).unwrap();
        assert!((beta - 2f64.powf(9.0)).abs() / beta < 1e-7);
        assert!(beta >= 2.0);
    }

    #[test]
    fn doubling_certificate_replays() {
        // w(s) <= beta* w(2s) at every sampled s, with equality at the argmax.
        let k = KernelSpec::log_zero_order(0.5, 0.5, 1, 2.0).unwrap();
        let beta = doubling_beta(&k, (0.05, 4.0), 24).unwrap();
        assert!(beta > 1.0 && beta < 2.0, "beta {beta}");
        for i in 0..24 {
            let s = 0.05 * (4.0f64 / 0.05).powf(i as f64 / 23.0);
            let w1 = halfspace_tail_w(&k, s).unwrap();
            let w2 = halfspace_tail_w(&k, 2.0 * s).unwrap();
            assert!(w1 <= beta * w2 * (1.0 + 1e-9), "s = {s}");
        }
    }

    #[test]
    fn log_zero_order_tail_equivalence() {
        // L(s) comparable to log^{gamma+1}(1 + s^{-delta}) over a decade of small s.
        let k = KernelSpec::log_zero_order(0.5, 0.5, 1, 2.0).unwrap();
        let mut ratios = Vec::new();
        for &s in &[0.002, 0.005, 0.01, 0.02] {
            let l = tail_mass_at(&k, s).unwrap();
            let model = s.powf(-0.5).ln_1p().powf(1.5);
            ratios.push(l / model);
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 3.0, "ratios {ratios:?}");
    }

    #[test]
    fn ratio_window_reports_r0() {
        let k = frac_kernel();
        let radii = geometric_radii(1e-3, 10.0, 16);
        let win = hp_ratio_window(&k, &radii, true).unwrap();
        assert!((win.lo - 4.0 / 3.0).abs() < 1e-6 && (win.hi - 4.0 / 3.0).abs() < 1e-6);
        assert!((win.r0 - 10.0).abs() / 10.0 < 0.2);
    }

    #[test]
    fn ratio_window_log_zero_order_small_radii() {
        // L-index at zero is 0 > -p, so h_p / L stays in a positive window
        // below the reported r0.
        let k = KernelSpec::log_zero_order(0.5, 0.5, 1, 2.0).unwrap();
        let radii = geometric_radii(1e-4, 1.0, 12);
        let win = hp_ratio_window(&k, &radii, false).unwrap();
        assert!(win.lo > 0.0 && win.hi / win.lo < 4.0, "window [{}, {}]", win.lo, win.hi);
        assert!(win.r0 >= 0.01, "r0 = {}", win.r0);
    }
}
