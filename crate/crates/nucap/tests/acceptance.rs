//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured runtime (visible under `--nocapture`).

use std::time::Instant;

use nucap::capacity::{
    ball_estimate_sweep, bump_function, compute_capacity, direct_quadratic_capacity,
    CapacityOpts,
};
use nucap::grid::{radial_bump, GridFunction, GridGeometry, SetMask};
use nucap::hardy::{
    delta_step, hardy_constant, verify_fullspace_hardy, verify_weighted_hardy, HardyContext,
};
use nucap::kernel::{
    concentration_hp, doubling_beta, geometric_radii, hp_via_l, tail_mass_at, tail_mass_l,
    KernelFamily, KernelSpec,
};
use nucap::masses::{build_cell_masses, far_cutoff_cells};
use nucap::perimeter::{
    capacitary_inequality_check, coarea_check, maximal_capacitary_check, midpoint_levels,
    nu_perimeter, property_suite,
};
use nucap::seminorm::{self, seminorm_parts};
use nucap::TabulatedRadial;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frac_p2() -> KernelSpec {
    // nu(rho) = rho^{-1.5} in d = 1 with p = 2 (sp = 0.5).
    KernelSpec::fractional(0.25, 2.0, 1, 2.0).unwrap()
}

fn frac_p1() -> KernelSpec {
    // Same profile with integrability order 1.
    KernelSpec::fractional(0.5, 1.0, 1, 1.0).unwrap()
}

fn log_zero() -> KernelSpec {
    KernelSpec::log_zero_order(0.5, 0.5, 1, 2.0).unwrap()
}

fn double_log() -> KernelSpec {
    KernelSpec::double_log(1.0, 2.0, 1, 2.0).unwrap()
}

fn reg_varying() -> KernelSpec {
    // Tabulated pure power profile; exercises the table-backed family.
    let nodes = geometric_radii(1e-8, 1e8, 16);
    let values: Vec<f64> = nodes.iter().map(|&r| r.powf(-1.3)).collect();
    KernelSpec::new(
        KernelFamily::RegVarying(TabulatedRadial::new(nodes, values).unwrap()),
        1,
        2.0,
    )
    .unwrap()
}

#[test]
fn criterion_01_hp_identity_across_kernels() {
    let start = Instant::now();
    let kernels: Vec<(&str, KernelSpec)> = vec![
        ("fractional", frac_p2()),
        ("log-zero-order", log_zero()),
        ("double-log", double_log()),
        ("reg-varying", reg_varying()),
    ];
    let radii = geometric_radii(0.01, 100.0, 8);
    for (name, k) in &kernels {
        let table = tail_mass_l(k, &geometric_radii(1e-5, 200.0, 512)).unwrap();
        let mut worst: f64 = 0.0;
        for &r in &radii {
            let direct = concentration_hp(k, r).unwrap();
            let via = hp_via_l(&table, k.p, r).unwrap();
            let dev = (via - direct).abs() / direct;
            worst = worst.max(dev);
            assert!(
                dev < 1e-6,
                "criterion 1 FAIL: {name} at r = {r}: via = {via}, direct = {direct}, dev = {dev:.3e}"
            );
        }
        println!("criterion 1 [{name}]: worst relative deviation {worst:.3e}");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "criterion 1 runtime {dt:?} exceeds 10 s");
    println!("criterion 1 (exact h_p identity): PASS in {dt:?}");
}

#[test]
fn criterion_02_fractional_closed_forms() {
    let start = Instant::now();
    let k = frac_p2();
    // L(r) = 4 r^{-1/2}
    for &r in &[0.05f64, 0.25, 1.0, 5.0, 40.0] {
        let l = tail_mass_at(&k, r).unwrap();
        let expect = 4.0 * r.powf(-0.5);
        assert!((l - expect).abs() / expect < 1e-6, "L({r}) = {l}, expect {expect}");
    }
    // h_2(r) / L(r) = 4/3
    for &r in &[0.1f64, 0.5, 1.0, 2.0] {
        let ratio = concentration_hp(&k, r).unwrap() / tail_mass_at(&k, r).unwrap();
        assert!((ratio - 4.0 / 3.0).abs() < 1e-6, "ratio at {r} is {ratio}");
    }
    // beta* = sqrt(2)
    let beta = doubling_beta(&k, (0.05, 4.0), 48).unwrap();
    assert!((beta - 2f64.sqrt()).abs() < 1e-6, "beta = {beta}");
    // delta(s) = s/2 and the annulus mass identity at s = 1.
    let ctx = HardyContext::build(&k, 1e-4, 64.0, 64).unwrap();
    for &s in &[0.25f64, 1.0, 4.0] {
        let rep = delta_step(&ctx, s).unwrap();
        assert!((rep.delta - s / 2.0).abs() / s < 1e-6, "delta({s}) = {}", rep.delta);
    }
    let rep = delta_step(&ctx, 1.0).unwrap();
    let annulus_expect = (2f64.sqrt() - 1.0) * 2.0; // 0.8284...
    assert!(
        (rep.annulus_mass - annulus_expect).abs() / annulus_expect < 0.01,
        "annulus mass {} vs {annulus_expect}",
        rep.annulus_mass
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "criterion 2 runtime {dt:?} exceeds 10 s");
    println!("criterion 2 (fractional closed forms): PASS in {dt:?}");
}

#[test]
fn criterion_03_hardy_constants() {
    let start = Instant::now();
    assert_eq!(hardy_constant(1.5, 1.0).unwrap(), 4.5);
    let c = hardy_constant(2f64.sqrt(), 2.0).unwrap();
    assert!((c - 4.526).abs() < 1e-3, "C1(sqrt2, 2) = {c}");
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "criterion 3 runtime {dt:?} exceeds 1 s");
    println!("criterion 3 (Hardy constants): PASS in {dt:?} (C1 = 4.5, {c:.6})");
}

#[test]
fn criterion_04_fullspace_hardy_corpus() {
    let start = Instant::now();
    // Fractional kernel, p = 1, n = 4096: the exact-number instance.
    let k = frac_p1();
    let ctx = HardyContext::build(&k, 1e-4, 64.0, 64).unwrap();
    let geom = GridGeometry::new(1, 8.0, 4096).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 4096.0)).unwrap();
    let l_table = tail_mass_l(&k, &geometric_radii(geom.h() / 8.0, 64.0, 64)).unwrap();
    let corpus = nucap::hardy::corpus(geom, 42, 8);
    for (name, f) in &corpus {
        let rep = verify_fullspace_hardy(f, &ctx, &masses, &l_table).unwrap();
        assert!(
            rep.passed,
            "criterion 4 FAIL: {name}: ratio {} with constant {}",
            rep.ratio, rep.constant
        );
        let parts = seminorm_parts(f, &masses, 1.0).unwrap();
        assert!(parts.tail_fraction() < 0.01, "{name}: tail fraction {}", parts.tail_fraction());
    }
    // Indicator of [0, 1]: lhs = 8 and seminorm = 16 within 2%.
    let ind = SetMask::aligned_box(geom, &[0.0], &[1.0]).indicator();
    let rep = verify_fullspace_hardy(&ind, &ctx, &masses, &l_table).unwrap();
    assert!((rep.lhs - 8.0).abs() / 8.0 < 0.02, "indicator lhs {}", rep.lhs);
    assert!(
        (rep.rhs_seminorm - 16.0).abs() / 16.0 < 0.02,
        "indicator seminorm {}",
        rep.rhs_seminorm
    );
    println!(
        "criterion 4 [fractional]: indicator lhs {:.4}, seminorm {:.4}, constant {:.4}",
        rep.lhs, rep.rhs_seminorm, rep.constant
    );

    // Log zero-order kernel: the different-powers weight of the log example.
    let kz = log_zero();
    let (gamma, delta) = (0.5, 0.5);
    let geom_z = GridGeometry::new(1, 8.0, 1024).unwrap();
    let masses_z = build_cell_masses(&kz, geom_z, far_cutoff_cells(&geom_z, 512.0)).unwrap();
    let ctx_z = HardyContext::build(&kz, 1e-4, 64.0, 64).unwrap();
    let weight = move |r: f64| {
        let t = r.powf(-delta).ln_1p();
        t.powf(gamma) * (t + 1.0)
    };
    // The weight is comparable to L; certify the display via that envelope.
    let l_z = tail_mass_l(&kz, &geometric_radii(geom_z.h() / 8.0, 64.0, 64)).unwrap();
    let mut envelope: f64 = 0.0;
    let mut rr = geom_z.h() / 2.0;
    while rr < 12.0 {
        envelope = envelope.max(weight(rr) / l_z.eval(rr));
        rr *= 1.05;
    }
    let corpus_z = nucap::hardy::corpus(geom_z, 42, 4);
    for (name, f) in &corpus_z {
        let (_, _, ratio) = verify_weighted_hardy(f, &masses_z, 2.0, weight).unwrap();
        let bound = envelope.sqrt() * ctx_z.dimension_constant;
        assert!(
            ratio <= bound * 1.02,
            "criterion 4 FAIL (log weight): {name}: ratio {ratio} vs bound {bound}"
        );
    }

    // Double-log kernel: full-space reports pass with its own L weight.
    let kd = double_log();
    let ctx_d = HardyContext::build(&kd, 1e-4, 64.0, 64).unwrap();
    let masses_d = build_cell_masses(&kd, geom_z, far_cutoff_cells(&geom_z, 512.0)).unwrap();
    let l_d = tail_mass_l(&kd, &geometric_radii(geom_z.h() / 8.0, 64.0, 64)).unwrap();
    for (name, f) in &corpus_z {
        let rep = verify_fullspace_hardy(f, &ctx_d, &masses_d, &l_d).unwrap();
        assert!(rep.passed, "criterion 4 FAIL (double-log): {name}: ratio {}", rep.ratio);
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "criterion 4 runtime {dt:?} exceeds 2 min");
    println!("criterion 4 (full-space Hardy corpus): PASS in {dt:?}");
}

#[test]
fn criterion_05_coarea_identity() {
    let start = Instant::now();
    let k = frac_p1();
    let geom = GridGeometry::new(1, 8.0, 4096).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 4096.0)).unwrap();
    let ind = SetMask::aligned_box(geom, &[0.0], &[1.0]).indicator();
    let rep = coarea_check(&ind, &masses, &midpoint_levels(1.0, 256)).unwrap();
    assert!((rep.lhs - 17.0).abs() / 17.0 < 0.01, "indicator lhs {}", rep.lhs);
    assert!((rep.rhs - 17.0).abs() / 17.0 < 0.01, "indicator rhs {}", rep.rhs);
    let tent = GridFunction::from_fn(geom, |x| (1.0 - x[0].abs()).max(0.0)).unwrap();
    let rep_tent = coarea_check(&tent, &masses, &midpoint_levels(1.0, 256)).unwrap();
    assert!(rep_tent.relerr < 0.01, "tent relerr {}", rep_tent.relerr);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "criterion 5 runtime {dt:?} exceeds 2 min");
    println!(
        "criterion 5 (coarea identity): PASS in {dt:?} (indicator {:.4} = {:.4}, tent relerr {:.2e})",
        rep.lhs, rep.rhs, rep_tent.relerr
    );
}

#[test]
fn criterion_06_perimeter_closed_form() {
    let start = Instant::now();
    let k = frac_p1();
    let geom = GridGeometry::new(1, 8.0, 4096).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 4096.0)).unwrap();
    let e = SetMask::aligned_box(geom, &[0.0], &[1.0]);
    let per = nu_perimeter(&e, &masses).unwrap();
    assert!((per - 8.0).abs() / 8.0 < 0.02, "perimeter {per}");
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "criterion 6 runtime {dt:?} exceeds 30 s");
    println!("criterion 6 (nu-perimeter closed form): PASS in {dt:?} (Per = {per:.5})");
}

#[test]
fn criterion_07_minmax_exchange_exact() {
    let start = Instant::now();
    let k = frac_p1();
    let geom = GridGeometry::new(1, 2.0, 64).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 64.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for pair in 0..1000 {
        let f1 = GridFunction::new(
            geom,
            (0..geom.len()).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let f2 = GridFunction::new(
            geom,
            (0..geom.len()).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        for &p in &[1.0, 2.0] {
            let (hi, lo) = f1.pointwise_minmax(&f2).unwrap();
            let j_hi = seminorm::sobolev_pow(&hi, &masses, p).unwrap();
            let j_lo = seminorm::sobolev_pow(&lo, &masses, p).unwrap();
            let j_1 = seminorm::sobolev_pow(&f1, &masses, p).unwrap();
            let j_2 = seminorm::sobolev_pow(&f2, &masses, p).unwrap();
            assert!(
                j_hi + j_lo <= j_1 + j_2,
                "criterion 7 FAIL at pair {pair}, p = {p}: {} > {}",
                j_hi + j_lo,
                j_1 + j_2
            );
            // The library entry point performs the same assertion internally.
            seminorm::minmax_pair(&f1, &f2, &masses, p).unwrap();
        }
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "criterion 7 runtime {dt:?} exceeds 1 min");
    println!("criterion 7 (min/max exchange, 1000 pairs): PASS in {dt:?}");
}

#[test]
fn criterion_08_ball_capacity_sweep() {
    let start = Instant::now();
    let radii = [0.05, 0.1, 0.25, 0.5, 1.0];
    let resolutions = [512usize, 1024];
    let opts = CapacityOpts::default();

    let rows = ball_estimate_sweep(&frac_p2(), 2.0, &radii, &resolutions, 512.0, &opts).unwrap();
    for row in &rows {
        // Ball-volume normalization: cap / (2 r (1 + h_2(r))).
        let q = row.cap_value / (2.0 * row.reference);
        assert!(
            (1.0 / 20.0..=20.0).contains(&q),
            "criterion 8 FAIL: fractional r = {}, n = {}: normalized ratio {q}",
            row.r,
            row.n
        );
        println!(
            "criterion 8 [fractional] r = {:.2}, n = {}: cap {:.4}, bump {:.4}, cap/(2r(1+h)) {:.3}, iters {}",
            row.r, row.n, row.cap_value, row.bump_upper, q, row.iterations
        );
    }

    // The log kernel's tail decays like s^{-1/4}; push the exactly-handled
    // ring far out so the 2^{p-1}-surrogate overcount stays small.
    // Sweep-calibrated lower constant for the two-sided estimate.
    let c_lower = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    println!("criterion 8 [fractional]: calibrated lower constant c = {c_lower:.4}");
    assert!(c_lower > 0.0);

    let rows_z =
        ball_estimate_sweep(&log_zero(), 2.0, &radii, &resolutions, 1e7, &opts).unwrap();
    for row in &rows_z {
        // Same ball-volume normalization against the log-kernel shape
        // 2 r (1 + log^{3/2}(1 + r^{-1/2})).
        let shape = 2.0 * row.r * (1.0 + row.r.powf(-0.5).ln_1p().powf(1.5));
        let q = row.cap_value / shape;
        assert!(
            (1.0 / 20.0..=20.0).contains(&q),
            "criterion 8 FAIL: log kernel r = {}, n = {}: shape ratio {q}",
            row.r,
            row.n
        );
        println!(
            "criterion 8 [log-zero-order] r = {:.2}, n = {}: cap {:.4}, shape ratio {q:.3}",
            row.r, row.n, row.cap_value
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "criterion 8 runtime {dt:?} exceeds 10 min");
    println!("criterion 8 (ball capacity sweep): PASS in {dt:?}");
}

#[test]
fn criterion_09_capacity_properties() {
    let start = Instant::now();
    let k = frac_p2();
    let geom = GridGeometry::new(1, 4.0, 512).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 256.0)).unwrap();
    let family = vec![
        SetMask::aligned_box(geom, &[-0.2], &[0.2]),
        SetMask::aligned_box(geom, &[-0.5], &[0.5]),
        SetMask::aligned_box(geom, &[-1.0], &[1.0]),
        SetMask::aligned_box(geom, &[0.1], &[0.8]),
        SetMask::aligned_box(geom, &[-0.9], &[-0.4]),
    ];
    let rep = property_suite(&family, &masses, 2.0, &CapacityOpts::default()).unwrap();
    for check in &rep.checks {
        assert!(
            check.passed,
            "criterion 9 FAIL: {}: lhs {} vs rhs {}",
            check.name, check.lhs, check.rhs
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "criterion 9 runtime {dt:?} exceeds 5 min");
    println!(
        "criterion 9 (capacity properties): PASS in {dt:?} ({} checks)",
        rep.checks.len()
    );
}

#[test]
fn criterion_10_capacitary_inequalities() {
    let start = Instant::now();
    let k = frac_p2();
    let opts = CapacityOpts::default();
    let mut ratios = Vec::new();
    for &n in &[256usize, 512] {
        let geom = GridGeometry::new(1, 2.0, n).unwrap();
        let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 256.0)).unwrap();
        for &r in &[0.3f64, 0.5] {
            let f = radial_bump(geom, r, 2.0 * r.min(0.5));
            let plain = capacitary_inequality_check(&f, &masses, 2.0, 16, &opts).unwrap();
            let maximal = maximal_capacitary_check(&f, &masses, 2.0, 16, &opts).unwrap();
            assert!(plain.ratio.is_finite() && plain.ratio > 0.0);
            assert!(maximal.ratio.is_finite() && maximal.ratio >= plain.ratio * (1.0 - 1e-9));
            ratios.push((n, r, plain.ratio, maximal.ratio));
        }
    }
    // Stability within 20% across the refinement halving.
    for &r in &[0.3f64, 0.5] {
        let coarse = ratios.iter().find(|t| t.0 == 256 && t.1 == r).unwrap();
        let fine = ratios.iter().find(|t| t.0 == 512 && t.1 == r).unwrap();
        let dev_plain = (fine.2 - coarse.2).abs() / fine.2;
        let dev_max = (fine.3 - coarse.3).abs() / fine.3;
        assert!(dev_plain <= 0.2, "criterion 10 FAIL: plain ratio drift {dev_plain:.3} at r = {r}");
        assert!(dev_max <= 0.2, "criterion 10 FAIL: maximal ratio drift {dev_max:.3} at r = {r}");
        println!(
            "criterion 10 r = {r}: plain ratio {:.4} -> {:.4}, maximal {:.4} -> {:.4}",
            coarse.2, fine.2, coarse.3, fine.3
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "criterion 10 runtime {dt:?} exceeds 10 min");
    println!("criterion 10 (capacitary inequalities): PASS in {dt:?}");
}

#[test]
fn criterion_11_optimizer_oracle() {
    let start = Instant::now();
    let k = frac_p2();
    let geom = GridGeometry::new(1, 2.0, 64).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 64.0)).unwrap();
    let e = SetMask::ball(geom, &[0.0], 0.3);
    let mut opts = CapacityOpts::default();
    opts.rel_tol = 1e-13;
    opts.max_iters = 400_000;
    let pg = compute_capacity(&e, &masses, 2.0, &opts).unwrap();
    let direct = direct_quadratic_capacity(&e, &masses, &opts).unwrap();
    assert!(!direct.box_active, "box constraints active; oracle comparison void");
    let dev = (pg.value - direct.result.value).abs() / direct.result.value;
    assert!(dev < 1e-6, "criterion 11 FAIL: pg {} vs direct {}", pg.value, direct.result.value);
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "criterion 11 runtime {dt:?} exceeds 30 s");
    println!("criterion 11 (optimizer oracle): PASS in {dt:?} (relative deviation {dev:.2e})");
}

// Criterion 12 (CLI determinism) lives in the CLI crate's test suite.

#[test]
fn capacity_feasibility_invariants() {
    // Bump feasibility: compute_capacity <= bump_upper_bound on the sweep
    // radii, and the minimizer respects its constraints exactly.
    let k = frac_p2();
    let geom = GridGeometry::new(1, 1.6, 256).unwrap();
    let masses = build_cell_masses(&k, geom, far_cutoff_cells(&geom, 256.0)).unwrap();
    let e = SetMask::ball(geom, &[0.0], 0.2);
    let mut opts = CapacityOpts::default();
    opts.start = Some(bump_function(&masses, 0.2));
    let cap = compute_capacity(&e, &masses, 2.0, &opts).unwrap();
    let bump = nucap::capacity::bump_upper_bound(0.2, &masses, 2.0).unwrap();
    assert!(cap.value <= bump * (1.0 + 1e-9));
    assert!(cap.tail_fraction < 0.2, "tail fraction {}", cap.tail_fraction);
}
