//! Command implementations: each writes CSV artifacts plus a JSON manifest
//! into the output directory and is byte-deterministic given the config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use nucap::capacity::{ball_estimate_sweep, CapacityOpts};
use nucap::grid::{GridFunction, GridGeometry, SetMask};
use nucap::hardy::{self, verify_embedding, verify_fullspace_hardy, verify_halfspace_hardy, HardyContext};
use nucap::kernel::{
    check_integrability, concentration_hp, doubling_beta, geometric_radii, tail_mass_l,
    KernelSpec,
};
use nucap::masses::{build_cell_masses, far_cutoff_cells, KernelCellMasses};
use nucap::perimeter::{coarea_check, midpoint_levels, property_suite};
use nucap::TabulatedRadial;

use crate::config::{load_kernel, Command, RunConfig};

pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
}

type DynError = Box<dyn std::error::Error>;

/// Executes one configured run; artifacts land in `config.out`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, DynError> {
    config.validate()?;
    let started = Instant::now();
    let kernel = load_kernel(&config.kernel_path, config.d, config.p)?;
    fs::create_dir_all(&config.out)?;
    let mut artifacts = match config.command {
        Command::KernelInfo => kernel_info(config, &kernel)?,
        Command::HardyCheck => hardy_check(config, &kernel)?,
        Command::Capacity => capacity(config, &kernel)?,
        Command::CoareaCheck => coarea(config, &kernel)?,
        Command::PropertySuite => properties(config, &kernel)?,
    };
    let manifest = json!({
        "command": config.command.name(),
        "kernel": {
            "path": config.kernel_path.display().to_string(),
            "description": kernel.description(),
            "hash": format!("{:016x}", kernel.hash()),
        },
        "geometry": { "d": config.d, "extent": config.extent, "n": config.n },
        "p": config.p,
        "radii": config.radii,
        "t_levels": config.t_levels,
        "seed": config.seed,
        "far_factor": config.far_factor,
        "tolerances": {
            "quadrature_rel": 1e-11,
            "capacity_relchange": 1e-8,
            "report_slack": hardy::REPORT_SLACK,
        },
        "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    let manifest_path = config.out.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    artifacts.push(manifest_path);
    Ok(RunOutcome { artifacts })
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<(), DynError> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn grid(config: &RunConfig) -> Result<GridGeometry, DynError> {
    Ok(GridGeometry::new(config.d, config.extent, config.n)?)
}

fn masses_for(
    config: &RunConfig,
    kernel: &KernelSpec,
    geom: GridGeometry,
) -> Result<KernelCellMasses, DynError> {
    let k_cut = far_cutoff_cells(&geom, config.far_factor);
    if let Some(cache_dir) = &config.cache {
        fs::create_dir_all(cache_dir)?;
        let name = KernelCellMasses::cache_name(kernel.hash(), &geom, k_cut);
        let path = cache_dir.join(name);
        if path.is_file() {
            let cached = KernelCellMasses::load(&path)?;
            if cached.kernel_hash == kernel.hash() && cached.geom == geom {
                return Ok(cached);
            }
        }
        let built = build_cell_masses(kernel, geom, k_cut)?;
        built.save(&path)?;
        return Ok(built);
    }
    Ok(build_cell_masses(kernel, geom, k_cut)?)
}

fn kernel_info(config: &RunConfig, kernel: &KernelSpec) -> Result<Vec<PathBuf>, DynError> {
    let report = check_integrability(kernel)?;
    if !report.finite {
        return Err("kernel violates the p-integrability condition (integral diverges)".into());
    }
    let radii = if config.radii.is_empty() {
        geometric_radii(0.01, 100.0, 8)
    } else {
        config.radii.clone()
    };
    let l_table = tail_mass_l(kernel, &geometric_radii(
        radii.first().copied().unwrap_or(0.01) * 1e-3,
        radii.last().copied().unwrap_or(100.0) * 2.0,
        64,
    ))?;
    let mut rows = Vec::new();
    for &r in &radii {
        let l = l_table.eval(r);
        let hp = concentration_hp(kernel, r)?;
        rows.push(format!("{r},{l},{hp},{}", hp / l));
    }
    let path = config.out.join("kernel_info.csv");
    write_csv(&path, "r,L,h_p,hp_over_L", &rows)?;

    let beta = doubling_beta(kernel, (0.05, 4.0), 32)?;
    let extra = json!({
        "integrability": { "finite": report.finite, "value": report.value },
        "doubling_beta": beta,
    });
    let extra_path = config.out.join("kernel_scalars.json");
    fs::write(&extra_path, serde_json::to_string_pretty(&extra)? + "\n")?;
    Ok(vec![path, extra_path])
}

fn hardy_check(config: &RunConfig, kernel: &KernelSpec) -> Result<Vec<PathBuf>, DynError> {
    let geom = grid(config)?;
    let masses = masses_for(config, kernel, geom)?;
    let ctx = HardyContext::build(kernel, geom.h() / 8.0, 8.0 * geom.extent, 64)?;
    let l_table = tail_mass_l(
        kernel,
        &geometric_radii(geom.h() / 8.0, 8.0 * geom.extent, 64),
    )?;
    let hp_nodes = geometric_radii(geom.h() / 8.0, 4.0 * geom.extent, 32);
    let hp_values: Result<Vec<f64>, _> =
        hp_nodes.iter().map(|&r| concentration_hp(kernel, r)).collect();
    let hp_table = TabulatedRadial::nonincreasing(hp_nodes, hp_values?)?;
    let corpus = hardy::corpus(geom, config.seed, 6);
    let mut rows = Vec::new();
    for (name, f) in &corpus {
        // Half-space variant: restrict to the positive slab.
        let mut slab_values = f.values.clone();
        for idx in 0..geom.len() {
            if geom.last_coord(idx) <= 0.0 {
                slab_values[idx] = 0.0;
            }
        }
        let f_slab = GridFunction::new(geom, slab_values)?;
        let half = verify_halfspace_hardy(&f_slab, &ctx, &masses, geom.extent)?;
        rows.push(format!(
            "{},{name},halfspace,{},{},{},{},{},{}",
            kernel.description().replace(',', ";"),
            half.lhs,
            half.rhs_tail,
            half.rhs_seminorm,
            half.constant,
            half.ratio,
            half.passed
        ));
        let full = verify_fullspace_hardy(f, &ctx, &masses, &l_table)?;
        rows.push(format!(
            "{},{name},fullspace,{},{},{},{},{},{}",
            kernel.description().replace(',', ";"),
            full.lhs,
            full.rhs_tail,
            full.rhs_seminorm,
            full.constant,
            full.ratio,
            full.passed
        ));
        let emb = verify_embedding(f, &ctx, &masses, &hp_table)?;
        rows.push(format!(
            "{},{name},embedding,{},{},{},{},{},{}",
            kernel.description().replace(',', ";"),
            emb.lhs,
            emb.norm,
            emb.homogeneous_ratio,
            emb.raw_ratio,
            emb.index_at_zero,
            emb.homogeneous_ratio.is_finite()
        ));
    }
    let path = config.out.join("hardy_check.csv");
    write_csv(
        &path,
        "kernel,function,variant,lhs,rhs_tail,rhs_seminorm,constant,ratio,passed",
        &rows,
    )?;
    Ok(vec![path])
}

fn capacity(config: &RunConfig, kernel: &KernelSpec) -> Result<Vec<PathBuf>, DynError> {
    let path = config.out.join("capacity.csv");
    if config.radii.is_empty() {
        write_csv(&path, "r,cap_value,bump_upper,reference,ratio,n,iters", &[])?;
        return Ok(vec![path]);
    }
    let opts = CapacityOpts::default();
    let rows = ball_estimate_sweep(
        kernel,
        config.p,
        &config.radii,
        &[config.n],
        config.far_factor,
        &opts,
    )?;
    let lines: Vec<String> = rows
        .iter()
        .map(|row| {
            format!(
                "{},{},{},{},{},{},{}",
                row.r, row.cap_value, row.bump_upper, row.reference, row.ratio, row.n, row.iterations
            )
        })
        .collect();
    write_csv(&path, "r,cap_value,bump_upper,reference,ratio,n,iters", &lines)?;
    let mut artifacts = vec![path];
    if config.dump_minimizers {
        use nucap::capacity::{bump_function, compute_capacity};
        for (i, &r) in config.radii.iter().enumerate() {
            let geom = GridGeometry::new(config.d, 8.0 * r, config.n)?;
            let masses = build_cell_masses(kernel, geom, far_cutoff_cells(&geom, config.far_factor))?;
            let e = SetMask::ball(geom, &vec![0.0; config.d as usize], r);
            let mut o = opts.clone();
            o.start = Some(bump_function(&masses, r));
            let cap = compute_capacity(&e, &masses, config.p, &o)?;
            let snap = config.out.join(format!("minimizer-{i}.csv"));
            cap.minimizer.write_csv(&snap)?;
            artifacts.push(snap);
        }
    }
    Ok(artifacts)
}

fn coarea(config: &RunConfig, kernel: &KernelSpec) -> Result<Vec<PathBuf>, DynError> {
    if config.p != 1.0 {
        return Err("coarea-check requires p = 1".into());
    }
    let geom = grid(config)?;
    let masses = masses_for(config, kernel, geom)?;
    let x = geom.extent;
    let corpus: Vec<(String, GridFunction)> = vec![
        (
            "indicator".into(),
            SetMask::aligned_box(geom, &[0.0], &[x.min(1.0)]).indicator(),
        ),
        (
            "tent".into(),
            GridFunction::from_fn(geom, |p| (1.0 - p[0].abs() / x.min(1.0)).max(0.0))?,
        ),
        ("bump".into(), nucap::grid::radial_bump(geom, x / 4.0, x / 2.0)),
    ];
    let mut rows = Vec::new();
    for (name, f) in &corpus {
        let levels = midpoint_levels(f.max_value().max(1e-12), 256);
        let rep = coarea_check(f, &masses, &levels)?;
        rows.push(format!("{name},{},{},{}", rep.lhs, rep.rhs, rep.relerr));
    }
    let path = config.out.join("coarea_check.csv");
    write_csv(&path, "function,lhs,rhs,relerr", &rows)?;
    Ok(vec![path])
}

fn properties(config: &RunConfig, kernel: &KernelSpec) -> Result<Vec<PathBuf>, DynError> {
    let geom = grid(config)?;
    let masses = masses_for(config, kernel, geom)?;
    let x = geom.extent;
    let family: Vec<SetMask> = if config.radii.is_empty() {
        vec![
            SetMask::aligned_box(geom, &[-x / 20.0], &[x / 20.0]),
            SetMask::aligned_box(geom, &[-x / 8.0], &[x / 8.0]),
            SetMask::aligned_box(geom, &[-x / 4.0], &[x / 4.0]),
            SetMask::aligned_box(geom, &[x / 40.0], &[x / 5.0]),
            SetMask::aligned_box(geom, &[-x / 4.5], &[-x / 10.0]),
        ]
    } else {
        config
            .radii
            .iter()
            .map(|&r| SetMask::ball(geom, &vec![0.0; config.d as usize], r))
            .collect()
    };
    let rep = property_suite(&family, &masses, config.p, &CapacityOpts::default())?;
    let rows: Vec<String> = rep
        .checks
        .iter()
        .map(|c| format!("{},{},{},{}", c.name.replace(',', ";"), c.lhs, c.rhs, c.passed))
        .collect();
    let path = config.out.join("property_suite.csv");
    write_csv(&path, "check,lhs,rhs,passed", &rows)?;
    Ok(vec![path])
}
