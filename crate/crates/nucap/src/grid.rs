//! Functions and set masks on uniform cell-centered grids over [-X, X]^d.

use std::fs;
use std::path::Path;

use crate::error::DiscretizationError;

/// Geometry of a uniform cell-centered grid: `n` cells per axis over
/// [-extent, extent]^d, spacing `2 extent / n`. Functions are treated as 0
/// outside the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub d: u32,
    pub extent: f64,
    pub n: usize,
}

impl GridGeometry {
    pub fn new(d: u32, extent: f64, n: usize) -> Result<Self, DiscretizationError> {
        if !(d == 1 || d == 2) {
            return Err(DiscretizationError::InvalidGrid(format!(
                "grid dimension must be 1 or 2, got {d}"
            )));
        }
        if n < 8 {
            return Err(DiscretizationError::InvalidGrid(format!("need n >= 8, got {n}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(DiscretizationError::InvalidGrid(format!("bad extent {extent}")));
        }
        Ok(Self { d, extent, n })
    }

    /// Cell spacing.
    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        match self.d {
            1 => self.n,
            _ => self.n * self.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center coordinate along one axis for cell index `i`.
    pub fn axis_center(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.h()
    }

    /// Euclidean norm of the center of flat cell `idx`.
    pub fn center_norm(&self, idx: usize) -> f64 {
        match self.d {
            1 => self.axis_center(idx).abs(),
            _ => {
                let (ix, iy) = (idx % self.n, idx / self.n);
                self.axis_center(ix).hypot(self.axis_center(iy))
            }
        }
    }

    /// Coordinate of the last axis (x in 1D, y in 2D) for flat cell `idx`.
    pub fn last_coord(&self, idx: usize) -> f64 {
        match self.d {
            1 => self.axis_center(idx),
            _ => self.axis_center(idx / self.n),
        }
    }
}

/// Real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(geom: GridGeometry, values: Vec<f64>) -> Result<Self, DiscretizationError> {
        if values.len() != geom.len() {
            return Err(DiscretizationError::InvalidGrid(format!(
                "value count {} does not match geometry ({} cells)",
                values.len(),
                geom.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DiscretizationError::InvalidGrid(format!("nonfinite value {bad}")));
        }
        Ok(Self { geom, values })
    }

    pub fn zeros(geom: GridGeometry) -> Self {
        Self { geom, values: vec![0.0; geom.len()] }
    }

    /// Builds from a function of the cell-center coordinates.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(geom: GridGeometry, f: F) -> Result<Self, DiscretizationError> {
        let mut values = Vec::with_capacity(geom.len());
        match geom.d {
            1 => {
                for i in 0..geom.n {
                    values.push(f(&[geom.axis_center(i)]));
                }
            }
            _ => {
                for iy in 0..geom.n {
                    let y = geom.axis_center(iy);
                    for ix in 0..geom.n {
                        values.push(f(&[geom.axis_center(ix), y]));
                    }
                }
            }
        }
        Self::new(geom, values)
    }

    /// Discrete L^p norm `(sum |f_j|^p h^d)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "lp_norm needs p >= 1");
        (self.lp_pow(p)).powf(1.0 / p)
    }

    /// The p-th power sum `sum |f_j|^p h^d`.
    pub fn lp_pow(&self, p: f64) -> f64 {
        let hv = self.geom.cell_volume();
        if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum::<f64>() * hv
        } else if p == 2.0 {
            self.values.iter().map(|v| v * v).sum::<f64>() * hv
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * hv
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { geom: self.geom, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise max and min with another function on the same geometry.
    pub fn pointwise_minmax(&self, other: &Self) -> Result<(Self, Self), DiscretizationError> {
        if self.geom != other.geom {
            return Err(DiscretizationError::GeometryMismatch(format!(
                "{:?} vs {:?}",
                self.geom, other.geom
            )));
        }
        let mut hi = Vec::with_capacity(self.values.len());
        let mut lo = Vec::with_capacity(self.values.len());
        for (a, b) in self.values.iter().zip(&other.values) {
            hi.push(a.max(*b));
            lo.push(a.min(*b));
        }
        Ok((Self { geom: self.geom, values: hi }, Self { geom: self.geom, values: lo }))
    }

    /// Superlevel set {f > t}.
    pub fn superlevel(&self, t: f64) -> SetMask {
        SetMask { geom: self.geom, cells: self.values.iter().map(|&v| v > t).collect() }
    }

    /// Closed superlevel set {f >= t}.
    pub fn superlevel_closed(&self, t: f64) -> SetMask {
        SetMask { geom: self.geom, cells: self.values.iter().map(|&v| v >= t).collect() }
    }

    /// Writes the grid as CSV: `x,value` rows in 1D, a two-line geometry
    /// header followed by row-major value rows in 2D.
    pub fn write_csv(&self, path: &Path) -> Result<(), DiscretizationError> {
        let mut out = String::new();
        match self.geom.d {
            1 => {
                out.push_str("x,value\n");
                for i in 0..self.geom.n {
                    out.push_str(&format!("{},{}\n", self.geom.axis_center(i), self.values[i]));
                }
            }
            _ => {
                out.push_str(&format!("# grid d=2 n={} extent={}\n", self.geom.n, self.geom.extent));
                out.push_str("# row-major values, one grid row per line\n");
                for iy in 0..self.geom.n {
                    let row: Vec<String> = (0..self.geom.n)
                        .map(|ix| format!("{}", self.values[iy * self.geom.n + ix]))
                        .collect();
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
            }
        }
        fs::write(path, out).map_err(|e| DiscretizationError::Io(e.to_string()))
    }

    /// Reads a grid written by [`write_csv`]. The 1D form infers the geometry
    /// from the x column; the 2D form reads it from the header.
    pub fn read_csv(path: &Path) -> Result<Self, DiscretizationError> {
        let text = fs::read_to_string(path).map_err(|e| DiscretizationError::Io(e.to_string()))?;
        let mut lines = text.lines().peekable();
        let first = *lines.peek().ok_or_else(|| DiscretizationError::Io("empty file".into()))?;
        if let Some(rest) = first.strip_prefix("# grid d=2 ") {
            let mut n = 0usize;
            let mut extent = 0.0f64;
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("n=") {
                    n = v.parse().map_err(|_| DiscretizationError::Io("bad n".into()))?;
                } else if let Some(v) = tok.strip_prefix("extent=") {
                    extent = v.parse().map_err(|_| DiscretizationError::Io("bad extent".into()))?;
                }
            }
            let geom = GridGeometry::new(2, extent, n)?;
            let mut values = Vec::with_capacity(geom.len());
            for line in lines {
                if line.starts_with('#') {
                    continue;
                }
                for tok in line.split(',') {
                    values.push(
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|_| DiscretizationError::Io(format!("bad value {tok}")))?,
                    );
                }
            }
            Self::new(geom, values)
        } else {
            let mut xs = Vec::new();
            let mut values = Vec::new();
            for line in lines {
                if line.starts_with('x') || line.starts_with('#') || line.is_empty() {
                    continue;
                }
                let mut parts = line.split(',');
                let x: f64 = parts
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| DiscretizationError::Io(format!("bad row {line}")))?;
                let v: f64 = parts
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| DiscretizationError::Io(format!("bad row {line}")))?;
                xs.push(x);
                values.push(v);
            }
            let n = xs.len();
            if n < 8 {
                return Err(DiscretizationError::Io("too few rows".into()));
            }
            let h = xs[1] - xs[0];
            let extent = -(xs[0] - 0.5 * h);
            let geom = GridGeometry::new(1, extent, n)?;
            Self::new(geom, values)
        }
    }
}

/// Boolean mask marking a set E on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMask {
    pub geom: GridGeometry,
    pub cells: Vec<bool>,
}

impl SetMask {
    pub fn empty(geom: GridGeometry) -> Self {
        Self { geom, cells: vec![false; geom.len()] }
    }

    /// Rasterized closed ball: cells whose center lies within `r` of `center`.
    pub fn ball(geom: GridGeometry, center: &[f64], r: f64) -> Self {
        let mut cells = vec![false; geom.len()];
        match geom.d {
            1 => {
                for (i, c) in cells.iter_mut().enumerate() {
                    *c = (geom.axis_center(i) - center[0]).abs() <= r;
                }
            }
            _ => {
                for iy in 0..geom.n {
                    let dy = geom.axis_center(iy) - center[1];
                    for ix in 0..geom.n {
                        let dx = geom.axis_center(ix) - center[0];
                        cells[iy * geom.n + ix] = dx.hypot(dy) <= r;
                    }
                }
            }
        }
        Self { geom, cells }
    }

    /// Axis-aligned box [lo, hi] per coordinate (1D interval for d = 1).
    pub fn aligned_box(geom: GridGeometry, lo: &[f64], hi: &[f64]) -> Self {
        let mut cells = vec![false; geom.len()];
        match geom.d {
            1 => {
                for (i, c) in cells.iter_mut().enumerate() {
                    let x = geom.axis_center(i);
                    *c = x >= lo[0] && x <= hi[0];
                }
            }
            _ => {
                for iy in 0..geom.n {
                    let y = geom.axis_center(iy);
                    for ix in 0..geom.n {
                        let x = geom.axis_center(ix);
                        cells[iy * geom.n + ix] =
                            x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1];
                    }
                }
            }
        }
        Self { geom, cells }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Lebesgue volume of the mask, count * h^d.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.geom.cell_volume()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.geom == other.geom
            && self.cells.iter().zip(&other.cells).all(|(a, b)| !*a || *b)
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.geom, other.geom);
        Self {
            geom: self.geom,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        assert_eq!(self.geom, other.geom);
        Self {
            geom: self.geom,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn is_disjoint_from(&self, other: &Self) -> bool {
        self.cells.iter().zip(&other.cells).all(|(a, b)| !(*a && *b))
    }

    /// Grows the mask by one cell ring (8-neighborhood in 2D).
    pub fn dilate(&self) -> Self {
        let n = self.geom.n;
        let mut cells = self.cells.clone();
        match self.geom.d {
            1 => {
                for i in 0..n {
                    if self.cells[i] {
                        if i > 0 {
                            cells[i - 1] = true;
                        }
                        if i + 1 < n {
                            cells[i + 1] = true;
                        }
                    }
                }
            }
            _ => {
                for iy in 0..n {
                    for ix in 0..n {
                        if !self.cells[iy * n + ix] {
                            continue;
                        }
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                                if jx >= 0 && jx < n as i64 && jy >= 0 && jy < n as i64 {
                                    cells[(jy as usize) * n + jx as usize] = true;
                                }
                            }
                        }
                    }
                }
            }
        }
        Self { geom: self.geom, cells }
    }

    /// Distance from the mask to the box boundary (infinity if empty).
    pub fn boundary_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        let n = self.geom.n;
        for (idx, &on) in self.cells.iter().enumerate() {
            if !on {
                continue;
            }
            let dist = match self.geom.d {
                1 => self.geom.extent - self.geom.axis_center(idx).abs(),
                _ => {
                    let (ix, iy) = (idx % n, idx / n);
                    let dx = self.geom.extent - self.geom.axis_center(ix).abs();
                    let dy = self.geom.extent - self.geom.axis_center(iy).abs();
                    dx.min(dy)
                }
            };
            best = best.min(dist);
        }
        best
    }

    /// Grid-aligned translation by whole cells; cells pushed outside are dropped.
    pub fn translate(&self, shift: &[i64]) -> Self {
        let n = self.geom.n as i64;
        let mut cells = vec![false; self.geom.len()];
        match self.geom.d {
            1 => {
                for i in 0..self.geom.n {
                    if self.cells[i] {
                        let j = i as i64 + shift[0];
                        if j >= 0 && j < n {
                            cells[j as usize] = true;
                        }
                    }
                }
            }
            _ => {
                for iy in 0..self.geom.n {
                    for ix in 0..self.geom.n {
                        if self.cells[iy * self.geom.n + ix] {
                            let (jx, jy) = (ix as i64 + shift[0], iy as i64 + shift[1]);
                            if jx >= 0 && jx < n && jy >= 0 && jy < n {
                                cells[(jy as usize) * self.geom.n + jx as usize] = true;
                            }
                        }
                    }
                }
            }
        }
        Self { geom: self.geom, cells }
    }

    /// Indicator grid function of the mask.
    pub fn indicator(&self) -> GridFunction {
        GridFunction {
            geom: self.geom,
            values: self.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Radial bump: 1 on the plateau |x| <= r_plateau, linear radial ramp to 0 at
/// r_zero. The capacity upper-bound construction uses r_plateau slightly
/// larger than the constraint ball so that the bump stays feasible after the
/// one-ring dilation of the mask.
pub fn radial_bump(geom: GridGeometry, r_plateau: f64, r_zero: f64) -> GridFunction {
    assert!(r_zero > r_plateau && r_plateau > 0.0);
    let mut values = Vec::with_capacity(geom.len());
    for idx in 0..geom.len() {
        let rho = geom.center_norm(idx);
        let v = if rho <= r_plateau {
            1.0
        } else if rho >= r_zero {
            0.0
        } else {
            (r_zero - rho) / (r_zero - r_plateau)
        };
        values.push(v);
    }
    GridFunction { geom, values }
}
