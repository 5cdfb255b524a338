//! Discrete uncentered maximal function over grid-aligned boxes.
//!
//! `Mf(x_j)` is the largest average of |f| over any axis-aligned box of cells
//! containing cell j. In 1D every window length is scanned (O(n^2) via
//! prefix sums and a sliding maximum); in 2D the operator feeds exactly one
//! inequality check, so side lengths are restricted to powers of two.

use crate::grid::GridFunction;

/// Sliding maximum of `vals` with clamped windows: `out[j] = max vals[a]` for
/// `a in [max(0, j+1-width), min(j, vals.len()-1)]`.
fn sliding_max(vals: &[f64], width: usize, out: &mut [f64]) {
    let m = vals.len();
    let n = out.len();
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut r = 0usize;
    for (j, slot) in out.iter_mut().enumerate().take(n) {
        let hi = j.min(m - 1);
        while r <= hi {
            while let Some(&back) = deque.back() {
                if vals[back] <= vals[r] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(r);
            r += 1;
        }
        let lo = (j + 1).saturating_sub(width);
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        *slot = vals[*deque.front().expect("window never empty")];
    }
}

/// Uncentered maximal function of |f|.
pub fn maximal_function(f: &GridFunction) -> GridFunction {
    match f.geom.d {
        1 => maximal_1d(f),
        _ => maximal_2d(f),
    }
}

fn maximal_1d(f: &GridFunction) -> GridFunction {
    let n = f.geom.n;
    let absf: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + absf[j];
    }
    // Seed with the one-cell window directly so Mf >= |f| holds exactly.
    let mut out = absf.clone();
    let mut avgs = Vec::with_capacity(n);
    let mut window_max = vec![0.0f64; n];
    for len in 2..=n {
        avgs.clear();
        let inv = 1.0 / len as f64;
        for a in 0..=n - len {
            avgs.push((prefix[a + len] - prefix[a]) * inv);
        }
        sliding_max(&avgs, len, &mut window_max);
        for j in 0..n {
            if window_max[j] > out[j] {
                out[j] = window_max[j];
            }
        }
    }
    GridFunction { geom: f.geom, values: out }
}

fn maximal_2d(f: &GridFunction) -> GridFunction {
    let n = f.geom.n;
    let mut prefix = vec![0.0; (n + 1) * (n + 1)];
    for y in 0..n {
        for x in 0..n {
            prefix[(y + 1) * (n + 1) + (x + 1)] = f.values[y * n + x].abs()
                + prefix[y * (n + 1) + (x + 1)]
                + prefix[(y + 1) * (n + 1) + x]
                - prefix[y * (n + 1) + x];
        }
    }
    let mut out: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    let mut side = 2usize;
    let mut avgs = vec![0.0f64; n * n];
    let mut tmp = vec![0.0f64; n * n];
    let mut row_in = vec![0.0f64; n];
    let mut row_out = vec![0.0f64; n];
    while side <= n {
        let m = n - side + 1;
        let inv = 1.0 / (side * side) as f64;
        for ay in 0..m {
            for ax in 0..m {
                let s = prefix[(ay + side) * (n + 1) + (ax + side)]
                    - prefix[ay * (n + 1) + (ax + side)]
                    - prefix[(ay + side) * (n + 1) + ax]
                    + prefix[ay * (n + 1) + ax];
                avgs[ay * n + ax] = s * inv;
            }
        }
        // Separable sliding max: along x for each position row, then along y.
        for ay in 0..m {
            row_in[..m].copy_from_slice(&avgs[ay * n..ay * n + m]);
            sliding_max(&row_in[..m], side, &mut row_out[..n]);
            tmp[ay * n..(ay + 1) * n].copy_from_slice(&row_out[..n]);
        }
        let mut col_in = vec![0.0f64; m];
        let mut col_out = vec![0.0f64; n];
        for x in 0..n {
            for ay in 0..m {
                col_in[ay] = tmp[ay * n + x];
            }
            sliding_max(&col_in, side, &mut col_out);
            for (y, &cv) in col_out.iter().enumerate() {
                if cv > out[y * n + x] {
                    out[y * n + x] = cv;
                }
            }
        }
        side *= 2;
    }
    GridFunction { geom: f.geom, values: out }
}
