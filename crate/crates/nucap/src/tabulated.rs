//! Sampled radial functions with log-log interpolation.

use std::fs;
use std::path::Path;

use crate::error::KernelError;

/// A positive radial function sampled on strictly increasing radii.
///
/// Values are interpolated log-log linearly between nodes, which is exact for
/// power laws; beyond either end the power law of the nearest segment is
/// continued. Carriers for the tail mass L, the half-space tail w and the
/// concentration function h_p use the nonincreasing variant.
#[derive(Debug, Clone)]
pub struct TabulatedRadial {
    nodes: Vec<f64>,
    values: Vec<f64>,
    log_nodes: Vec<f64>,
    log_values: Vec<f64>,
}

/// Relative slack allowed when validating monotonicity of stored values.
const MONOTONE_TOL: f64 = 1e-9;

impl TabulatedRadial {
    /// General positive tabulation.
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(KernelError::InvalidTable(format!(
                "need at least two nodes and equal lengths, got {} / {}",
                nodes.len(),
                values.len()
            )));
        }
        for w in nodes.windows(2) {
            if !(w[0] < w[1]) {
                return Err(KernelError::InvalidTable(format!(
                    "nodes must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if nodes[0] <= 0.0 {
            return Err(KernelError::InvalidTable("nodes must be positive".into()));
        }
        for &v in &values {
            if !(v > 0.0) || !v.is_finite() {
                return Err(KernelError::InvalidTable(format!(
                    "values must be positive and finite for log-log interpolation, got {v}"
                )));
            }
        }
        let log_nodes = nodes.iter().map(|x| x.ln()).collect();
        let log_values = values.iter().map(|x| x.ln()).collect();
        Ok(Self { nodes, values, log_nodes, log_values })
    }

    /// Tabulation of a nonincreasing quantity; rejects increases beyond tolerance.
    pub fn nonincreasing(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        for (i, w) in values.windows(2).enumerate() {
            if w[1] > w[0] * (1.0 + MONOTONE_TOL) {
                return Err(KernelError::InvalidTable(format!(
                    "values must be nonincreasing: v[{}] = {} < v[{}] = {}",
                    i, w[0], i + 1, w[1]
                )));
            }
        }
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_node(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max_node(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Log-log slope of segment `i` (between nodes i and i+1).
    fn slope(&self, i: usize) -> f64 {
        (self.log_values[i + 1] - self.log_values[i]) / (self.log_nodes[i + 1] - self.log_nodes[i])
    }

    /// Evaluate at radius `r`; power-law continuation outside the node range.
    pub fn eval(&self, r: f64) -> f64 {
        assert!(r > 0.0, "radius must be positive");
        let lr = r.ln();
        let n = self.nodes.len();
        let seg = if lr <= self.log_nodes[0] {
            0
        } else if lr >= self.log_nodes[n - 1] {
            n - 2
        } else {
            match self.log_nodes.partition_point(|&x| x <= lr) {
                0 => 0,
                k => (k - 1).min(n - 2),
            }
        };
        let m = self.slope(seg);
        (self.log_values[seg] + m * (lr - self.log_nodes[seg])).exp()
    }

    /// True when `r` lies outside the tabulated node range.
    pub fn is_extrapolated(&self, r: f64) -> bool {
        r < self.nodes[0] || r > *self.nodes.last().unwrap()
    }

    /// Computes `int_0^r s^q * T(s) ds` using the interpolant.
    ///
    /// Each log-log segment is a power law, so segments integrate in closed
    /// form. Returns the value and the fraction contributed below the first
    /// node (the extrapolated head); an infinite head yields
    /// `ExtrapolationDominated` handling at the caller via the fraction 1.0,
    /// a genuinely divergent head is an error.
    pub fn power_weighted_integral(&self, q: f64, r: f64) -> Result<(f64, f64), KernelError> {
        assert!(r > 0.0);
        // Head: continuation below the first node with the first segment's slope.
        let head_cap = r.min(self.nodes[0]);
        let m0 = self.slope(0);
        let c0 = self.values[0] / self.nodes[0].powf(m0);
        let expo = q + m0 + 1.0;
        if expo <= 0.0 {
            return Err(KernelError::DivergentTail);
        }
        let head = c0 * head_cap.powf(expo) / expo;
        let mut total = head;
        // Interior segments clipped to (nodes[0], r].
        let n = self.nodes.len();
        for i in 0..n - 1 {
            let lo = self.nodes[i];
            if lo >= r {
                break;
            }
            let hi = self.nodes[i + 1].min(r);
            if hi <= lo {
                continue;
            }
            total += self.segment_integral(i, q, lo, hi);
        }
        // Beyond the last node: continue the final slope.
        if r > self.nodes[n - 1] {
            total += self.segment_integral(n - 2, q, self.nodes[n - 1], r);
        }
        Ok((total, head / total))
    }

    fn segment_integral(&self, seg: usize, q: f64, lo: f64, hi: f64) -> f64 {
        let m = self.slope(seg);
        let c = self.values[seg] / self.nodes[seg].powf(m);
        let expo = q + m + 1.0;
        if expo.abs() < 1e-12 {
            c * (hi / lo).ln()
        } else {
            c * (hi.powf(expo) - lo.powf(expo)) / expo
        }
    }

    /// Writes the tabulation as `r,value` CSV in full double precision
    /// (shortest round-trip formatting).
    pub fn write_csv(&self, path: &Path) -> Result<(), KernelError> {
        let mut out = String::from("r,value\n");
        for (n, v) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{n},{v}\n"));
        }
        fs::write(path, out).map_err(|e| KernelError::InvalidTable(e.to_string()))
    }

    /// Reads a `r,value` CSV written by [`write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, KernelError> {
        let text =
            fs::read_to_string(path).map_err(|e| KernelError::InvalidTable(e.to_string()))?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |t: Option<&str>| -> Result<f64, KernelError> {
                t.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| KernelError::InvalidTable(format!("bad csv row `{line}`")))
            };
            nodes.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        Self::new(nodes, values)
    }
}
