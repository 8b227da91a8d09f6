//! Radial grids, finite-difference stencils and sampled fields.
//!
//! Nodes are strictly positive; the origin is a virtual node handled through
//! the parity of the sampled function. Every grid is the image of the index
//! line under a smooth map, and the map's derivative (`jac`) drives the
//! fourth-order quadrature.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// f(-y) = -f(y): f = c1 y + c3 y^3 + ...
    Odd,
    /// f(-y) = f(y): f = c0 + c2 y^2 + ...
    Even,
    /// No parity known; one-sided stencils at the origin end.
    None,
}

/// Three weights starting at node `start`.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub start: usize,
    pub w: [f64; 3],
}

impl Row {
    #[inline]
    pub fn apply(&self, f: &[f64]) -> f64 {
        let s = self.start;
        self.w[0] * f[s] + self.w[1] * f[s + 1] + self.w[2] * f[s + 2]
    }
}

#[derive(Debug, Clone)]
pub struct Stencils {
    pub d1: Vec<Row>,
    pub d2: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mapping {
    /// y = h l softplus((xi - xi1) / l): geometric near 0, uniform far out.
    Softplus { h: f64, l: f64, xi1: f64 },
    /// y = a sinh((xi + 1/2) / l): uniform near 0, geometric far out.
    Sinh { a: f64, l: f64 },
    Nodes,
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    jac: Vec<f64>,
    mapping: Mapping,
    odd: Stencils,
    even: Stencils,
    none: Stencils,
    hash: u64,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of the first and second derivative at `x` of the quadratic
/// interpolant through `xs`.
fn lagrange3(xs: [f64; 3], x: f64) -> ([f64; 3], [f64; 3]) {
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    for j in 0..3 {
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        let den = (xs[j] - xs[k]) * (xs[j] - xs[l]);
        d1[j] = (2.0 * x - xs[k] - xs[l]) / den;
        d2[j] = 2.0 / den;
    }
    (d1, d2)
}

fn fnv1a(nodes: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in nodes {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn build_stencils(y: &[f64], parity: Parity) -> Stencils {
    let n = y.len();
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    let (y0, y1) = (y[0], y[1]);
    match parity {
        Parity::Odd => {
            // fit c1 y + c3 y^3 through nodes 0 and 1
            let det = y0 * y1 * (y1 * y1 - y0 * y0);
            let w1 = [
                (y1 * y1 * y1 - 3.0 * y0 * y0 * y1) / det,
                2.0 * y0 * y0 * y0 / det,
                0.0,
            ];
            let w2 = [-6.0 * y0 * y1 / det, 6.0 * y0 * y0 / det, 0.0];
            d1.push(Row { start: 0, w: w1 });
            d2.push(Row { start: 0, w: w2 });
        }
        Parity::Even => {
            let del = y1 * y1 - y0 * y0;
            d1.push(Row { start: 0, w: [-2.0 * y0 / del, 2.0 * y0 / del, 0.0] });
            d2.push(Row { start: 0, w: [-2.0 / del, 2.0 / del, 0.0] });
        }
        Parity::None => {
            let (a, b) = lagrange3([y[0], y[1], y[2]], y[0]);
            d1.push(Row { start: 0, w: a });
            d2.push(Row { start: 0, w: b });
        }
    }
    for i in 1..n - 1 {
        let (a, b) = lagrange3([y[i - 1], y[i], y[i + 1]], y[i]);
        d1.push(Row { start: i - 1, w: a });
        d2.push(Row { start: i - 1, w: b });
    }
    let (a, b) = lagrange3([y[n - 3], y[n - 2], y[n - 1]], y[n - 1]);
    d1.push(Row { start: n - 3, w: a });
    d2.push(Row { start: n - 3, w: b });
    Stencils { d1, d2 }
}

impl RadialGrid {
    fn assemble(nodes: Vec<f64>, jac: Vec<f64>, mapping: Mapping) -> Result<Self> {
        if nodes.len() < 6 {
            return Err(Error::Grid("need at least 6 nodes".into()));
        }
        if !(nodes[0] > 0.0) {
            return Err(Error::Grid("nodes must be positive".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid("nodes must be finite and strictly increasing".into()));
        }
        let odd = build_stencils(&nodes, Parity::Odd);
        let even = build_stencils(&nodes, Parity::Even);
        let none = build_stencils(&nodes, Parity::None);
        let hash = fnv1a(&nodes);
        Ok(Self { nodes, jac, mapping, odd, even, none, hash })
    }

    /// Graded grid: geometric with the given `ratio` near `y_min`, blending
    /// smoothly into uniform spacing so that node `n-1` sits at `y_max`.
    pub fn graded(y_min: f64, y_max: f64, n: usize, ratio: f64) -> Result<Self> {
        if !(y_min > 0.0 && y_max > y_min && ratio > 1.0 && n >= 6) {
            return Err(Error::Grid(format!(
                "bad graded grid parameters y_min={y_min} y_max={y_max} n={n} ratio={ratio}"
            )));
        }
        let l = 1.0 / ratio.ln();
        let xn = (n - 1) as f64;
        let target = y_min / y_max;
        let q = |xi1: f64| softplus(-xi1 / l) / softplus((xn - xi1) / l);
        // q decreases from 1 to ratio^-(n-1) as xi1 grows
        let (mut lo, mut hi) = (-1e3 * xn.max(l), xn + 800.0 * l);
        if q(hi) > target {
            return Err(Error::Grid(format!(
                "{n} nodes at ratio {ratio} cannot span [{y_min}, {y_max}]"
            )));
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if q(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let xi1 = 0.5 * (lo + hi);
        let h = y_max / (l * softplus((xn - xi1) / l));
        Self::from_softplus(h, l, xi1, n)
    }

    fn from_softplus(h: f64, l: f64, xi1: f64, n: usize) -> Result<Self> {
        let nodes = (0..n).map(|i| h * l * softplus((i as f64 - xi1) / l)).collect();
        let jac = (0..n).map(|i| h * sigmoid((i as f64 - xi1) / l)).collect();
        Self::assemble(nodes, jac, Mapping::Softplus { h, l, xi1 })
    }

    /// Staggered grid y_i = a sinh((i + 1/2)/l): spacing `h0 = a/l` near the
    /// origin (at most `h0`), growing geometrically by `ratio` per node far
    /// out, with the last node exactly at `y_max`.
    pub fn sinh_staggered(h0: f64, ratio: f64, y_max: f64) -> Result<Self> {
        if !(h0 > 0.0 && ratio > 1.0 && y_max > h0) {
            return Err(Error::Grid("bad sinh grid parameters".into()));
        }
        let l = 1.0 / ratio.ln();
        let n = ((l * (y_max / (h0 * l)).asinh() - 0.5).ceil() as usize + 1).max(6);
        // shrink the map slightly so the last node lands on y_max
        let a = y_max / ((n as f64 - 0.5) / l).sinh();
        Self::from_sinh(a, l, n)
    }

    fn from_sinh(a: f64, l: f64, n: usize) -> Result<Self> {
        let nodes = (0..n).map(|i| a * ((i as f64 + 0.5) / l).sinh()).collect();
        let jac = (0..n).map(|i| a / l * ((i as f64 + 0.5) / l).cosh()).collect();
        Self::assemble(nodes, jac, Mapping::Sinh { a, l })
    }

    /// Uniform staggered grid y_i = (i + 1/2) h up to at least `y_max`.
    pub fn uniform_staggered(h: f64, y_max: f64) -> Result<Self> {
        if !(h > 0.0 && y_max > h) {
            return Err(Error::Grid("bad uniform grid parameters".into()));
        }
        let n = ((y_max / h - 0.5).ceil() as usize + 1).max(6);
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        Self::assemble(nodes, vec![h; n], Mapping::Nodes)
    }

    /// Arbitrary nodes; the index-map derivative is estimated by fourth-order
    /// differences, so the nodes should come from a smooth map.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 6 {
            return Err(Error::Grid("need at least 6 nodes".into()));
        }
        let y = &nodes;
        let jac = (0..n)
            .map(|i| {
                if i >= 2 && i + 2 < n {
                    (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / 12.0
                } else if i < 2 {
                    (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3]
                        - 3.0 * y[i + 4])
                        / 12.0
                } else {
                    (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3]
                        + 3.0 * y[i - 4])
                        / 12.0
                }
            })
            .collect();
        Self::assemble(nodes, jac, Mapping::Nodes)
    }

    /// Twice as many intervals along the same map; every old node is kept.
    pub fn refined(&self) -> Result<Self> {
        let n = 2 * self.nodes.len() - 1;
        match self.mapping {
            Mapping::Softplus { h, l, xi1 } => Self::from_softplus(h / 2.0, 2.0 * l, 2.0 * xi1, n),
            _ => Err(Error::Grid("refinement only defined for graded grids".into())),
        }
    }

    /// Same grid with every node (and the map) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Grid("scale factor must be positive".into()));
        }
        let nodes = self.nodes.iter().map(|v| v * factor).collect();
        let jac = self.jac.iter().map(|v| v * factor).collect();
        let mapping = match self.mapping {
            Mapping::Softplus { h, l, xi1 } => Mapping::Softplus { h: h * factor, l, xi1 },
            Mapping::Sinh { a, l } => Mapping::Sinh { a: a * factor, l },
            Mapping::Nodes => Mapping::Nodes,
        };
        Self::assemble(nodes, jac, mapping)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn jac(&self) -> &[f64] {
        &self.jac
    }

    pub fn y_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn y_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Smallest node spacing, the origin gap counted as 2 y_0.
    pub fn h_min(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(2.0 * self.nodes[0], f64::min)
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn stencils(&self, parity: Parity) -> &Stencils {
        match parity {
            Parity::Odd => &self.odd,
            Parity::Even => &self.even,
            Parity::None => &self.none,
        }
    }

    /// Largest index with node <= y (0 if y is below the first node).
    pub fn index_below(&self, y: f64) -> usize {
        self.nodes.partition_point(|&v| v <= y).saturating_sub(1)
    }

    /// Running integral of g over [0, y_i] (plain dy, no radial weight).
    ///
    /// Each interval uses the endpoint-corrected trapezoid rule in the
    /// index variable, which is fourth-order on a smooth map. The origin
    /// gap [0, y_0] uses a power-law fit through the first two samples.
    pub fn cumulative(&self, g: &[f64]) -> Vec<f64> {
        let gap = origin_gap(self.nodes[0], self.nodes[1], g[0], g[1]);
        self.cumulative_with_gap(g, gap)
    }

    /// As `cumulative`, with the integral over [0, y_0] supplied by the caller.
    pub fn cumulative_with_gap(&self, g: &[f64], gap: f64) -> Vec<f64> {
        let n = self.nodes.len();
        assert_eq!(g.len(), n, "sample count does not match grid");
        let gj: Vec<f64> = g.iter().zip(&self.jac).map(|(a, b)| a * b).collect();
        // fourth-order differences keep the endpoint correction at O(h^6)
        let d: Vec<f64> = (0..n)
            .map(|i| {
                if i >= 2 && i + 2 < n {
                    (gj[i - 2] - 8.0 * gj[i - 1] + 8.0 * gj[i + 1] - gj[i + 2]) / 12.0
                } else if i < 2 {
                    (-25.0 * gj[i] + 48.0 * gj[i + 1] - 36.0 * gj[i + 2] + 16.0 * gj[i + 3]
                        - 3.0 * gj[i + 4])
                        / 12.0
                } else {
                    (25.0 * gj[i] - 48.0 * gj[i - 1] + 36.0 * gj[i - 2] - 16.0 * gj[i - 3]
                        + 3.0 * gj[i - 4])
                        / 12.0
                }
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut acc = gap;
        out.push(acc);
        for i in 0..n - 1 {
            acc += 0.5 * (gj[i] + gj[i + 1]) - (d[i + 1] - d[i]) / 12.0;
            out.push(acc);
        }
        out
    }

    /// Total integral of g over [0, y_max] (plain dy).
    pub fn integral(&self, g: &[f64]) -> f64 {
        *self.cumulative(g).last().unwrap()
    }
}

/// Integral over [0, y0] assuming g ~ c y^p with p fitted from two samples.
fn origin_gap(y0: f64, y1: f64, g0: f64, g1: f64) -> f64 {
    if g0 == 0.0 {
        return 0.0;
    }
    if g0 * g1 > 0.0 {
        let p = (g1 / g0).ln() / (y1 / y0).ln();
        if p > -0.9 && p.is_finite() {
            return g0 * y0 / (p + 1.0);
        }
    }
    0.5 * g0 * y0
}

/// Samples of a scalar function on a shared grid.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    pub parity: Parity,
    pub name: String,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, parity: Parity, name: &str) -> Self {
        assert_eq!(grid.len(), values.len(), "sample count does not match grid");
        Self { grid, values, parity, name: name.to_string() }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, parity: Parity, name: &str, f: F) -> Self {
        let values = grid.nodes().iter().map(|&y| f(y)).collect();
        Self::new(grid.clone(), values, parity, name)
    }

    pub fn zeros(grid: &Arc<RadialGrid>, parity: Parity, name: &str) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len()], parity, name)
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.hash() == other.grid.hash()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cubic interpolation with parity ghosts below the first node.
    pub fn interpolate(&self, y: f64) -> f64 {
        interpolate(&self.grid, &self.values, self.parity, y)
    }
}

/// Cubic Lagrange interpolation of samples `f` on `grid` at `y`, using
/// reflected ghost nodes at -y_0, -y_1 when a parity is known.
pub fn interpolate(grid: &RadialGrid, f: &[f64], parity: Parity, y: f64) -> f64 {
    let x = grid.nodes();
    let n = x.len();
    let sign = match parity {
        Parity::Odd => -1.0,
        _ => 1.0,
    };
    if y < x[1] && parity != Parity::None {
        if y.abs() < 1e-300 && parity == Parity::Odd {
            return 0.0;
        }
        let xs = [-x[1], -x[0], x[0], x[1]];
        let fs = [sign * f[1], sign * f[0], f[0], f[1]];
        return lagrange4(&xs, &fs, y);
    }
    let i = grid.index_below(y);
    let s = i.saturating_sub(1).min(n - 4);
    let xs = [x[s], x[s + 1], x[s + 2], x[s + 3]];
    let fs = [f[s], f[s + 1], f[s + 2], f[s + 3]];
    lagrange4(&xs, &fs, y)
}

fn lagrange4(xs: &[f64; 4], fs: &[f64; 4], y: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..4 {
        let mut l = 1.0;
        for k in 0..4 {
            if k != j {
                l *= (y - xs[k]) / (xs[j] - xs[k]);
            }
        }
        acc += fs[j] * l;
    }
    acc
}
