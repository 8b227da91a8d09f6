//! Radial operators on graded grids: H, its factors A and A*, the vector
//! operator on Frenet components, pairings under y dy, and the
//! variation-of-constants inverse of H.

use std::sync::Arc;

use crate::closed_forms as cf;
use crate::error::{Error, Result};
use crate::grid::{Parity, RadialField, RadialGrid};
use crate::quadrature;

/// Characteristic scales B0 = b^{-1/2} and B1 = |log b| b^{-1/2}.
pub fn scales(b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain(format!("scales need 0 < b < 1, got {b}")));
    }
    let b0 = 1.0 / b.sqrt();
    Ok((b0, b.ln().abs() * b0))
}

pub fn d1(grid: &RadialGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    grid.stencils(parity).d1.iter().map(|r| r.apply(f)).collect()
}

pub fn d2(grid: &RadialGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    grid.stencils(parity).d2.iter().map(|r| r.apply(f)).collect()
}

/// f'' + f'/y.
pub fn laplacian(grid: &RadialGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    let st = grid.stencils(parity);
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, &y)| st.d2[i].apply(f) + st.d1[i].apply(f) / y)
        .collect()
}

/// H f = -f'' - f'/y + V f / y^2.
pub fn h_values(grid: &RadialGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    let st = grid.stencils(parity);
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, &y)| -st.d2[i].apply(f) - st.d1[i].apply(f) / y + cf::v(y) * f[i] / (y * y))
        .collect()
}

/// A f = -f' + Z f / y.
pub fn a_values(grid: &RadialGrid, f: &[f64], parity: Parity) -> Vec<f64> {
    let st = grid.stencils(parity);
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, &y)| -st.d1[i].apply(f) + cf::z(y) * f[i] / y)
        .collect()
}

/// A* g = g' + (1+Z) g / y.
pub fn astar_values(grid: &RadialGrid, g: &[f64], parity: Parity) -> Vec<f64> {
    let st = grid.stencils(parity);
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, &y)| st.d1[i].apply(g) + (1.0 + cf::z(y)) * g[i] / y)
        .collect()
}

/// (f, g) = integral of f g y dy.
pub fn inner_values(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    let s: Vec<f64> = grid.nodes().iter().zip(f).zip(g).map(|((y, a), b)| a * b * y).collect();
    grid.integral(&s)
}

/// Solution of H u = f that is O(y^3) at the origin:
/// u = Lambda phi * int_0^y f Gamma x dx - Gamma * int_0^y f Lambda phi x dx.
pub fn solve_h_values(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let y = grid.nodes();
    let lp: Vec<f64> = y.iter().map(|&v| cf::lambda_phi(v)).collect();
    let gm: Vec<f64> = y.iter().map(|&v| cf::gamma_unchecked(v)).collect();
    let g1: Vec<f64> = (0..y.len()).map(|i| f[i] * gm[i] * y[i]).collect();
    let g2: Vec<f64> = (0..y.len()).map(|i| f[i] * lp[i] * y[i]).collect();
    // on [0, y0] model f by its odd fit c1 x + c3 x^3 through the first two nodes
    let (y0, y1) = (y[0], y[1]);
    let det = y0 * y1 * (y1 * y1 - y0 * y0);
    let c1 = (f[0] * y1 * y1 * y1 - f[1] * y0 * y0 * y0) / det;
    let c3 = (y0 * f[1] - y1 * f[0]) / det;
    let fm = |x: f64| c1 * x + c3 * x * x * x;
    let gap1 = quadrature::gk15(&|x: f64| if x > 0.0 { fm(x) * cf::gamma_unchecked(x) * x } else { 0.0 }, 0.0, y0).0;
    let gap2 = quadrature::gk15(&|x: f64| fm(x) * cf::lambda_phi(x) * x, 0.0, y0).0;
    let i1 = grid.cumulative_with_gap(&g1, gap1);
    let i2 = grid.cumulative_with_gap(&g2, gap2);
    (0..y.len()).map(|i| lp[i] * i1[i] - gm[i] * i2[i]).collect()
}

fn need_parity(f: &RadialField) -> Result<Parity> {
    match f.parity {
        Parity::None => Err(Error::ParityUnset(f.name.clone())),
        p => Ok(p),
    }
}

pub fn apply_h(f: &RadialField) -> Result<RadialField> {
    let p = need_parity(f)?;
    let v = h_values(&f.grid, &f.values, p);
    Ok(RadialField::new(f.grid.clone(), v, p, &format!("H[{}]", f.name)))
}

pub fn apply_a(f: &RadialField) -> Result<RadialField> {
    let p = need_parity(f)?;
    let v = a_values(&f.grid, &f.values, p);
    let q = if p == Parity::Odd { Parity::Even } else { Parity::Odd };
    Ok(RadialField::new(f.grid.clone(), v, q, &format!("A[{}]", f.name)))
}

pub fn apply_astar(g: &RadialField) -> Result<RadialField> {
    let p = need_parity(g)?;
    let v = astar_values(&g.grid, &g.values, p);
    let q = if p == Parity::Even { Parity::Odd } else { Parity::Even };
    Ok(RadialField::new(g.grid.clone(), v, q, &format!("A*[{}]", g.name)))
}

pub fn inner(f: &RadialField, g: &RadialField) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    Ok(inner_values(&f.grid, &f.values, &g.values))
}

pub fn solve_h(f: &RadialField) -> RadialField {
    let v = solve_h_values(&f.grid, &f.values);
    RadialField::new(f.grid.clone(), v, Parity::Odd, &format!("Hinv[{}]", f.name))
}

/// Vector field in the moving frame (e_r, e_tau, Q). The first two
/// components are odd at the origin, the third even.
#[derive(Debug, Clone)]
pub struct FrenetField {
    pub grid: Arc<RadialGrid>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl FrenetField {
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid: grid.clone(), alpha: vec![0.0; n], beta: vec![0.0; n], gamma: vec![0.0; n] }
    }

    pub fn planar(grid: &Arc<RadialGrid>, alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        let gamma = vec![0.0; grid.len()];
        Self { grid: grid.clone(), alpha, beta, gamma }
    }

    /// Rotation about the vertical axis in Frenet components:
    /// (alpha, beta, gamma) -> (-beta, alpha, 0).
    pub fn rotate(&self) -> Self {
        let alpha = self.beta.iter().map(|v| -v).collect();
        Self::planar(&self.grid, alpha, self.alpha.clone())
    }

    pub fn scale(&self, c: f64) -> Self {
        let m = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        Self { grid: self.grid.clone(), alpha: m(&self.alpha), beta: m(&self.beta), gamma: m(&self.gamma) }
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &FrenetField) {
        for (a, b) in self.alpha.iter_mut().zip(&other.alpha) {
            *a += c * b;
        }
        for (a, b) in self.beta.iter_mut().zip(&other.beta) {
            *a += c * b;
        }
        for (a, b) in self.gamma.iter_mut().zip(&other.gamma) {
            *a += c * b;
        }
    }

    pub fn component(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.alpha,
            1 => &self.beta,
            _ => &self.gamma,
        }
    }

    /// Pointwise sum of squares of all three components.
    pub fn norm_sq(&self) -> Vec<f64> {
        (0..self.alpha.len())
            .map(|i| self.alpha[i].powi(2) + self.beta[i].powi(2) + self.gamma[i].powi(2))
            .collect()
    }
}

/// Vector operator on Frenet components:
/// (H a - 2(1+Z) g', H b, -Lap g + 2(1+Z)(a' + Z a / y)).
pub fn apply_mh(w: &FrenetField) -> FrenetField {
    let g = &w.grid;
    let y = g.nodes();
    let ha = h_values(g, &w.alpha, Parity::Odd);
    let hb = h_values(g, &w.beta, Parity::Odd);
    let dg = d1(g, &w.gamma, Parity::Even);
    let lg = laplacian(g, &w.gamma, Parity::Even);
    let da = d1(g, &w.alpha, Parity::Odd);
    let n = y.len();
    let mut out = FrenetField::zeros(g);
    for i in 0..n {
        let opz = 1.0 + cf::z(y[i]);
        out.alpha[i] = ha[i] - 2.0 * opz * dg[i];
        out.beta[i] = hb[i];
        out.gamma[i] = -lg[i] + 2.0 * opz * (da[i] + cf::z(y[i]) * w.alpha[i] / y[i]);
    }
    out
}

/// Perpendicular part (H a, H b, 0).
pub fn apply_mh_perp(w: &FrenetField) -> FrenetField {
    let g = &w.grid;
    FrenetField::planar(g, h_values(g, &w.alpha, Parity::Odd), h_values(g, &w.beta, Parity::Odd))
}
