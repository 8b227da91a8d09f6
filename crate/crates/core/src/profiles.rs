//! Approximate self-similar profile: first-order profiles built from T1,
//! the corrected profile sigma_b, higher-order profiles from the linear
//! systems for the error coefficients, the constraint correction S02, the
//! localized profile, the orthogonality direction Phi_M and the flux
//! diagnostics.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::closed_forms as cf;
use crate::error::{Error, Result};
use crate::grid::{Parity, RadialGrid};
use crate::modulation::Coefficients;
use crate::ops::{self, FrenetField};
use crate::quadrature;

/// Planar Frenet field (alpha, beta); the third component vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Planar {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Planar {
    fn zeros(n: usize) -> Self {
        Self { x: vec![0.0; n], y: vec![0.0; n] }
    }

    /// Rotation (x, y) -> (-y, x).
    fn rot(&self) -> Self {
        Self { x: self.y.iter().map(|v| -v).collect(), y: self.x.clone() }
    }

    fn add_scaled(&mut self, c: f64, o: &Planar) {
        for (a, b) in self.x.iter_mut().zip(&o.x) {
            *a += c * b;
        }
        for (a, b) in self.y.iter_mut().zip(&o.y) {
            *a += c * b;
        }
    }

    fn mul(&self, f: &[f64]) -> Self {
        Self {
            x: self.x.iter().zip(f).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(f).map(|(a, b)| a * b).collect(),
        }
    }

    /// (rho1 - rho2 R) applied pointwise.
    fn twist(&self, c: &Coefficients) -> Self {
        let (r1, r2) = (c.rho1, c.rho2);
        Self {
            x: self.x.iter().zip(&self.y).map(|(p, q)| r1 * p + r2 * q).collect(),
            y: self.x.iter().zip(&self.y).map(|(p, q)| r1 * q - r2 * p).collect(),
        }
    }

    /// Direction vector (u, v) times a scalar profile.
    fn along(u: f64, v: f64, f: &[f64]) -> Self {
        Self { x: f.iter().map(|s| u * s).collect(), y: f.iter().map(|s| v * s).collect() }
    }
}

type Series = BTreeMap<(u8, u8), Planar>;

fn series_add(s: &mut Series, key: (u8, u8), c: f64, p: &Planar) {
    let n = p.x.len();
    s.entry(key).or_insert_with(|| Planar::zeros(n)).add_scaled(c, p);
}

/// The corrected profile sigma_b with its normalizing constants.
#[derive(Debug, Clone)]
pub struct SigmaB {
    pub values: Vec<f64>,
    pub c_b: f64,
    pub d_b: f64,
}

/// sigma_b equals c_b T1 below B0/4 and -4 Gamma above 6 B0.
pub fn sigma_b(b: f64, grid: &RadialGrid) -> Result<SigmaB> {
    let (b0, _) = ops::scales(b)?;
    if grid.y_max() < 0.5 * b0 {
        return Err(Error::Grid(format!("grid ends at {} < B0/2 = {}", grid.y_max(), 0.5 * b0)));
    }
    let y = grid.nodes();
    let n = y.len();
    let lp: Vec<f64> = y.iter().map(|&v| cf::lambda_phi(v)).collect();
    let gm: Vec<f64> = y.iter().map(|&v| cf::gamma_unchecked(v)).collect();
    let chi_q: Vec<f64> = y.iter().map(|&v| cf::chi_m(v, 0.25 * b0)).collect();
    let g1: Vec<f64> = (0..n).map(|i| chi_q[i] * lp[i] * lp[i] * y[i]).collect();
    let g2: Vec<f64> = (0..n).map(|i| chi_q[i] * lp[i] * gm[i] * y[i]).collect();
    let q = 0.25 * b0;
    let gap1 = quadrature::gk15(&|x: f64| cf::chi_m(x, q) * cf::lambda_phi(x).powi(2) * x, 0.0, y[0]).0;
    let gap2 = quadrature::gk15(
        &|x: f64| if x > 0.0 { cf::chi_m(x, q) * cf::lambda_phi(x) * cf::gamma_unchecked(x) * x } else { 0.0 },
        0.0,
        y[0],
    )
    .0;
    let i1 = grid.cumulative_with_gap(&g1, gap1);
    let i2 = grid.cumulative_with_gap(&g2, gap2);
    let c_b = 4.0 / i1[n - 1];
    let d_b = c_b * i2[n - 1];
    let values = (0..n)
        .map(|i| {
            let far = 1.0 - cf::chi_m(y[i], 3.0 * b0);
            c_b * (-gm[i] * i1[i] + lp[i] * i2[i]) - d_b * far * lp[i]
        })
        .collect();
    Ok(SigmaB { values, c_b, d_b })
}

/// Orthogonality direction Phi_M = chi_M Lambda phi - c_M H(chi_M Lambda phi),
/// with c_M chosen so that (T1, Phi_M) = 0.
#[derive(Debug, Clone)]
pub struct PhiM {
    pub m: f64,
    pub c_m: f64,
    pub phi: Vec<f64>,
    pub h_phi: Vec<f64>,
    /// (Lambda phi, Phi_M)
    pub norm: f64,
}

pub fn phi_m(m: f64, grid: &RadialGrid) -> Result<PhiM> {
    if !(m > 0.0) {
        return Err(Error::Domain("M must be positive".into()));
    }
    if grid.y_max() < 2.0 * m {
        return Err(Error::Grid(format!("grid ends at {} < 2M = {}", grid.y_max(), 2.0 * m)));
    }
    let y = grid.nodes();
    let t1 = cf::t1_on(y);
    let lp: Vec<f64> = y.iter().map(|&v| cf::lambda_phi(v)).collect();
    let chil: Vec<f64> = y.iter().zip(&lp).map(|(&v, l)| cf::chi_m(v, m) * l).collect();
    // H(chi f) = -chi'' f - 2 chi' f' - chi' f / y since H f = 0
    let g: Vec<f64> = y
        .iter()
        .map(|&v| {
            let x = v / m;
            let c1 = cf::chi_prime(x) / m;
            let c2 = cf::chi_second(x) / (m * m);
            let f = cf::lambda_phi(v);
            -(c2 * f + 2.0 * c1 * cf::lambda_phi_prime(v) + c1 * f / v)
        })
        .collect();
    let c_m = ops::inner_values(grid, &chil, &t1) / ops::inner_values(grid, &g, &t1);
    let phi: Vec<f64> = chil.iter().zip(&g).map(|(a, b)| a - c_m * b).collect();
    let hg = ops::h_values(grid, &g, Parity::Odd);
    let h_phi = g.iter().zip(&hg).map(|(a, b)| a - c_m * b).collect();
    let norm = ops::inner_values(grid, &lp, &phi);
    Ok(PhiM { m, c_m, phi, h_phi, norm })
}

/// Every profile needed to assemble w0(a, b) at a fixed b.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub grid: Arc<RadialGrid>,
    pub coeffs: Coefficients,
    pub b: f64,
    pub b0: f64,
    pub b1: f64,
    pub t1: Vec<f64>,
    pub t1_prime: Vec<f64>,
    pub sigma: SigmaB,
    /// Planar profiles Phi_ij for 1 <= i + j <= 3.
    pub phi: BTreeMap<(u8, u8), Planar>,
    /// Third-component correction S02.
    pub s02: Vec<f64>,
}

impl ProfileSet {
    /// Requires the grid to cover [0, 2 B1].
    pub fn build(coeffs: &Coefficients, b: f64, grid: &Arc<RadialGrid>) -> Result<Self> {
        let (_, b1) = ops::scales(b)?;
        if grid.y_max() < 2.0 * b1 {
            return Err(Error::Grid(format!("grid ends at {} < 2 B1 = {}", grid.y_max(), 2.0 * b1)));
        }
        Self::build_on(coeffs, b, grid)
    }

    /// Same construction on a grid that only needs to cover [0, B0/2]; the
    /// profiles are exact restrictions since every solve runs outward from 0.
    pub fn build_on(coeffs: &Coefficients, b: f64, grid: &Arc<RadialGrid>) -> Result<Self> {
        let (b0, b1) = ops::scales(b)?;
        let sigma = sigma_b(b, grid)?;
        let y = grid.nodes();
        let n = y.len();
        let t1 = cf::t1_on(y);
        let t1p: Vec<f64> = y.iter().zip(&t1).map(|(&v, &t)| cf::t1_prime_with(v, t)).collect();
        let t1pp: Vec<f64> = (0..n).map(|i| cf::t1_second_with(y[i], t1[i], t1p[i])).collect();
        let s = coeffs.norm_sq();
        let (r1, r2) = (coeffs.rho1, coeffs.rho2);
        let zz: Vec<f64> = y.iter().map(|&v| cf::z(v)).collect();
        let opz: Vec<f64> = zz.iter().map(|v| 1.0 + v).collect();
        let lp: Vec<f64> = y.iter().map(|&v| cf::lambda_phi(v)).collect();

        let phi10 = Planar::along(r1 / s, r2 / s, &t1);
        let phi01 = Planar::along(-r2 / s, r1 / s, &t1);
        let sig10 = Planar::along(r1 / s, r2 / s, &sigma.values);
        let sig01 = Planar::along(-r2 / s, r1 / s, &sigma.values);
        let lt1: Vec<f64> = y.iter().zip(&t1p).map(|(v, d)| v * d).collect();
        let lphi10 = Planar::along(r1 / s, r2 / s, &lt1);
        let lphi01 = Planar::along(-r2 / s, r1 / s, &lt1);
        let s02: Vec<f64> = t1.iter().map(|t| -t * t / (2.0 * s)).collect();
        let ds02: Vec<f64> = (0..n).map(|i| -t1[i] * t1p[i] / s).collect();
        let lap_s02: Vec<f64> =
            (0..n).map(|i| -(t1p[i] * t1p[i] + t1[i] * t1pp[i] + t1[i] * t1p[i] / y[i]) / s).collect();
        // (d/dy + Z/y) T1
        let dz_t1: Vec<f64> = (0..n).map(|i| t1p[i] + zz[i] * t1[i] / y[i]).collect();

        // (d + Z/y) of the first component, closed form for first order
        let mut dfirst: BTreeMap<(u8, u8), Vec<f64>> = BTreeMap::new();
        dfirst.insert((1, 0), dz_t1.iter().map(|v| r1 / s * v).collect());
        dfirst.insert((0, 1), dz_t1.iter().map(|v| -r2 / s * v).collect());

        let kterm = |d: &Vec<f64>, q: &Planar| -> Planar {
            let w: Vec<f64> = (0..n).map(|i| 2.0 * opz[i] * d[i]).collect();
            q.twist(coeffs).mul(&w)
        };

        let mut w1: Series = BTreeMap::new();
        w1.insert((1, 0), phi10.clone());
        w1.insert((0, 1), phi01.clone());

        // order two: R E_2 + quadratic terms + S02 coupling
        let mut e2: Series = BTreeMap::new();
        let mut t = phi10.mul(&opz);
        let mut diff10 = lphi10.clone();
        diff10.add_scaled(-1.0, &phi10);
        diff10.add_scaled(-1.0, &sig10);
        t.add_scaled(1.0, &diff10);
        series_add(&mut e2, (1, 1), 1.0, &t);
        series_add(&mut e2, (2, 0), -1.0, &phi01.mul(&opz));
        let mut diff01 = lphi01.clone();
        diff01.add_scaled(-1.0, &phi01);
        diff01.add_scaled(-1.0, &sig01);
        series_add(&mut e2, (0, 2), 1.0, &diff01);
        let mut src2: Series = BTreeMap::new();
        for (k, v) in &e2 {
            series_add(&mut src2, *k, 1.0, &v.rot());
        }
        for (ka, pa) in &w1 {
            let _ = pa;
            for (kb, pb) in &w1 {
                let key = (ka.0 + kb.0, ka.1 + kb.1);
                series_add(&mut src2, key, 1.0, &kterm(&dfirst[ka], pb));
            }
        }
        let cpl: Vec<f64> = (0..n).map(|i| 2.0 * opz[i] * ds02[i]).collect();
        series_add(&mut src2, (0, 2), 1.0, &Planar::along(r1, -r2, &cpl));

        let mut phi: BTreeMap<(u8, u8), Planar> = BTreeMap::new();
        phi.insert((1, 0), phi10.clone());
        phi.insert((0, 1), phi01.clone());
        let solve = |src: &Planar| -> Planar {
            let hx: Vec<f64> = (0..n).map(|i| (r1 * src.x[i] - r2 * src.y[i]) / s).collect();
            let hy: Vec<f64> = (0..n).map(|i| (r2 * src.x[i] + r1 * src.y[i]) / s).collect();
            Planar { x: ops::solve_h_values(grid, &hx), y: ops::solve_h_values(grid, &hy) }
        };
        let mut w2: Series = BTreeMap::new();
        for (k, src) in &src2 {
            let p = solve(src);
            w2.insert(*k, p.clone());
            phi.insert(*k, p);
        }

        // order three
        let mut dsecond: BTreeMap<(u8, u8), Vec<f64>> = BTreeMap::new();
        let mut lam2: BTreeMap<(u8, u8), Planar> = BTreeMap::new();
        for (k, p) in &w2 {
            let dx = ops::d1(grid, &p.x, Parity::Odd);
            let dy = ops::d1(grid, &p.y, Parity::Odd);
            dsecond.insert(*k, (0..n).map(|i| dx[i] + zz[i] * p.x[i] / y[i]).collect());
            lam2.insert(
                *k,
                Planar { x: (0..n).map(|i| y[i] * dx[i]).collect(), y: (0..n).map(|i| y[i] * dy[i]).collect() },
            );
        }
        let mut e3: Series = BTreeMap::new();
        for (&(i, j), p) in &w2 {
            series_add(&mut e3, (i, j + 1), 1.0, &lam2[&(i, j)]);
            series_add(&mut e3, (i + 1, j), -1.0, &p.rot().mul(&zz));
            if j > 0 {
                let jf = j as f64;
                series_add(&mut e3, (i + 2, j - 1), -jf, p);
                series_add(&mut e3, (i, j + 1), -jf, p);
            }
        }
        let mut src3: Series = BTreeMap::new();
        for (k, v) in &e3 {
            series_add(&mut src3, *k, 1.0, &v.rot());
        }
        for ka in w1.keys() {
            for (kb, pb) in &w2 {
                let key = (ka.0 + kb.0, ka.1 + kb.1);
                series_add(&mut src3, key, 1.0, &kterm(&dfirst[ka], pb));
            }
        }
        for ka in w2.keys() {
            for (kb, pb) in &w1 {
                let key = (ka.0 + kb.0, ka.1 + kb.1);
                series_add(&mut src3, key, 1.0, &kterm(&dsecond[ka], pb));
            }
        }
        // rho2 b^2 S02 R H w1, using H T1 = Lambda phi
        let hs: Vec<f64> = (0..n).map(|i| r2 * s02[i] * lp[i] / s).collect();
        series_add(&mut src3, (1, 2), 1.0, &Planar::along(r1, r2, &hs).rot());
        series_add(&mut src3, (0, 3), 1.0, &Planar::along(-r2, r1, &hs).rot());
        // -b^2 Lap S02 (rho1 - rho2 R) w1
        series_add(&mut src3, (1, 2), -1.0, &phi10.twist(coeffs).mul(&lap_s02));
        series_add(&mut src3, (0, 3), -1.0, &phi01.twist(coeffs).mul(&lap_s02));
        for (k, src) in &src3 {
            phi.insert(*k, solve(src));
        }

        Ok(Self { grid: grid.clone(), coeffs: *coeffs, b, b0, b1, t1, t1_prime: t1p, sigma, phi, s02 })
    }

    /// w0 = a Phi10 + b Phi01 + sum a^i b^j Phi_ij + b^2 S02 e_z, unlocalized.
    pub fn w0(&self, a: f64, b: f64) -> FrenetField {
        let mut w = FrenetField::zeros(&self.grid);
        for (&(i, j), p) in &self.phi {
            let c = a.powi(i as i32) * b.powi(j as i32);
            for k in 0..p.x.len() {
                w.alpha[k] += c * p.x[k];
                w.beta[k] += c * p.y[k];
            }
        }
        for (g, s) in w.gamma.iter_mut().zip(&self.s02) {
            *g = b * b * s;
        }
        w
    }

    /// chi_{B1} w0.
    pub fn w0_localized(&self, a: f64, b: f64) -> FrenetField {
        let mut w = self.w0(a, b);
        for (k, &y) in self.grid.nodes().iter().enumerate() {
            let c = cf::chi_m(y, self.b1);
            w.alpha[k] *= c;
            w.beta[k] *= c;
            w.gamma[k] *= c;
        }
        w
    }

    /// Dominant error terms a b Sigma10 + b^2 Sigma01 (planar components).
    pub fn dominant_error(&self, a: f64, b: f64) -> Planar {
        let s = self.coeffs.norm_sq();
        let (r1, r2) = (self.coeffs.rho1, self.coeffs.rho2);
        let u = (a * b * r1 - b * b * r2) / s;
        let v = (a * b * r2 + b * b * r1) / s;
        Planar::along(u, v, &self.sigma.values)
    }

    /// Weighted size of the dominant error on [0, 2 B1]:
    /// integral of |Psi|^2 / y^6 y dy.
    pub fn error_spotcheck(&self, a: f64, b: f64) -> f64 {
        let psi = self.dominant_error(a, b);
        let y = self.grid.nodes();
        let g: Vec<f64> = (0..y.len())
            .map(|i| (psi.x[i].powi(2) + psi.y[i].powi(2)) / y[i].powi(5))
            .collect();
        let cum = self.grid.cumulative(&g);
        crate::grid::interpolate(&self.grid, &cum, Parity::None, (2.0 * self.b1).min(self.grid.y_max()))
    }

    /// Pairings (H Psi^(k), Phi_M) / (Lambda phi, Phi_M) for k = 1, 2.
    pub fn flux_ratios(&self, a: f64, b: f64, pm: &PhiM) -> [f64; 2] {
        let psi = self.dominant_error(a, b);
        let hx = ops::h_values(&self.grid, &psi.x, Parity::Odd);
        let hy = ops::h_values(&self.grid, &psi.y, Parity::Odd);
        [
            ops::inner_values(&self.grid, &hx, &pm.phi) / pm.norm,
            ops::inner_values(&self.grid, &hy, &pm.phi) / pm.norm,
        ]
    }
}

/// Leading-order flux 2(rho1 a b - rho2 b^2, rho1 b^2 + rho2 a b) / (S |log b|).
pub fn predicted_flux(coeffs: &Coefficients, a: f64, b: f64) -> [f64; 2] {
    let s = coeffs.norm_sq();
    let l = b.ln().abs();
    [
        2.0 * (coeffs.rho1 * a * b - coeffs.rho2 * b * b) / (s * l),
        2.0 * (coeffs.rho1 * b * b + coeffs.rho2 * a * b) / (s * l),
    ]
}
