//! Radial solver for the 1-equivariant Landau-Lifshitz flow
//! u_t = rho1 u x Lap u - rho2 u x (u x Lap u), u = e^{theta R} v(r),
//! together with seeding from the approximate profile, extraction of the
//! modulation parameters and the blowup driver.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_forms as cf;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{self, Parity, RadialGrid, Row};
use crate::modulation::{fit_rate, Coefficients, FitReport};
use crate::ops::{self, FrenetField};
use crate::profiles::{phi_m, PhiM, ProfileSet};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Rotation by `theta` about the vertical axis.
pub fn rotate(theta: f64, v: [f64; 3]) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

const PARITY: [Parity; 3] = [Parity::Odd, Parity::Odd, Parity::Even];

/// Profile v(r) of an equivariant map into the sphere.
#[derive(Debug, Clone)]
pub struct SphereField {
    pub grid: Arc<RadialGrid>,
    pub v: [Vec<f64>; 3],
}

impl SphereField {
    /// e^{theta R} Q(r / lambda).
    pub fn ground_state(grid: &Arc<RadialGrid>, lambda: f64, theta: f64) -> Self {
        let n = grid.len();
        let mut v = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, &r) in grid.nodes().iter().enumerate() {
            let q = rotate(theta, cf::ground_state(r / lambda));
            for k in 0..3 {
                v[k][i] = q[k];
            }
        }
        Self { grid: grid.clone(), v }
    }

    pub fn at_node(&self, i: usize) -> [f64; 3] {
        [self.v[0][i], self.v[1][i], self.v[2][i]]
    }

    /// Interpolated value at radius r.
    pub fn at(&self, r: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = grid::interpolate(&self.grid, &self.v[k], PARITY[k], r);
        }
        out
    }

    pub fn normalize(&mut self) {
        for i in 0..self.grid.len() {
            let n = (self.v[0][i].powi(2) + self.v[1][i].powi(2) + self.v[2][i].powi(2)).sqrt();
            for k in 0..3 {
                self.v[k][i] /= n;
            }
        }
    }

    pub fn max_norm_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| ((self.v[0][i].powi(2) + self.v[1][i].powi(2) + self.v[2][i].powi(2)).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Interpolate onto another grid and project back to the sphere.
    pub fn regrid(&self, grid: &Arc<RadialGrid>) -> Self {
        let n = grid.len();
        let mut v = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, &r) in grid.nodes().iter().enumerate() {
            let p = self.at(r.min(self.grid.y_max()));
            for k in 0..3 {
                v[k][i] = p[k];
            }
        }
        let mut f = Self { grid: grid.clone(), v };
        f.normalize();
        f
    }
}

/// Combined rows for f'' + f'/r, odd and even.
#[derive(Debug, Clone)]
struct LapRows {
    odd: Vec<Row>,
    even: Vec<Row>,
    inv_r2: Vec<f64>,
}

impl LapRows {
    fn new(grid: &RadialGrid) -> Self {
        let mk = |p: Parity| -> Vec<Row> {
            let st = grid.stencils(p);
            st.d2
                .iter()
                .zip(&st.d1)
                .zip(grid.nodes())
                .map(|((a, b), &r)| {
                    assert_eq!(a.start, b.start);
                    let mut w = a.w;
                    for j in 0..3 {
                        w[j] += b.w[j] / r;
                    }
                    Row { start: a.start, w }
                })
                .collect()
        };
        let inv_r2 = grid.nodes().iter().map(|r| 1.0 / (r * r)).collect();
        Self { odd: mk(Parity::Odd), even: mk(Parity::Even), inv_r2 }
    }

    #[inline]
    fn apply(&self, v: &[Vec<f64>; 3], i: usize) -> [f64; 3] {
        [
            self.odd[i].apply(&v[0]) - v[0][i] * self.inv_r2[i],
            self.odd[i].apply(&v[1]) - v[1][i] * self.inv_r2[i],
            self.even[i].apply(&v[2]),
        ]
    }
}

/// L v = v'' + v'/r - (v1, v2, 0)/r^2, the Laplacian of e^{theta R} v(r)
/// in the co-rotating frame.
pub fn equivariant_laplacian(field: &SphereField) -> [Vec<f64>; 3] {
    let rows = LapRows::new(&field.grid);
    let n = field.grid.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let l = rows.apply(&field.v, i);
        for k in 0..3 {
            out[k][i] = l[k];
        }
    }
    out
}

/// Dirichlet energy 2 pi int (|v'|^2 + (v1^2 + v2^2)/r^2) r dr, with the tail
/// beyond the last node estimated from a 1/r^2 decay of v1^2 + v2^2.
pub fn dirichlet_energy(field: &SphereField) -> f64 {
    let g = &field.grid;
    let r = g.nodes();
    let n = r.len();
    let mut dens = vec![0.0; n];
    for k in 0..3 {
        let d = ops::d1(g, &field.v[k], PARITY[k]);
        for i in 0..n {
            dens[i] += d[i] * d[i] * r[i];
        }
    }
    for i in 0..n {
        dens[i] += (field.v[0][i].powi(2) + field.v[1][i].powi(2)) / r[i];
    }
    let tail = field.v[0][n - 1].powi(2) + field.v[1][n - 1].powi(2);
    TWO_PI * (g.integral(&dens) + tail)
}

/// 2 rho2 * 2 pi int |v x L v|^2 r dr, the energy dissipation rate.
pub fn dissipation_rate(coeffs: &Coefficients, field: &SphereField) -> f64 {
    let g = &field.grid;
    let r = g.nodes();
    let n = r.len();
    let rows = LapRows::new(g);
    let mut dens = vec![0.0; n];
    // the pinned outer node does not evolve
    for i in 0..n - 1 {
        let c = cross(field.at_node(i), rows.apply(&field.v, i));
        dens[i] = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) * r[i];
    }
    2.0 * coeffs.rho2 * TWO_PI * g.integral(&dens)
}

/// Explicit RK4 on the node values with projection back to the sphere after
/// each step and the outer node pinned to its initial value.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    pub field: SphereField,
    pub coeffs: Coefficients,
    pub t: f64,
    pub dt: f64,
    pub steps: u64,
    pub exec: Exec,
    /// Largest ||v| - 1| before projection in the last step.
    pub last_defect: f64,
    rows: LapRows,
    k: [Vec<[f64; 3]>; 4],
    tmp: [Vec<f64>; 3],
}

impl FlowSolver {
    pub fn new(field: SphereField, coeffs: Coefficients, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must be in (0, 1], got {cfl}")));
        }
        let dt = Self::stable_dt(&field.grid, &coeffs, cfl);
        let rows = LapRows::new(&field.grid);
        let n = field.grid.len();
        let k = || vec![[0.0; 3]; n];
        let tmp = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        // below a few thousand nodes a stage is too short to amortize thread handoff
        let exec = if n >= 2048 { Exec::available() } else { Exec::Sequential };
        Ok(Self { field, coeffs, t: 0.0, dt, steps: 0, exec, last_defect: 0.0, rows, k: [k(), k(), k(), k()], tmp })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// dt = cfl h_min^2 / |rho|.
    pub fn stable_dt(grid: &RadialGrid, coeffs: &Coefficients, cfl: f64) -> f64 {
        let h = grid.h_min();
        cfl * h * h / coeffs.norm_sq().sqrt()
    }

    fn rhs(exec: Exec, rows: &LapRows, c: &Coefficients, v: &[Vec<f64>; 3], out: &mut [[f64; 3]]) {
        let n = v[0].len();
        exec.fill(out, |i| {
            if i + 1 == n {
                return [0.0; 3];
            }
            let vi = [v[0][i], v[1][i], v[2][i]];
            let a = cross(vi, rows.apply(v, i));
            let b = cross(vi, a);
            [c.rho1 * a[0] - c.rho2 * b[0], c.rho1 * a[1] - c.rho2 * b[1], c.rho1 * a[2] - c.rho2 * b[2]]
        });
    }

    /// Tangent vector rho1 v x Lv - rho2 v x (v x Lv) at every node.
    pub fn rhs_of(&self, field: &SphereField) -> Vec<[f64; 3]> {
        let rows = LapRows::new(&field.grid);
        let mut out = vec![[0.0; 3]; field.grid.len()];
        Self::rhs(self.exec, &rows, &self.coeffs, &field.v, &mut out);
        out
    }

    fn stage(&mut self, src: usize, h: f64) {
        let n = self.field.grid.len();
        for k in 0..3 {
            for i in 0..n {
                self.tmp[k][i] = self.field.v[k][i] + h * self.k[src][i][k];
            }
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let n = self.field.grid.len();
        let exec = self.exec;
        Self::rhs(exec, &self.rows, &self.coeffs, &self.field.v, &mut self.k[0]);
        self.stage(0, 0.5 * dt);
        Self::rhs(exec, &self.rows, &self.coeffs, &self.tmp, &mut self.k[1]);
        self.stage(1, 0.5 * dt);
        Self::rhs(exec, &self.rows, &self.coeffs, &self.tmp, &mut self.k[2]);
        self.stage(2, dt);
        Self::rhs(exec, &self.rows, &self.coeffs, &self.tmp, &mut self.k[3]);
        let [k1, k2, k3, k4] = &self.k;
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = self.field.v[k][i] + dt / 6.0 * (k1[i][k] + 2.0 * k2[i][k] + 2.0 * k3[i][k] + k4[i][k]);
            }
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            worst = worst.max((norm - 1.0).abs());
            for k in 0..3 {
                self.field.v[k][i] = p[k] / norm;
            }
        }
        if !worst.is_finite() || worst > 0.1 {
            return Err(Error::Unstable(format!(
                "norm defect {worst:e} before projection at t = {}",
                self.t
            )));
        }
        self.last_defect = worst;
        self.t += dt;
        self.steps += 1;
        Ok(())
    }
}

/// Seeded data e^{Theta0 R} (Q + v_hat)(r / lambda0) projected to the
/// sphere, where v_hat is the localized profile w0(a0, b0) in the frame.
pub fn seed_initial_data(
    coeffs: &Coefficients,
    lambda0: f64,
    theta0: f64,
    a0: f64,
    b0: f64,
    grid: &Arc<RadialGrid>,
) -> Result<SphereField> {
    if !(lambda0 > 0.0) {
        return Err(Error::Domain("lambda0 must be positive".into()));
    }
    if a0 == 0.0 && b0 == 0.0 {
        return Ok(SphereField::ground_state(grid, lambda0, theta0));
    }
    let ygrid = Arc::new(grid.scaled(1.0 / lambda0)?);
    let prof = ProfileSet::build(coeffs, b0, &ygrid)?;
    let w = prof.w0_localized(a0, b0);
    let n = grid.len();
    let mut v = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &y) in ygrid.nodes().iter().enumerate() {
        let fr = cf::frenet(y);
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = fr[2][k] + w.alpha[i] * fr[0][k] + w.beta[i] * fr[1][k] + w.gamma[i] * fr[2][k];
        }
        let p = rotate(theta0, p);
        for k in 0..3 {
            v[k][i] = p[k];
        }
    }
    let mut f = SphereField { grid: grid.clone(), v };
    f.normalize();
    Ok(f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Cutoff radius of the orthogonality direction.
    pub m: f64,
    /// Reference b for the frozen profile shapes when no positive b is known.
    pub b_ref: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Outer passes re-freezing the profile shapes at the extracted b.
    pub passes: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { m: 5.0, b_ref: 0.02, tol: 1e-13, max_iter: 50, passes: 6 }
    }
}

/// Modulation parameters and remainder of a decomposed field.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub lambda: f64,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    /// Remainder w on the self-similar grid.
    pub w: FrenetField,
    /// Sphere projection of the localized profile on the same grid.
    pub profile: FrenetField,
    pub e1: f64,
    pub e2: f64,
    pub e4: f64,
    /// Largest orthogonality pairing divided by (Lambda phi, Phi_M).
    pub orth_residual: f64,
    pub iterations: usize,
}

impl Decomposition {
    /// e^{theta R} (Q + profile + w)(r / lambda) on `grid`, projected to the
    /// sphere. On the grid the decomposition came from this returns the
    /// original field up to rounding.
    pub fn reassemble(&self, grid: &Arc<RadialGrid>) -> SphereField {
        let g = &self.w.grid;
        let n = grid.len();
        let what: [Vec<f64>; 3] = std::array::from_fn(|k| {
            self.w.component(k).iter().zip(self.profile.component(k)).map(|(a, b)| a + b).collect()
        });
        let mut v = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, &r) in grid.nodes().iter().enumerate() {
            let y = (r / self.lambda).min(g.y_max());
            let c: [f64; 3] = std::array::from_fn(|k| grid::interpolate(g, &what[k], PARITY[k], y));
            let fr = cf::frenet(y);
            let p: [f64; 3] = std::array::from_fn(|k| fr[2][k] + c[0] * fr[0][k] + c[1] * fr[1][k] + c[2] * fr[2][k]);
            let p = rotate(self.theta, p);
            for k in 0..3 {
                v[k][i] = p[k];
            }
        }
        let mut f = SphereField { grid: grid.clone(), v };
        f.normalize();
        f
    }
}

/// Frame components of the rescaled, unrotated field on `ygrid`.
fn frame_components(field: &SphereField, ygrid: &RadialGrid, lambda: f64, theta: f64) -> FrenetField {
    let n = ygrid.len();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    for (i, &y) in ygrid.nodes().iter().enumerate() {
        let v = rotate(-theta, field.at(lambda * y));
        let (lp, zz) = (cf::lambda_phi(y), cf::z(y));
        alpha[i] = zz * v[0] - lp * v[2];
        beta[i] = v[1];
        gamma[i] = lp * v[0] + zz * v[2] - 1.0;
    }
    FrenetField { grid: Arc::new(ygrid.clone()), alpha, beta, gamma }
}

fn solve4(mut m: [[f64; 4]; 4], mut r: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in c + 1..4 {
            let f = m[i][c] / m[c][c];
            for j in c..4 {
                m[i][j] -= f * m[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let mut s = r[i];
        for j in i + 1..4 {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

/// Frame components of (Q + alpha e_r + beta e_tau + gamma Q)/|...| - Q.
#[inline]
fn project(alpha: f64, beta: f64, gamma: f64) -> [f64; 3] {
    let n = (alpha * alpha + beta * beta + (1.0 + gamma).powi(2)).sqrt();
    [alpha / n, beta / n, (1.0 + gamma) / n - 1.0]
}

/// Pairing context on a short self-similar grid covering the support of Phi_M.
struct Pairing {
    grid: Arc<RadialGrid>,
    pm: PhiM,
    prof: ProfileSet,
    chi: Vec<f64>,
}

impl Pairing {
    fn new(coeffs: &Coefficients, b_ref: f64, m: f64) -> Result<Self> {
        let (b0, b1) = ops::scales(b_ref)?;
        let y_end = (2.0 * m * 1.02).max(0.51 * b0);
        let grid = Arc::new(RadialGrid::graded(1e-3, y_end, 1600, 1.02)?);
        let pm = phi_m(m, &grid)?;
        let prof = ProfileSet::build_on(coeffs, b_ref, &grid)?;
        let chi = grid.nodes().iter().map(|&y| cf::chi_m(y, b1)).collect();
        Ok(Self { grid, pm, prof, chi })
    }

    fn residual(&self, field: &SphereField, x: [f64; 4]) -> [f64; 4] {
        let wh = frame_components(field, &self.grid, x[0].exp(), x[1]);
        let w0 = self.prof.w0(x[2], x[3]);
        let n = self.grid.len();
        let mut al = vec![0.0; n];
        let mut be = vec![0.0; n];
        for i in 0..n {
            let p = project(self.chi[i] * w0.alpha[i], self.chi[i] * w0.beta[i], self.chi[i] * w0.gamma[i]);
            al[i] = wh.alpha[i] - p[0];
            be[i] = wh.beta[i] - p[1];
        }
        let g = &self.grid;
        [
            ops::inner_values(g, &al, &self.pm.phi),
            ops::inner_values(g, &be, &self.pm.phi),
            ops::inner_values(g, &al, &self.pm.h_phi),
            ops::inner_values(g, &be, &self.pm.h_phi),
        ]
    }
}

fn sup(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Newton solve of (alpha, Phi_M) = (beta, Phi_M) = (alpha, H Phi_M) =
/// (beta, H Phi_M) = 0 for (lambda, Theta, a, b). If `fixed_ab` is given
/// only (lambda, Theta) are solved for, from the two Phi_M pairings.
pub fn extract_modulation(
    field: &SphereField,
    coeffs: &Coefficients,
    guess: [f64; 4],
    fixed_ab: Option<(f64, f64)>,
    cfg: &ExtractConfig,
) -> Result<Decomposition> {
    let mut x = [guess[0].ln(), guess[1], guess[2], guess[3]];
    if let Some((a, b)) = fixed_ab {
        x[2] = a;
        x[3] = b;
    }
    let unknowns = if fixed_ab.is_some() { 2 } else { 4 };
    let mut iterations = 0;
    let mut b_ref = if guess[3] > 1e-6 && guess[3] < 0.5 { guess[3] } else { cfg.b_ref };
    let mut pairing = Pairing::new(coeffs, b_ref, cfg.m)?;
    let mut res_norm = f64::INFINITY;
    for pass in 0..cfg.passes.max(1) {
        let mut r = pairing.residual(field, x);
        res_norm = sup(&r[..unknowns]) / pairing.pm.norm;
        for _ in 0..cfg.max_iter {
            if res_norm < cfg.tol {
                break;
            }
            iterations += 1;
            let mut jac = [[0.0; 4]; 4];
            for (c, h) in [1e-7, 1e-7, 1e-8, 1e-8].iter().enumerate().take(unknowns) {
                let mut xp = x;
                xp[c] += h;
                let mut xm = x;
                xm[c] -= h;
                let rp = pairing.residual(field, xp);
                let rm = pairing.residual(field, xm);
                for row in 0..4 {
                    jac[row][c] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let dx = if unknowns == 4 {
                solve4(jac, [-r[0], -r[1], -r[2], -r[3]])
            } else {
                let m = [[jac[0][0], jac[0][1]], [jac[1][0], jac[1][1]]];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                (det.abs() > 1e-300).then(|| {
                    [(-r[0] * m[1][1] + r[1] * m[0][1]) / det, (-r[1] * m[0][0] + r[0] * m[1][0]) / det, 0.0, 0.0]
                })
            }
            .ok_or_else(|| Error::NewtonFailed("singular Jacobian".into()))?;
            // damped update
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut xn = x;
                for c in 0..unknowns {
                    xn[c] += step * dx[c];
                }
                let rn = pairing.residual(field, xn);
                let nn = sup(&rn[..unknowns]) / pairing.pm.norm;
                if nn.is_finite() && nn < res_norm {
                    x = xn;
                    r = rn;
                    res_norm = nn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let b_new = x[3];
        let refreeze = fixed_ab.is_none() && pass + 1 < cfg.passes && b_new > 1e-6 && b_new < 0.5
            && ((b_new - b_ref) / b_ref).abs() > 1e-7;
        if !refreeze {
            break;
        }
        b_ref = b_new;
        pairing = Pairing::new(coeffs, b_ref, cfg.m)?;
    }
    if !(res_norm < cfg.tol.max(1e-10)) {
        return Err(Error::NewtonFailed(format!("orthogonality residual {res_norm:e}")));
    }
    let lambda = x[0].exp();
    let (e1, e2, e4, w, profile) = remainder_energies(field, coeffs, lambda, x[1], x[2], x[3], b_ref)?;
    Ok(Decomposition {
        lambda,
        theta: x[1],
        a: x[2],
        b: x[3],
        w,
        profile,
        e1,
        e2,
        e4,
        orth_residual: res_norm,
        iterations,
    })
}

/// Remainder w = w_hat - P(w0) on the rescaled field grid, where P(w0) is the
/// sphere projection of the localized profile, and its energies E1, E2, E4.
#[allow(clippy::too_many_arguments)]
fn remainder_energies(
    field: &SphereField,
    coeffs: &Coefficients,
    lambda: f64,
    theta: f64,
    a: f64,
    b: f64,
    b_ref: f64,
) -> Result<(f64, f64, f64, FrenetField, FrenetField)> {
    // the field's own nodes, so no interpolation noise enters H_perp^2 w
    let ygrid = Arc::new(field.grid.scaled(1.0 / lambda)?);
    let y_end = ygrid.y_max();
    let (b0, _) = ops::scales(b_ref)?;
    if y_end < 0.5 * b0 {
        return Err(Error::Grid(format!("domain ends at y = {y_end}, profiles need {}", 0.5 * b0)));
    }
    let prof = ProfileSet::build_on(coeffs, b_ref, &ygrid)?;
    let mut w = frame_components(field, &ygrid, lambda, theta);
    w.grid = ygrid.clone();
    let mut p0 = prof.w0_localized(a, b);
    let y = ygrid.nodes();
    let n = y.len();
    for i in 0..n {
        let p = project(p0.alpha[i], p0.beta[i], p0.gamma[i]);
        p0.alpha[i] = p[0];
        p0.beta[i] = p[1];
        p0.gamma[i] = p[2];
        w.alpha[i] -= p[0];
        w.beta[i] -= p[1];
        w.gamma[i] -= p[2];
    }
    let (e1, e2, e4) = energies(&w, n);
    Ok((e1, e2, e4, w, p0))
}

/// E1 = int |w'|^2 + |w/y|^2, E2 = int |H_perp w|^2, E4 = int |H_perp^2 w|^2,
/// all against y dy over the first `valid` nodes; the four nodes next to that
/// edge are dropped for the higher ones.
pub fn energies(w: &FrenetField, valid: usize) -> (f64, f64, f64) {
    let g = &w.grid;
    let y = g.nodes();
    let n = y.len();
    let valid = valid.min(n);
    let mut d1s = vec![0.0; n];
    for (k, p) in PARITY.iter().enumerate() {
        let c = w.component(k);
        let d = ops::d1(g, c, *p);
        for i in 0..n {
            if i + 1 < valid {
                d1s[i] += (d[i] * d[i] + c[i] * c[i] / (y[i] * y[i])) * y[i];
            }
        }
    }
    let h1 = ops::apply_mh_perp(w);
    let h2 = ops::apply_mh_perp(&h1);
    let cut = |v: Vec<f64>| -> Vec<f64> {
        v.into_iter().enumerate().map(|(i, x)| if i + 4 < valid { x } else { 0.0 }).collect()
    };
    let e2d = cut((0..n).map(|i| (h1.alpha[i].powi(2) + h1.beta[i].powi(2)) * y[i]).collect());
    let e4d = cut((0..n).map(|i| (h2.alpha[i].powi(2) + h2.beta[i].powi(2)) * y[i]).collect());
    (g.integral(&d1s), g.integral(&e2d), g.integral(&e4d))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub lambda0: f64,
    pub theta0: f64,
    pub a0: f64,
    pub b0: f64,
    /// Node spacing at the origin is lambda / points_per_lambda.
    pub points_per_lambda: f64,
    /// Geometric growth of the spacing far out.
    pub ratio: f64,
    /// Outer radius in units of lambda0 B1(b0).
    pub r_max_factor: f64,
    pub cfl: f64,
    pub extract_every: usize,
    /// Stop once lambda / lambda0 falls below this.
    pub stop_ratio: f64,
    pub t_max: f64,
    pub max_steps: u64,
    pub extract: ExtractConfig,
    /// Rebuild the grid each time lambda halves.
    pub regrid: bool,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            lambda0: 1.0,
            theta0: 0.0,
            a0: 0.0,
            b0: 0.05,
            points_per_lambda: 40.0,
            ratio: 1.03,
            r_max_factor: 20.0,
            cfl: 0.25,
            extract_every: 2000,
            stop_ratio: 0.2,
            t_max: 1e3,
            max_steps: 20_000_000,
            extract: ExtractConfig::default(),
            regrid: true,
        }
    }
}

impl BlowupConfig {
    pub fn validate(&self) -> Result<Coefficients> {
        let c = Coefficients::derive(self.rho1, self.rho2)?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.b0 > 0.0 && self.b0 < 0.2) {
            return bad("b0 must lie in (0, 0.2)");
        }
        if !(self.lambda0 > 0.0) {
            return bad("lambda0 must be positive");
        }
        if !(self.points_per_lambda >= 4.0) {
            return bad("points_per_lambda must be at least 4");
        }
        if !(self.ratio > 1.0 && self.ratio < 1.5) {
            return bad("ratio must lie in (1, 1.5)");
        }
        if !(self.r_max_factor >= 1.0) {
            return bad("r_max_factor must be at least 1");
        }
        if !(self.stop_ratio > 0.0 && self.stop_ratio < 1.0) {
            return bad("stop_ratio must lie in (0, 1)");
        }
        if self.extract_every == 0 {
            return bad("extract_every must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.extract.m >= 1.0) {
            return bad("extract.m must be at least 1");
        }
        if !(self.extract.b_ref > 0.0 && self.extract.b_ref < 0.5) {
            return bad("extract.b_ref must lie in (0, 0.5)");
        }
        Ok(c)
    }

    pub fn r_max(&self) -> f64 {
        let b1 = self.b0.ln().abs() / self.b0.sqrt();
        self.r_max_factor * self.lambda0 * b1
    }

    pub fn grid_for(&self, lambda: f64) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::sinh_staggered(lambda / self.points_per_lambda, self.ratio, self.r_max())?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub t: f64,
    pub s: f64,
    pub lambda: f64,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub energy: f64,
    pub e1: f64,
    pub e2: f64,
    pub e4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// lambda fell below stop_ratio * lambda0.
    Concentrated,
    /// t_max or max_steps reached first.
    Budget,
    /// A step or an extraction failed; rows up to that point are kept.
    Partial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupRun {
    pub rows: Vec<FlowRow>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps: u64,
    pub regrids: usize,
    pub fit: Option<FitReport>,
    pub fit_error: Option<String>,
}

/// Seed, evolve and track the modulation parameters until concentration.
pub fn run_blowup(cfg: &BlowupConfig) -> Result<BlowupRun> {
    let coeffs = cfg.validate()?;
    let grid = cfg.grid_for(cfg.lambda0)?;
    let field = seed_initial_data(&coeffs, cfg.lambda0, cfg.theta0, cfg.a0, cfg.b0, &grid)?;
    let mut solver = FlowSolver::new(field, coeffs, cfg.cfl)?;
    let mut rows = Vec::new();
    let mut guess = [cfg.lambda0, cfg.theta0, cfg.a0, cfg.b0];
    let mut s = 1.0 / cfg.b0;
    let mut lambda_grid = cfg.lambda0;
    let mut regrids = 0;
    let mut status = RunStatus::Budget;
    let mut message = None;
    let record = |solver: &FlowSolver, guess: [f64; 4]| -> Result<Decomposition> {
        extract_modulation(&solver.field, &coeffs, guess, None, &cfg.extract)
    };
    let d = record(&solver, guess)?;
    rows.push(row_of(&solver, &d, s));
    guess = [d.lambda, d.theta, d.a, d.b];
    while solver.t < cfg.t_max && solver.steps < cfg.max_steps {
        let mut failed = None;
        for _ in 0..cfg.extract_every {
            if let Err(e) = solver.step() {
                failed = Some(e);
                break;
            }
        }
        if let Some(e) = failed {
            status = RunStatus::Partial;
            message = Some(e.to_string());
            break;
        }
        let d = match record(&solver, guess) {
            Ok(d) => d,
            Err(e) => {
                status = RunStatus::Partial;
                message = Some(e.to_string());
                break;
            }
        };
        let last = rows.last().copied().unwrap();
        let dt = solver.t - last.t;
        s += 0.5 * dt * (1.0 / (last.lambda * last.lambda) + 1.0 / (d.lambda * d.lambda));
        rows.push(row_of(&solver, &d, s));
        guess = [d.lambda, d.theta, d.a, d.b];
        if d.lambda <= cfg.stop_ratio * cfg.lambda0 {
            status = RunStatus::Concentrated;
            break;
        }
        if cfg.regrid && d.lambda <= 0.5 * lambda_grid {
            let g = cfg.grid_for(d.lambda)?;
            let (t, steps) = (solver.t, solver.steps);
            let f = solver.field.regrid(&g);
            solver = FlowSolver::new(f, coeffs, cfg.cfl)?;
            solver.t = t;
            solver.steps = steps;
            lambda_grid = d.lambda;
            regrids += 1;
        }
    }
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let (fit, fit_error) = match fit_rate(&t, &l, Some(&b)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(BlowupRun { rows, status, message, steps: solver.steps, regrids, fit, fit_error })
}

fn row_of(solver: &FlowSolver, d: &Decomposition, s: f64) -> FlowRow {
    FlowRow {
        t: solver.t,
        s,
        lambda: d.lambda,
        theta: d.theta,
        a: d.a,
        b: d.b,
        energy: dirichlet_energy(&solver.field),
        e1: d.e1,
        e2: d.e2,
        e4: d.e4,
    }
}
