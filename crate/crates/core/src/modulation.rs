//! Morawetz coefficients, the leading-order modulation system, the
//! kappa-shooting for the unstable direction and the blowup-rate fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control, Tolerance};

/// Morawetz coefficients c1..c4 derived from (rho1, rho2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub rho1: f64,
    pub rho2: f64,
    pub k1: f64,
    pub k2: f64,
    pub delta_k: f64,
    pub c: [f64; 4],
}

impl Coefficients {
    pub fn derive(rho1: f64, rho2: f64) -> Result<Self> {
        if !rho1.is_finite() || !rho2.is_finite() {
            return Err(Error::InvalidCoefficients("non-finite rho".into()));
        }
        if rho2 <= 0.0 {
            return Err(Error::InvalidCoefficients(format!("rho2 must be positive, got {rho2}")));
        }
        let ratio = (rho1 / rho2).powi(2);
        let k1 = if ratio >= 1.0 { 1.0 } else { 0.0 };
        let k2 = 1.0 - k1;
        let dk = k1 - k2;
        let s = rho1 * rho1 + rho2 * rho2;
        let d = dk * rho1 * rho1 + rho2 * rho2;
        let c = [
            rho1 / s,
            2.0 * rho1 * (rho1 * rho1 - rho2 * rho2) / (s * d),
            rho2 / s,
            2.0 * rho1 * rho1 * rho2 * (1.0 + dk) / (s * d),
        ];
        Ok(Self { rho1, rho2, k1, k2, delta_k: dk, c })
    }

    /// rho1^2 + rho2^2.
    pub fn norm_sq(&self) -> f64 {
        self.rho1 * self.rho1 + self.rho2 * self.rho2
    }

    /// (C1, C2, C3, C4), which the construction requires to be (-1, 0, 0, 1).
    pub fn numerology(&self) -> [f64; 4] {
        let (r1, r2) = (self.rho1, self.rho2);
        let [c1, c2, c3, c4] = self.c;
        [
            -(r1 * c1 + r2 * c3),
            r1 * c3 - r2 * c1,
            -r1 * c3 + r1 * c4 - r2 * c1 - r2 * c2,
            -r1 * c1 + r1 * c2 * self.delta_k + r2 * c3 + r2 * c4,
        ]
    }
}

/// One sample of the modulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub s: f64,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub theta: f64,
}

impl ModulationState {
    pub fn new(s: f64, a: f64, b: f64) -> Self {
        Self { s, t: 0.0, a, b, lambda: 1.0, theta: 0.0 }
    }

    /// kappa = 2 a |log b| / b.
    pub fn kappa(&self) -> f64 {
        2.0 * self.a * self.b.ln().abs() / self.b
    }
}

/// The leading-order system in the self-similar time s:
/// a_s = -2ab/L + f b^2/(2L), b_s = -b^2 (1 + 2/L), lambda_s/lambda = -b,
/// Theta_s = -a, t_s = lambda^2, with L = |log b| and f the forcing scale
/// (zero for the unperturbed system). The coefficients do not enter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSystem {
    pub forcing: f64,
    pub tol: (f64, f64),
}

impl Default for ModulationSystem {
    fn default() -> Self {
        Self { forcing: 0.0, tol: (1e-11, 1e-300) }
    }
}

fn pack(st: &ModulationState) -> [f64; 5] {
    [st.a, st.b, st.lambda.ln(), st.theta, st.t]
}

fn unpack(s: f64, y: &[f64]) -> ModulationState {
    ModulationState { s, t: y[4], a: y[0], b: y[1], lambda: y[2].exp(), theta: y[3] }
}

impl ModulationSystem {
    pub fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let (a, b) = (y[0], y[1]);
        let l = b.abs().ln().abs();
        vec![
            -2.0 * a * b / l + self.forcing * b * b / (2.0 * l),
            -b * b * (1.0 + 2.0 / l),
            -b,
            -a,
            (2.0 * y[2]).exp(),
        ]
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance { rtol: self.tol.0, atol: self.tol.1 }
    }

    fn check_start(st: &ModulationState) -> Result<()> {
        if !(st.b > 0.0 && st.b < 1.0) {
            return Err(Error::Domain(format!("modulation needs 0 < b < 1, got {}", st.b)));
        }
        if !(st.lambda > 0.0) {
            return Err(Error::Domain("lambda must be positive".into()));
        }
        Ok(())
    }

    /// Integrate to `s_end`, sampling at `n_out` log-spaced values of s
    /// (including both ends).
    pub fn integrate(&self, start: ModulationState, s_end: f64, n_out: usize) -> Result<Vec<ModulationState>> {
        Self::check_start(&start)?;
        if !(s_end > start.s) {
            return Err(Error::Domain("s_end must exceed s0".into()));
        }
        let outs = log_spaced(start.s, s_end, n_out.max(2));
        let mut rows = Vec::with_capacity(outs.len());
        let mut bad = None;
        ode::integrate(
            |_, y| self.rhs(y),
            start.s,
            &pack(&start),
            s_end,
            &outs,
            self.tolerance(),
            |s, y, at_out| {
                if !(y[1] > 0.0 && y[1] < 1.0) {
                    bad = Some(s);
                    return Control::Stop;
                }
                if at_out {
                    rows.push(unpack(s, y));
                }
                Control::Continue
            },
        )?;
        if let Some(s) = bad {
            return Err(Error::Integrator(format!("b left (0, 1) at s = {s}")));
        }
        Ok(rows)
    }

    /// Run until |kappa| > 1 or `s_end`; returns the last state and whether
    /// the exit set was reached.
    pub fn run_until_exit(&self, start: ModulationState, s_end: f64) -> Result<(ModulationState, bool)> {
        Self::check_start(&start)?;
        let mut exited = false;
        let (s, y) = ode::integrate(
            |_, y| self.rhs(y),
            start.s,
            &pack(&start),
            s_end,
            &[],
            self.tolerance(),
            |s, y, _| {
                if unpack(s, y).kappa().abs() > 1.0 {
                    exited = true;
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )?;
        Ok((unpack(s, &y), exited))
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootResult {
    pub a0: f64,
    pub kappa0: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Endpoints did not exit with opposite signs; a0 is reported as 0.
    pub degenerate: bool,
    /// Final state of the trajectory started from `a0`.
    pub end: ModulationState,
    pub exited: bool,
    pub max_abs_kappa: f64,
}

/// Bisection on a0 in [-b0/(4|log b0|), b0/(4|log b0|)] for the trajectory
/// that stays in |kappa| <= 1 up to `s_end`. Trajectories are classified by
/// the sign of kappa when they leave the exit set (or at `s_end`).
pub fn kappa_shoot(sys: &ModulationSystem, b0: f64, s0: f64, s_end: f64, n_iter: usize) -> Result<ShootResult> {
    let l0 = b0.ln().abs();
    let half = b0 / (4.0 * l0);
    let classify = |a0: f64| -> Result<(f64, bool)> {
        let (st, exited) = sys.run_until_exit(ModulationState::new(s0, a0, b0), s_end)?;
        Ok((st.kappa(), exited))
    };
    let (k_lo, e_lo) = classify(-half)?;
    let (k_hi, e_hi) = classify(half)?;
    let mut lo = -half;
    let mut hi = half;
    let mut iterations = 0;
    let degenerate = !(e_lo && e_hi && k_lo.signum() != k_hi.signum());
    let a0 = if degenerate {
        0.0
    } else {
        let s_lo = k_lo.signum();
        for _ in 0..n_iter {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let (k, _) = classify(mid)?;
            if k == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if k.signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * half {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let traj = sys.integrate(ModulationState::new(s0, a0, b0), s_end, 400)?;
    let max_abs_kappa = traj.iter().fold(0.0f64, |m, r| m.max(r.kappa().abs()));
    let end = *traj.last().unwrap();
    Ok(ShootResult {
        a0,
        kappa0: 2.0 * a0 * l0 / b0,
        bracket: (lo, hi),
        iterations,
        degenerate,
        end,
        exited: max_abs_kappa > 1.0,
        max_abs_kappa,
    })
}

/// sup |a| |log b|^{3/2} / b and the integral of |a| ds along a trajectory.
pub fn refined_a_bound(rows: &[ModulationState]) -> (f64, f64) {
    let sup = rows
        .iter()
        .map(|r| r.a.abs() * r.b.ln().abs().powf(1.5) / r.b)
        .fold(0.0f64, f64::max);
    let int = rows
        .windows(2)
        .map(|w| 0.5 * (w[0].a.abs() + w[1].a.abs()) * (w[1].s - w[0].s))
        .sum();
    (sup, int)
}

/// Fit of lambda(t) = C (T - t) / |log(T - t)|^p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub t_blowup: f64,
    pub c: f64,
    pub p: f64,
    /// RMS residual in log lambda.
    pub rms: f64,
    pub samples: usize,
    /// C_b and RMS residual of log b against (T - t)/|log(T - t)|^4.
    pub b_fit: Option<(f64, f64)>,
}

/// Least squares in log lambda. For fixed T the model is linear in
/// (log C, p), so T is found by a one-dimensional search on the projected
/// residual and the other two parameters follow in closed form.
pub fn fit_rate(t: &[f64], lambda: &[f64], b: Option<&[f64]>) -> Result<FitReport> {
    let n = t.len();
    if n != lambda.len() {
        return Err(Error::Fit("t and lambda lengths differ".into()));
    }
    if n < 20 {
        return Err(Error::Fit(format!("need at least 20 samples, got {n}")));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Fit("t must be strictly increasing".into()));
    }
    if lambda.windows(2).any(|w| !(w[1] < w[0])) || lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Fit("lambda must be positive and strictly decreasing".into()));
    }
    let t_last = t[n - 1];
    let span = t_last - t[0];
    let ll: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
    let cost = |u: f64| -> (f64, f64, f64) {
        let tb = t_last + span * u.exp();
        projected(t, &ll, tb)
    };
    // coarse scan over T - t_last in [1e-10, 1e4] * span
    let us: Vec<f64> = (0..=560).map(|i| (-10.0 + 14.0 * i as f64 / 560.0) * std::f64::consts::LN_10).collect();
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (i, &u) in us.iter().enumerate() {
        let c = cost(u).0;
        if c < best_cost {
            best_cost = c;
            best = i;
        }
    }
    let (mut a, mut bb) = (us[best.saturating_sub(1)], us[(best + 1).min(us.len() - 1)]);
    // golden section on the bracketing cells
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = bb - g * (bb - a);
    let mut x2 = a + g * (bb - a);
    let (mut f1, mut f2) = (cost(x1).0, cost(x2).0);
    for _ in 0..200 {
        if (bb - a).abs() < 1e-14 {
            break;
        }
        if f1 < f2 {
            bb = x2;
            x2 = x1;
            f2 = f1;
            x1 = bb - g * (bb - a);
            f1 = cost(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (bb - a);
            f2 = cost(x2).0;
        }
    }
    let u = 0.5 * (a + bb);
    let (c2, log_c, p) = cost(u);
    let tb = t_last + span * u.exp();
    if !c2.is_finite() {
        return Err(Error::Fit("no finite fit found".into()));
    }
    let b_fit = match b {
        Some(bs) if bs.len() == n && bs.iter().all(|&v| v > 0.0) => {
            let r: Vec<f64> = (0..n)
                .map(|i| {
                    let d = tb - t[i];
                    bs[i].ln() - d.ln() + 4.0 * d.ln().abs().ln()
                })
                .collect();
            let m = r.iter().sum::<f64>() / n as f64;
            let rms = (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            Some((m.exp(), rms))
        }
        _ => None,
    };
    Ok(FitReport { t_blowup: tb, c: log_c.exp(), p, rms: (c2 / n as f64).sqrt(), samples: n, b_fit })
}

/// For fixed T: least squares of log lambda - log(T-t) = log C - p log|log(T-t)|.
/// Returns (sum of squared residuals, log C, p).
fn projected(t: &[f64], ll: &[f64], tb: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let mut xs = Vec::with_capacity(t.len());
    let mut ys = Vec::with_capacity(t.len());
    for (ti, li) in t.iter().zip(ll) {
        let d = tb - ti;
        let x = -d.ln().abs().ln();
        let y = li - d.ln();
        if !x.is_finite() {
            return (f64::INFINITY, 0.0, 0.0);
        }
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        xs.push(x);
        ys.push(y);
    }
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let p = (n * sxy - sx * sy) / den;
    let lc = (sy - p * sx) / n;
    let ss = xs.iter().zip(&ys).map(|(x, y)| (y - lc - p * x).powi(2)).sum();
    (ss, lc, p)
}
