//! Closed-form kernel functions of the linearized operator around Q.
//!
//! `y` is the self-similar radial variable. All functions are evaluated in
//! double precision; near the origin `t1` switches to its Taylor series to
//! avoid the cancellation in the closed form.

use crate::error::{Error, Result};
use crate::quadrature;

pub const PI2_OVER_24: f64 = std::f64::consts::PI * std::f64::consts::PI / 24.0;

/// Below this radius `t1`, `t1_prime` and the log integral use series.
pub const SERIES_SWITCH: f64 = 0.1;

// Taylor coefficients of T1 in odd powers y^3, y^5, ..., y^21.
const T1_SERIES: [f64; 10] = [
    -1.0 / 4.0,
    1.0 / 6.0,
    -11.0 / 72.0,
    107.0 / 720.0,
    -529.0 / 3600.0,
    3683.0 / 25200.0,
    -12853.0 / 88200.0,
    102649.0 / 705600.0,
    -922861.0 / 6350400.0,
    2028883.0 / 13970880.0,
];

pub fn lambda_phi(y: f64) -> f64 {
    2.0 * y / (1.0 + y * y)
}

pub fn lambda_phi_prime(y: f64) -> f64 {
    let d = 1.0 + y * y;
    2.0 * (1.0 - y * y) / (d * d)
}

pub fn z(y: f64) -> f64 {
    (1.0 - y * y) / (1.0 + y * y)
}

pub fn z_prime(y: f64) -> f64 {
    let d = 1.0 + y * y;
    -4.0 * y / (d * d)
}

/// y Z'(y).
pub fn lambda_z(y: f64) -> f64 {
    y * z_prime(y)
}

pub fn v(y: f64) -> f64 {
    let y2 = y * y;
    let d = 1.0 + y2;
    (y2 * y2 - 6.0 * y2 + 1.0) / (d * d)
}

pub fn v_prime(y: f64) -> f64 {
    let d = 1.0 + y * y;
    16.0 * y * (y * y - 1.0) / (d * d * d)
}

/// y V'(y).
pub fn lambda_v(y: f64) -> f64 {
    y * v_prime(y)
}

/// Singular kernel element of H, normalized so that the Wronskian with
/// Lambda phi is -1/y.
pub fn gamma(y: f64) -> Result<f64> {
    if y.is_nan() || y <= 0.0 {
        return Err(Error::Domain(format!("Gamma needs y > 0, got {y}")));
    }
    Ok(gamma_unchecked(y))
}

pub(crate) fn gamma_unchecked(y: f64) -> f64 {
    (y * y * y + 4.0 * y * y.ln() - 1.0 / y) / (4.0 * (1.0 + y * y))
}

pub fn gamma_prime(y: f64) -> Result<f64> {
    if y.is_nan() || y <= 0.0 {
        return Err(Error::Domain(format!("Gamma' needs y > 0, got {y}")));
    }
    let d = 1.0 + y * y;
    let n = y * y * y + 4.0 * y * y.ln() - 1.0 / y;
    let dn = 3.0 * y * y + 4.0 * y.ln() + 4.0 + 1.0 / (y * y);
    Ok((dn * d - 2.0 * y * n) / (4.0 * d * d))
}

/// The integral of log(1+x^2)/x over [0, y], equal to -Li2(-y^2)/2.
pub fn log_integral(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y < SERIES_SWITCH {
        // sum_k (-1)^(k+1) y^(2k) / (2 k^2)
        let u = y * y;
        let mut term = u;
        let mut acc = 0.0;
        for k in 1..=12 {
            let kf = k as f64;
            acc += if k % 2 == 1 { term } else { -term } / (2.0 * kf * kf);
            term *= u;
        }
        return acc;
    }
    if y <= 1.0 {
        return quadrature::integrate(|x| (x * x).ln_1p() / x, 0.0, y, 1e-15, 1e-15);
    }
    // x = e^t on [1, y] keeps the integrand smooth and bounded
    PI2_OVER_24 + quadrature::integrate(|t| (2.0 * t).exp().ln_1p(), 0.0, y.ln(), 1e-14, 1e-15)
}

/// Log integral on increasing sorted nodes, accumulated panel by panel.
pub fn log_integral_on(nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let f = |x: f64| (x * x).ln_1p() / x;
    let mut prev_y = 0.0;
    let mut acc = 0.0;
    for &y in nodes {
        if y < SERIES_SWITCH {
            acc = log_integral(y);
        } else if prev_y < SERIES_SWITCH {
            acc = log_integral(SERIES_SWITCH)
                + quadrature::integrate(f, SERIES_SWITCH, y, 1e-15, 1e-15);
        } else {
            acc += quadrature::integrate(f, prev_y, y, 1e-16, 1e-15);
        }
        out.push(acc);
        prev_y = y;
    }
    out
}

fn t1_from_log_integral(y: f64, i0: f64) -> f64 {
    let y2 = y * y;
    let l = y2.ln_1p();
    ((1.0 - y2 * y2) * l + 2.0 * y2 * y2 - y2 - 4.0 * y2 * i0) / (2.0 * y * (1.0 + y2))
}

fn t1_series(y: f64) -> f64 {
    let u = y * y;
    let mut p = 0.0;
    for c in T1_SERIES.iter().rev() {
        p = p * u + c;
    }
    p * y * y * y
}

fn t1_series_prime(y: f64) -> f64 {
    let u = y * y;
    let mut p = 0.0;
    for (k, c) in T1_SERIES.iter().enumerate().rev() {
        p = p * u + c * (2 * k + 3) as f64;
    }
    p * u
}

/// Regular solution of H T1 = Lambda phi, T1 = -y^3/4 + O(y^5) at the origin
/// and T1 = -y log y + O(y) at infinity.
pub fn t1(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y < SERIES_SWITCH {
        t1_series(y)
    } else {
        t1_from_log_integral(y, log_integral(y))
    }
}

/// `t1` on sorted nodes, sharing one accumulated log integral.
pub fn t1_on(nodes: &[f64]) -> Vec<f64> {
    let li = log_integral_on(nodes);
    nodes
        .iter()
        .zip(li)
        .map(|(&y, i0)| {
            if y <= 0.0 {
                0.0
            } else if y < SERIES_SWITCH {
                t1_series(y)
            } else {
                t1_from_log_integral(y, i0)
            }
        })
        .collect()
}

/// A T1 = (1+y^2) log(1+y^2) / y^2 - 1 with A = -d/dy + Z/y.
pub fn a_t1(y: f64) -> f64 {
    if y < 1e-3 {
        let u = y * y;
        return u / 2.0 - u * u / 6.0 + u * u * u / 12.0;
    }
    let u = y * y;
    (1.0 + u) * u.ln_1p() / u - 1.0
}

/// (1+Z) A T1 = 2 log(1+y^2)/y^2 - 2/(1+y^2).
pub fn one_plus_z_a_t1(y: f64) -> f64 {
    if y < 1e-3 {
        let u = y * y;
        return u - 4.0 * u * u / 3.0 + 1.5 * u * u * u;
    }
    let u = y * y;
    2.0 * u.ln_1p() / u - 2.0 / (1.0 + u)
}

/// Derivative of `t1` given its value.
pub fn t1_prime_with(y: f64, t: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y < SERIES_SWITCH {
        t1_series_prime(y)
    } else {
        z(y) * t / y - a_t1(y)
    }
}

pub fn t1_prime(y: f64) -> f64 {
    t1_prime_with(y, t1(y))
}

/// Second derivative from H T1 = Lambda phi.
pub fn t1_second_with(y: f64, t: f64, tp: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    -tp / y + v(y) * t / (y * y) - lambda_phi(y)
}

/// The closed form exactly as usually displayed, with the log integral taken
/// from 1 instead of 0. It differs from `t1` by (pi^2/24) Lambda phi, a
/// kernel element, so it solves the same equation but is not O(y^3) at 0.
pub fn t1_displayed(y: f64) -> f64 {
    t1(y) + PI2_OVER_24 * lambda_phi(y)
}

/// Smooth cutoff: 1 on [0, 1], 0 on [2, inf), C^4 septic-nonic blend between.
pub fn chi(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        let s5 = s * s * s * s * s;
        1.0 - s5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + 70.0 * s))))
    }
}

pub fn chi_prime(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        let t = s * (1.0 - s);
        -630.0 * t * t * t * t
    }
}

pub fn chi_second(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        let t = s * (1.0 - s);
        -2520.0 * t * t * t * (1.0 - 2.0 * s)
    }
}

/// chi_M(y) = chi(y / M).
pub fn chi_m(y: f64, m: f64) -> f64 {
    chi(y / m)
}

/// Ground state Q(y) = (Lambda phi, 0, Z).
pub fn ground_state(y: f64) -> [f64; 3] {
    [lambda_phi(y), 0.0, z(y)]
}

/// Moving frame (e_r, e_tau, Q) along the ground state.
pub fn frenet(y: f64) -> [[f64; 3]; 3] {
    let (lp, zz) = (lambda_phi(y), z(y));
    [[zz, 0.0, -lp], [0.0, 1.0, 0.0], [lp, 0.0, zz]]
}
