//! Adaptive Dormand-Prince 5(4) integrator for small autonomous-in-form
//! ODE systems `y' = f(s, y)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// What the observer wants after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Integrate from `s0` to `s1`, calling `observe(s, y)` after every accepted
/// step and at every requested output point in `outputs` (ascending, within
/// [s0, s1]); steps are shortened to land on output points exactly.
/// Returns the final (s, y).
pub fn integrate<F, O>(
    f: F,
    s0: f64,
    y0: &[f64],
    s1: f64,
    outputs: &[f64],
    tol: Tolerance,
    mut observe: O,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    O: FnMut(f64, &[f64], bool) -> Control,
{
    let n = y0.len();
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut h = ((s1 - s0) * 1e-6).max(1e-12 * s0.abs().max(1.0));
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = f(s, &y);
    let mut next_out = outputs.iter().position(|&o| o >= s0).unwrap_or(outputs.len());
    if next_out < outputs.len() && outputs[next_out] == s0 {
        if observe(s, &y, true) == Control::Stop {
            return Ok((s, y));
        }
        next_out += 1;
    }
    let mut steps = 0usize;
    let mut tmp = vec![0.0; n];
    while s < s1 {
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::Integrator("step budget exhausted".into()));
        }
        let target = if next_out < outputs.len() { outputs[next_out].min(s1) } else { s1 };
        let landed = s + h >= target;
        let hs = if landed { target - s } else { h };
        for st in 1..7 {
            for j in 0..n {
                let mut acc = y[j];
                for (m, km) in k.iter().enumerate().take(st) {
                    acc += hs * A[st][m] * km[j];
                }
                tmp[j] = acc;
            }
            k[st] = f(s + C[st] * hs, &tmp);
        }
        let mut err = 0.0f64;
        let mut y5 = vec![0.0; n];
        for j in 0..n {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for m in 0..7 {
                d5 += B5[m] * k[m][j];
                d4 += B4[m] * k[m][j];
            }
            y5[j] = y[j] + hs * d5;
            let sc = tol.atol + tol.rtol * y[j].abs().max(y5[j].abs());
            err = err.max((hs * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integrator(format!("non-finite state at s = {s}")));
        }
        if err <= 1.0 {
            s = if landed { target } else { s + hs };
            y = y5;
            k[0] = k[6].clone();
            let at_output = landed && next_out < outputs.len() && target == outputs[next_out];
            if at_output {
                next_out += 1;
            }
            if observe(s, &y, at_output) == Control::Stop {
                return Ok((s, y));
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !landed {
                h *= fac;
            }
        } else {
            h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
        if h < 1e-14 * s.abs().max(1.0) && s < s1 {
            return Err(Error::Integrator(format!("step size underflow at s = {s}")));
        }
    }
    Ok((s, y))
}
