//! Two-time bath correlation function `C(t, t0 | t', t0) = C_b + C_I` at zero
//! force, and its decay timescale.

use num_complex::Complex64;

use crate::bath::{bare_correlation_c0, moments, DiscreteBath};
use crate::error::{Error, Result};
use crate::response::ResponseFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub total: Complex64,
    pub born: Complex64,
    pub interaction: Complex64,
}

fn simpson_weights(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
}

fn intervals_for(len: f64, step: f64) -> usize {
    (((len / step).ceil() as usize).max(8) + 1) & !1
}

struct Parts {
    cross_t: Complex64,
    cross_tp: Complex64,
    double: Complex64,
}

fn parts(bath: &DiscreteBath, response: &ResponseFunction, ut: f64, utp: f64, n: usize, m: usize) -> Parts {
    // ut = t - t0, utp = t' - t0; nodes measured from t0
    let (h, k) = (ut / n as f64, utp / m as f64);
    let s: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let sp: Vec<f64> = (0..=m).map(|j| j as f64 * k).collect();
    let gd = |u: f64| response.g_dot_at(u).expect("coverage checked");
    let gs: Vec<Complex64> = s.iter().zip(simpson_weights(n)).map(|(&x, w)| gd(ut - x) * (w * h / 3.0)).collect();
    let gps: Vec<Complex64> = sp.iter().zip(simpson_weights(m)).map(|(&x, w)| gd(utp - x).conj() * (w * k / 3.0)).collect();
    let mut cross_t = Complex64::new(0.0, 0.0);
    let mut cross_tp = Complex64::new(0.0, 0.0);
    let mut double = Complex64::new(0.0, 0.0);
    for (i, &si) in s.iter().enumerate() {
        cross_t += bare_correlation_c0(bath, si - utp) * gs[i];
        let mut row = Complex64::new(0.0, 0.0);
        for (j, &sj) in sp.iter().enumerate() {
            row += bare_correlation_c0(bath, si - sj) * gps[j];
        }
        double += row * gs[i];
    }
    for (j, &sj) in sp.iter().enumerate() {
        cross_tp += bare_correlation_c0(bath, ut - sj) * gps[j];
    }
    Parts { cross_t, cross_tp, double }
}

/// `C(t, t0 | t', t0)` with `G_dot(t, s)` read as `G_dot(t - s)`.
/// `probe_second_moment` is `1/2 <a^dag a + a a^dag>_0 - |<a>_0|^2`.
pub fn bath_correlation(response: &ResponseFunction, probe_second_moment: f64, t: f64, t_prime: f64, t0: f64) -> Result<CorrelationResult> {
    if !(t >= t0 && t_prime >= t0) {
        return Err(Error::InvalidParameter(format!("need t, t' >= t0, got t={t}, t'={t_prime}, t0={t0}")));
    }
    let (ut, utp) = (t - t0, t_prime - t0);
    response.check_coverage(ut.max(utp))?;
    let bath = response.bath();
    let omega0 = bath.probe_frequency();
    let phase = Complex64::from_polar(1.0, -omega0 * (t - t_prime));
    let born = phase * bare_correlation_c0(bath, t - t_prime);
    let edge = response.g_dot_at(ut)? * response.g_dot_at(utp)?.conj() * probe_second_moment;
    let step = response.grid().step();
    let (mut n, mut m) = (intervals_for(ut, step), intervals_for(utp, step));
    let sum = |p: &Parts| p.cross_t + p.cross_tp + p.double;
    let mut prev = parts(bath, response, ut, utp, n, m);
    let mut doublings = 0;
    loop {
        n *= 2;
        m *= 2;
        doublings += 1;
        let cur = parts(bath, response, ut, utp, n, m);
        let scale = born.norm().max((sum(&cur) + edge).norm()).max(1e-300);
        if (sum(&cur) - sum(&prev)).norm() <= 1e-7 * scale || doublings >= 4 {
            prev = cur;
            break;
        }
        prev = cur;
    }
    let interaction = phase * (sum(&prev) + edge);
    Ok(CorrelationResult { total: born + interaction, born, interaction })
}

/// Decay of `|C(t, t0 | t0, t0)|` and of the Born part alone.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTimescale {
    pub decay_scale: f64,
    /// The total never fell below `|C(0)| / e` inside the grid; `decay_scale`
    /// is then the grid length.
    pub never_decayed: bool,
    pub born_decay_scale: f64,
    pub born_never_decayed: bool,
    /// `min(1 / Omega_2, 1 / |chi_2|)`.
    pub predicted: f64,
    pub ratio: f64,
}

const SCAN: usize = 256;

fn first_e_fold(f: impl Fn(f64) -> Result<f64>, t_end: f64) -> Result<(f64, bool)> {
    let c0 = f(0.0)?;
    let level = c0 / std::f64::consts::E;
    let mut prev = 0.0;
    for i in 1..=SCAN {
        let x = t_end * i as f64 / SCAN as f64;
        if f(x)? < level {
            let (mut lo, mut hi) = (prev, x);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if f(mid)? < level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok((0.5 * (lo + hi), false));
        }
        prev = x;
    }
    Ok((t_end, true))
}

pub fn correlation_timescale_check(response: &ResponseFunction) -> Result<CorrelationTimescale> {
    let bath = response.bath();
    let m = moments(bath, 2)?;
    if !(m.script_n > 0.0) {
        return Err(Error::NoiselessBath);
    }
    let t_end = response.t_end();
    // the t' = t0 slice does not involve the probe's initial moments
    let (decay_scale, never_decayed) = first_e_fold(|x| Ok(bath_correlation(response, 0.0, x, 0.0, 0.0)?.total.norm()), t_end)?;
    let (born_decay_scale, born_never_decayed) = first_e_fold(|x| Ok(bare_correlation_c0(bath, x).norm()), t_end)?;
    let mut predicted = m.omega(2).map_or(f64::INFINITY, |w| 1.0 / w);
    if let Some(c) = m.chi(2) {
        if c != 0.0 {
            predicted = predicted.min(1.0 / c.abs());
        }
    }
    Ok(CorrelationTimescale {
        decay_scale,
        never_decayed,
        born_decay_scale,
        born_never_decayed,
        predicted,
        ratio: decay_scale / predicted,
    })
}
