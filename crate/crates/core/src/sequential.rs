//! Sequential preparation-and-measurement: total QFI over `nu = floor(T/tau)`
//! repetitions, the numerically optimal interval, and the asymptotic laws.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{bare_correlation_c0, BathMoments};
use crate::error::{Error, Result};
use crate::metrology::script_e;
use crate::probe::{displacement_d, ForceModulation, Window};
use crate::quadrature::{golden_section_max, simpson_adaptive};
use crate::response::ResponseFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialScheme {
    pub total_window: f64,
    pub interval: f64,
    pub repetitions: usize,
    pub start: f64,
}

impl SequentialScheme {
    pub fn new(total_window: f64, interval: f64, start: f64) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::InvalidParameter(format!("interval must be > 0, got {interval}")));
        }
        if !(total_window >= interval) {
            return Err(Error::InvalidParameter(format!(
                "total window {total_window} is shorter than the interval {interval}"
            )));
        }
        // tolerate T/tau landing a hair below an integer
        let repetitions = (total_window / interval * (1.0 + 1e-12)).floor() as usize;
        Ok(Self { total_window, interval, repetitions, start })
    }

    pub fn step_window(&self, k: usize) -> Window {
        let a = self.start + k as f64 * self.interval;
        Window { start: a, end: a + self.interval }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqResult {
    pub total_qfi: f64,
    pub per_step_qfi: Vec<f64>,
    pub tau_used: f64,
    pub xi: f64,
    pub c_coeff: f64,
    /// Per-step variance of the measured quadrature, common to every step.
    pub denominator: f64,
}

/// `int_0^tau int_0^tau G(tau - s) G*(tau - s') C0(s - s') ds ds'` by a
/// tensor-product Simpson rule with node doubling.
pub fn bath_double_integral(response: &ResponseFunction, tau: f64) -> Result<f64> {
    response.check_coverage(tau)?;
    let bath = response.bath();
    if bath.is_empty() || tau <= 0.0 {
        return Ok(0.0);
    }
    let eval = |n: usize| -> f64 {
        let h = tau / n as f64;
        let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let g: Vec<Complex64> = (0..=n).map(|i| response.g_at(tau - i as f64 * h).expect("coverage checked") * w(i)).collect();
        let c: Vec<Complex64> = (0..=n).map(|k| bare_correlation_c0(bath, k as f64 * h)).collect();
        let mut acc = 0.0;
        for i in 0..=n {
            // diagonal plus twice the real part of the lower triangle
            let mut row = g[i] * g[i].conj() * c[0];
            for j in 0..i {
                row += g[i] * g[j].conj() * c[i - j] * 2.0;
            }
            acc += row.re;
        }
        acc * (h / 3.0) * (h / 3.0)
    };
    let rate = bath.probe_frequency().max(bath.k_squared().sqrt()).max(bath.max_abs_detuning());
    let mut n = (((tau * rate * 4.0).ceil() as usize).max(16) + 1) & !1;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() <= 1e-8 * cur.abs() || n >= 4096 {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// `1/4 |G(tau)|^2 / script_e + int int G G* C0`, the per-step variance when
/// each step starts from the best state.
pub fn per_step_variance(energy: f64, response: &ResponseFunction, tau: f64) -> Result<f64> {
    let se = script_e(energy)?;
    Ok(0.25 * response.g_at(tau)?.norm_sqr() / se + bath_double_integral(response, tau)?)
}

pub fn seq_qfi(scheme: &SequentialScheme, energy: f64, response: &ResponseFunction, force: &ForceModulation) -> Result<SeqResult> {
    let omega0 = response.bath().probe_frequency();
    let denominator = per_step_variance(energy, response, scheme.interval)?;
    let per_step_qfi = (0..scheme.repetitions)
        .map(|k| {
            let d = displacement_d(response, force, scheme.step_window(k))?;
            Ok(if d.abs() == 0.0 { 0.0 } else { d.abs().powi(2) / denominator })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (xi, c_coeff) = xi_and_c(force, omega0, scheme.total_window, scheme.start);
    Ok(SeqResult {
        total_qfi: per_step_qfi.iter().sum(),
        per_step_qfi,
        tau_used: scheme.interval,
        xi,
        c_coeff,
        denominator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauOptimum {
    pub tau_opt: f64,
    pub seq: SeqResult,
    /// Set when the best grid point sits on a bound; widen the bounds.
    pub at_boundary: Option<Bound>,
    /// The coarse scan, `(tau, total_qfi)`.
    pub scan: Vec<(f64, f64)>,
}

/// `[8 h, min(T, 5 / Omega_2)]`.
pub fn default_tau_bounds(response: &ResponseFunction, total_window: f64) -> (f64, f64) {
    let lo = 8.0 * response.grid().step();
    let hi = total_window.min(5.0 * crate::response::inverse_omega2(response.bath())).min(response.t_end());
    (lo, hi)
}

pub const SCAN_POINTS: usize = 64;

/// Log-spaced scan of the total QFI followed by golden-section refinement
/// to relative width `1e-4`.
pub fn optimize_tau(
    total_window: f64,
    energy: f64,
    response: &ResponseFunction,
    force: &ForceModulation,
    start: f64,
    tau_bounds: Option<(f64, f64)>,
) -> Result<TauOptimum> {
    let (lo, hi) = tau_bounds.unwrap_or_else(|| default_tau_bounds(response, total_window));
    if !(lo > 0.0 && hi > lo && hi <= total_window * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("tau bounds [{lo}, {hi}] must satisfy 0 < lo < hi <= T")));
    }
    response.check_coverage(hi)?;
    script_e(energy)?;
    let total = |tau: f64| -> Result<f64> {
        let scheme = SequentialScheme::new(total_window, tau.min(total_window), start)?;
        Ok(seq_qfi(&scheme, energy, response, force)?.total_qfi)
    };
    let ratio = (hi / lo).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let taus: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i == SCAN_POINTS - 1 { hi } else { lo * ratio.powi(i as i32) })
        .collect();
    let values = taus.par_iter().map(|&t| total(t)).collect::<Result<Vec<f64>>>()?;
    let (i_best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let at_boundary = match i_best {
        0 => Some(Bound::Lower),
        i if i == SCAN_POINTS - 1 => Some(Bound::Upper),
        _ => None,
    };
    let mut tau_opt = taus[i_best];
    if at_boundary.is_none() {
        // a failed evaluation ranks last
        let (x, v) = golden_section_max(|t| total(t).unwrap_or(f64::NEG_INFINITY), taus[i_best - 1], taus[i_best + 1], 1e-4, 400);
        if v > values[i_best] {
            tau_opt = x;
        }
    }
    let seq = seq_qfi(&SequentialScheme::new(total_window, tau_opt, start)?, energy, response, force)?;
    Ok(TauOptimum { tau_opt, seq, at_boundary, scan: taus.into_iter().zip(values).collect() })
}

fn require_noise(m: &BathMoments) -> Result<()> {
    if m.script_n > 0.0 {
        Ok(())
    } else {
        Err(Error::NoiselessBath)
    }
}

/// Two-term asymptotic optimal interval as printed:
/// `E^{-1/2} / (2 sqrt(3 N)) + (C + xi K^2) / (16 sqrt(3) N^{3/2} xi) E^{-3/2}`.
pub fn tau_opt_asymptotic(energy: f64, m: &BathMoments, xi: f64, c_coeff: f64) -> Result<f64> {
    require_noise(m)?;
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")));
    }
    let se = script_e(energy)?;
    let n = m.script_n;
    let s3 = 3f64.sqrt();
    Ok(se.powf(-0.5) / (2.0 * (3.0 * n).sqrt()) + (c_coeff + xi * m.k_squared) / (16.0 * s3 * n.powf(1.5) * xi) * se.powf(-1.5))
}

/// Two-term asymptotic total QFI as printed,
/// `sqrt(3) xi / (2 sqrt(N)) E^{1/2} + sqrt(3) / (32 N^{3/2}) [2 K^2 xi + 7 C / 3] E^{-1/2}`,
/// multiplied by `prefactor` (`omega0^2` or `1`).
pub fn seq_qfi_asymptotic(energy: f64, m: &BathMoments, xi: f64, c_coeff: f64, prefactor: f64) -> Result<f64> {
    require_noise(m)?;
    let se = script_e(energy)?;
    let n = m.script_n;
    let s3 = 3f64.sqrt();
    let v = s3 * xi / (2.0 * n.sqrt()) * se.sqrt() + s3 / (32.0 * n.powf(1.5)) * (2.0 * m.k_squared * xi + 7.0 / 3.0 * c_coeff) / se.sqrt();
    Ok(prefactor * v)
}

/// Maximizer of the small-interval expansion
/// `(xi tau + C tau^3) / (1/(4 script_e) + (N - K^2/(4 script_e)) tau^2)`: the
/// smaller positive root in `u = tau^2` of `C b u^2 + (3 C a - xi b) u + xi a = 0`.
pub fn tau_opt_stationary(energy: f64, m: &BathMoments, xi: f64, c_coeff: f64) -> Result<f64> {
    require_noise(m)?;
    let se = script_e(energy)?;
    let a = 0.25 / se;
    let b = m.script_n - a * m.k_squared;
    if !(b > 0.0 && xi > 0.0) {
        return Err(Error::InvalidParameter("expansion has no interior maximum".into()));
    }
    let u = if c_coeff == 0.0 {
        a / b
    } else {
        let qa = c_coeff * b;
        let qb = 3.0 * c_coeff * a - xi * b;
        let qc = xi * a;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Err(Error::InvalidParameter("expansion has no interior maximum".into()));
        }
        // numerically stable smaller root
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let (r1, r2) = (q / qa, qc / q);
        [r1, r2].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
    };
    Ok(u.sqrt())
}

/// The small-interval expansion evaluated at `tau`, times `prefactor`.
pub fn seq_qfi_expansion(energy: f64, m: &BathMoments, xi: f64, c_coeff: f64, tau: f64, prefactor: f64) -> Result<f64> {
    let se = script_e(energy)?;
    let a = 0.25 / se;
    Ok(prefactor * (xi * tau + c_coeff * tau.powi(3)) / (a + (m.script_n - a * m.k_squared) * tau * tau))
}

/// `xi = int zeta^2` and
/// `C = 1/4 int (zeta'^2 + omega0^2 zeta^2) - 1/3 [zeta zeta']` over `[t0, t0 + T]`.
pub fn xi_and_c(force: &ForceModulation, omega0: f64, total_window: f64, t0: f64) -> (f64, f64) {
    let t1 = t0 + total_window;
    let Some((lo, hi)) = force.clip(t0, t1) else {
        return (0.0, 0.0);
    };
    let mut xi = 0.0;
    let mut quarter = 0.0;
    for seg in force.breakpoints(lo, hi).windows(2) {
        let n0 = (((seg[1] - seg[0]) * omega0 * 4.0).ceil() as usize).max(16);
        let f = |t: f64| {
            let z = force.zeta(t);
            let zd = force.zeta_dot(t);
            Complex64::new(z * z, zd * zd + omega0 * omega0 * z * z)
        };
        let q = simpson_adaptive(f, seg[0], seg[1], 1e-11, n0, 1 << 22).value;
        xi += q.re;
        quarter += 0.25 * q.im;
    }
    let edge = |t: f64| force.zeta(t) * force.zeta_dot(t);
    (xi, quarter - (edge(t1) - edge(t0)) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovSeq {
    pub tau_opt: f64,
    pub total_qfi_bound: f64,
    pub a_coeff: f64,
}

/// `A = gamma (N + 1/2)`, `tau_opt = E^{-1/2} / (8 A)`, bound `xi / (3 A)`.
pub fn markov_seq(energy: f64, gamma: f64, n_thermal: f64, xi: f64) -> Result<MarkovSeq> {
    if gamma == 0.0 {
        return Err(Error::NoiselessBath);
    }
    if !(gamma > 0.0 && n_thermal >= 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma > 0 and N >= 0, got {gamma}, {n_thermal}")));
    }
    let se = script_e(energy)?;
    let a = gamma * (n_thermal + 0.5);
    Ok(MarkovSeq { tau_opt: se.powf(-0.5) / (8.0 * a), total_qfi_bound: xi / (3.0 * a), a_coeff: a })
}

/// Whether `tau * max(Omega_p, |chi_q|, omega0) <= 0.1`, where the asymptotic
/// formulas may be compared with the numerical optimum.
pub fn within_short_time_regime(tau: f64, m: &BathMoments, omega0: f64) -> bool {
    tau * m.max_frequency().max(omega0) <= 0.1
}
