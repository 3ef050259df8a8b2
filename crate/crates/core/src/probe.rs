//! Force modulation, displacement coefficients and the Gaussian moments of
//! the probe after an interval of coupled evolution.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2, TAU};

use num_complex::Complex64;

use crate::bath::BathMode;
use crate::error::{Error, Result};
use crate::quadrature::simpson_adaptive;
use crate::response::ResponseFunction;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Time profile of the force.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceKind {
    Constant { value: f64 },
    /// `amplitude * sin(frequency * t + phase)`.
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    /// `exp(-(t - center)^2 / (2 width^2))`.
    GaussianPulse { center: f64, width: f64 },
    /// Piecewise-linear through `(t, zeta)` samples sorted by `t`, held
    /// constant beyond the first and last sample.
    Table { samples: Vec<(f64, f64)> },
}

/// `zeta(t)`, zero outside `[t_i, t_f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceModulation {
    kind: ForceKind,
    support: (f64, f64),
}

impl ForceModulation {
    pub fn new(kind: ForceKind, t_i: f64, t_f: f64) -> Result<Self> {
        if !(t_i.is_finite() && t_f.is_finite()) || t_i > t_f {
            return Err(Error::InvalidParameter(format!("force support needs t_i <= t_f, got [{t_i}, {t_f}]")));
        }
        match &kind {
            ForceKind::GaussianPulse { width, .. } if !(*width > 0.0) => {
                return Err(Error::InvalidParameter(format!("pulse width must be > 0, got {width}")));
            }
            ForceKind::Table { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidParameter("force table is empty".into()));
                }
                if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidParameter("force table times must increase strictly".into()));
                }
            }
            _ => {}
        }
        Ok(Self { kind, support: (t_i, t_f) })
    }

    pub fn constant(value: f64, t_i: f64, t_f: f64) -> Result<Self> {
        Self::new(ForceKind::Constant { value }, t_i, t_f)
    }

    /// The zero force.
    pub fn zero() -> Self {
        Self { kind: ForceKind::Constant { value: 0.0 }, support: (0.0, 0.0) }
    }

    pub fn kind(&self) -> &ForceKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    fn inside(&self, t: f64) -> bool {
        t >= self.support.0 && t <= self.support.1
    }

    pub fn zeta(&self, t: f64) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        match &self.kind {
            ForceKind::Constant { value } => *value,
            ForceKind::Sinusoid { amplitude, frequency, phase } => amplitude * (frequency * t + phase).sin(),
            ForceKind::GaussianPulse { center, width } => (-(t - center).powi(2) / (2.0 * width * width)).exp(),
            ForceKind::Table { samples } => {
                let (i, s) = table_segment(samples, t);
                match i {
                    None => samples[if t < samples[0].0 { 0 } else { samples.len() - 1 }].1,
                    Some(i) => samples[i].1 + s * (samples[i + 1].1 - samples[i].1),
                }
            }
        }
    }

    /// `d zeta / dt` on the support (secants for tables).
    pub fn zeta_dot(&self, t: f64) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        match &self.kind {
            ForceKind::Constant { .. } => 0.0,
            ForceKind::Sinusoid { amplitude, frequency, phase } => amplitude * frequency * (frequency * t + phase).cos(),
            ForceKind::GaussianPulse { center, width } => {
                -(t - center) / (width * width) * (-(t - center).powi(2) / (2.0 * width * width)).exp()
            }
            ForceKind::Table { samples } => match table_segment(samples, t).0 {
                None => 0.0,
                Some(i) => (samples[i + 1].1 - samples[i].1) / (samples[i + 1].0 - samples[i].0),
            },
        }
    }

    /// Intersection of `[a, b]` with the support, if non-empty.
    pub fn clip(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let lo = a.max(self.support.0);
        let hi = b.min(self.support.1);
        (hi > lo).then_some((lo, hi))
    }

    /// `a`, `b` and the table breakpoints in between, where integrands have kinks.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        if let ForceKind::Table { samples } = &self.kind {
            pts.extend(samples.iter().map(|s| s.0).filter(|&t| t > a && t < b));
        }
        pts.push(b);
        pts
    }
}

fn table_segment(samples: &[(f64, f64)], t: f64) -> (Option<usize>, f64) {
    if samples.len() < 2 || t < samples[0].0 || t > samples[samples.len() - 1].0 {
        return (None, 0.0);
    }
    let i = samples.partition_point(|s| s.0 <= t).saturating_sub(1).min(samples.len() - 2);
    let (t0, t1) = (samples[i].0, samples[i + 1].0);
    (Some(i), (t - t0) / (t1 - t0))
}

/// Measurement window `[start, end]`: preparation at `start`, measurement at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidParameter(format!("window needs end >= start, got [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Initial Gaussian state of the probe: mean amplitude and the covariance of
/// `(X, P)` with vacuum `diag(1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProbeInit {
    pub mean_amplitude: Complex64,
    pub covariance: [[f64; 2]; 2],
}

impl GaussianProbeInit {
    pub fn new(mean_amplitude: Complex64, covariance: [[f64; 2]; 2]) -> Result<Self> {
        let [[xx, xp], [px, pp]] = covariance;
        if (xp - px).abs() > 1e-12 * (xx.abs() + pp.abs()) {
            return Err(Error::InvalidParameter("covariance must be symmetric".into()));
        }
        if !(xx > 0.0 && pp > 0.0) {
            return Err(Error::InvalidParameter("covariance must be positive definite".into()));
        }
        let det = xx * pp - xp * xp;
        if det < 0.25 * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("covariance determinant {det} violates the uncertainty bound 1/4")));
        }
        Ok(Self { mean_amplitude, covariance })
    }

    pub fn vacuum() -> Self {
        Self { mean_amplitude: ZERO, covariance: [[0.5, 0.0], [0.0, 0.5]] }
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self { mean_amplitude: alpha, ..Self::vacuum() }
    }

    pub fn thermal(n: f64) -> Result<Self> {
        let v = n + 0.5;
        Self::new(ZERO, [[v, 0.0], [0.0, v]])
    }

    /// Squeezed vacuum whose minimum-variance quadrature `X(min_angle)` has
    /// variance `e^{-2r}/2`.
    pub fn squeezed(r: f64, min_angle: f64) -> Self {
        let (lo, hi) = (0.5 * (-2.0 * r).exp(), 0.5 * (2.0 * r).exp());
        let (s, c) = min_angle.sin_cos();
        let xx = lo * c * c + hi * s * s;
        let pp = lo * s * s + hi * c * c;
        let xp = (lo - hi) * s * c;
        Self { mean_amplitude: ZERO, covariance: [[xx, xp], [xp, pp]] }
    }

    /// Variance of `X(alpha) = X cos(alpha) + P sin(alpha)`.
    pub fn variance_at(&self, alpha: f64) -> f64 {
        let [[xx, xp], [_, pp]] = self.covariance;
        let (s, c) = alpha.sin_cos();
        c * c * xx + s * s * pp + 2.0 * s * c * xp
    }

    /// `<X(alpha)> = sqrt(2) Re(<a> e^{-i alpha})`.
    pub fn mean_at(&self, alpha: f64) -> f64 {
        SQRT_2 * (self.mean_amplitude * Complex64::from_polar(1.0, -alpha)).re
    }

    pub fn det(&self) -> f64 {
        let [[xx, xp], [_, pp]] = self.covariance;
        xx * pp - xp * xp
    }

    /// `<da da^+ + da^+ da>`, the covariance trace.
    pub fn trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1]
    }

    /// Mean energy in units of the probe quantum, vacuum `1/2`.
    pub fn energy(&self) -> f64 {
        self.mean_amplitude.norm_sqr() + 0.5 * self.trace()
    }

    pub fn is_isotropic(&self) -> bool {
        let [[xx, xp], [_, pp]] = self.covariance;
        (xx - pp).abs() <= 1e-12 * (xx + pp) && xp.abs() <= 1e-12 * (xx + pp)
    }

    /// Angle in `[0, pi)` of the maximum-variance quadrature.
    pub fn max_variance_angle(&self) -> f64 {
        let [[xx, xp], [_, pp]] = self.covariance;
        (0.5 * (2.0 * xp).atan2(xx - pp)).rem_euclid(PI)
    }
}

/// Principal argument in `[0, 2 pi)`, zero for a vanishing value.
pub fn principal_phase(z: Complex64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        let p = z.arg().rem_euclid(TAU);
        if p >= TAU {
            0.0
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementCoefficient {
    pub value: Complex64,
    pub phase: f64,
    pub window: Window,
}

impl DisplacementCoefficient {
    pub fn new(value: Complex64, window: Window) -> Self {
        Self { value, phase: principal_phase(value), window }
    }

    pub fn abs(&self) -> f64 {
        self.value.norm()
    }
}

const D_TOL: f64 = 1e-9;

fn initial_intervals(length: f64, rate: f64) -> usize {
    ((length * rate * 4.0).ceil() as usize).clamp(16, 1 << 16)
}

fn oscillation_rate(resp: &ResponseFunction) -> f64 {
    let b = resp.bath();
    b.probe_frequency().max(b.k_squared().sqrt()).max(b.max_abs_detuning())
}

/// `D(t, t0) = omega0 int zeta(u) e^{i omega0 (u - t0)} G(t - u) du` over the
/// window restricted to the force support.
pub fn displacement_d(response: &ResponseFunction, force: &ForceModulation, window: Window) -> Result<DisplacementCoefficient> {
    let w0 = response.bath().probe_frequency();
    let Some((lo, hi)) = force.clip(window.start, window.end) else {
        response.check_coverage(window.length())?;
        return Ok(DisplacementCoefficient::new(ZERO, window));
    };
    response.check_coverage(window.end - lo)?;
    let t = window.end;
    let rate = oscillation_rate(response);
    let mut value = ZERO;
    for seg in force.breakpoints(lo, hi).windows(2) {
        let f = |u: f64| {
            let g = response.g_at(t - u).expect("coverage checked");
            g * Complex64::from_polar(force.zeta(u), w0 * (u - window.start))
        };
        value += simpson_adaptive(f, seg[0], seg[1], D_TOL, initial_intervals(seg[1] - seg[0], rate), 1 << 22).value;
    }
    Ok(DisplacementCoefficient::new(value * w0, window))
}

/// The noiseless coefficient `D0 = omega0 int zeta(u) e^{i omega0 (u - t0)} du`.
pub fn noiseless_d(force: &ForceModulation, omega0: f64, window: Window) -> DisplacementCoefficient {
    let Some((lo, hi)) = force.clip(window.start, window.end) else {
        return DisplacementCoefficient::new(ZERO, window);
    };
    let mut value = ZERO;
    for seg in force.breakpoints(lo, hi).windows(2) {
        let f = |u: f64| Complex64::from_polar(force.zeta(u), omega0 * (u - window.start));
        value += simpson_adaptive(f, seg[0], seg[1], D_TOL, initial_intervals(seg[1] - seg[0], omega0), 1 << 22).value;
    }
    DisplacementCoefficient::new(value * omega0, window)
}

/// Bath-mode displacement
/// `D_n = omega0 |K_n| int du zeta(u) e^{i omega0 (u - t0)} int_u^t ds e^{i (omega_n - omega0)(s - t0)} G(s - u)`.
pub fn bath_displacement_dn(
    response: &ResponseFunction,
    force: &ForceModulation,
    mode: &BathMode,
    window: Window,
) -> Result<Complex64> {
    let w0 = response.bath().probe_frequency();
    let k = mode.coupling_magnitude_sq.sqrt();
    let Some((lo, hi)) = force.clip(window.start, window.end) else {
        return Ok(ZERO);
    };
    if k == 0.0 {
        return Ok(ZERO);
    }
    response.check_coverage(window.end - lo)?;
    let t = window.end;
    let t0 = window.start;
    let nu = mode.frequency - w0;
    let rate = oscillation_rate(response).max(nu.abs());
    let inner = |u: f64| -> Complex64 {
        let f = |s: f64| Complex64::from_polar(1.0, nu * (s - t0)) * response.g_at(s - u).expect("coverage checked");
        simpson_adaptive(f, u, t, 1e-7, initial_intervals(t - u, rate), 1 << 18).value
    };
    let mut value = ZERO;
    for seg in force.breakpoints(lo, hi).windows(2) {
        let outer = |u: f64| Complex64::from_polar(force.zeta(u), w0 * (u - t0)) * inner(u);
        value += simpson_adaptive(outer, seg[0], seg[1], 1e-7, initial_intervals(seg[1] - seg[0], rate), 1 << 14).value;
    }
    Ok(value * (w0 * k))
}

/// `int_0^tau G(tau - s) e^{i Delta_n s} ds` for every mode, on a shared
/// Simpson grid refined until all modes agree to `1e-10 * tau`.
pub fn mode_overlaps(response: &ResponseFunction, tau: f64) -> Result<Vec<Complex64>> {
    let bath = response.bath();
    response.check_coverage(tau)?;
    let modes = bath.modes();
    if modes.is_empty() || tau <= 0.0 {
        return Ok(vec![ZERO; modes.len()]);
    }
    let w0 = bath.probe_frequency();
    let dets: Vec<f64> = modes.iter().map(|m| m.detuning(w0)).collect();
    let eval = |n: usize| -> Vec<Complex64> {
        let h = tau / n as f64;
        let gs: Vec<Complex64> = (0..=n).map(|i| response.g_at(tau - i as f64 * h).expect("coverage checked")).collect();
        dets.iter()
            .map(|&d| {
                let rot = Complex64::from_polar(1.0, d * h);
                let mut z = Complex64::new(1.0, 0.0);
                let mut acc = ZERO;
                for (i, g) in gs.iter().enumerate() {
                    if i % 64 == 0 {
                        z = Complex64::from_polar(1.0, d * h * i as f64);
                    }
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += g * z * w;
                    z *= rot;
                }
                acc * (h / 3.0)
            })
            .collect()
    };
    let rate = oscillation_rate(response);
    let mut n = initial_intervals(tau, rate).max(64);
    n += n % 2;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let cur = eval(n);
        let change = prev.iter().zip(&cur).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change <= 1e-10 * tau || n >= 1 << 20 {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Bath noise `n_B = sum |K_n|^2 (N_n + 1/2) |int_0^tau G(tau - s) e^{i Delta_n s} ds|^2`.
pub fn noise_term(response: &ResponseFunction, window: Window) -> Result<f64> {
    let overlaps = mode_overlaps(response, window.length())?;
    Ok(response
        .bath()
        .modes()
        .iter()
        .zip(overlaps)
        .map(|(m, o)| m.coupling_magnitude_sq * (m.occupation + 0.5) * o.norm_sqr())
        .sum())
}

/// `G`, `n_B` and the free rotation for one window.
#[derive(Debug, Clone, Copy)]
pub struct Evolution {
    pub g: Complex64,
    pub noise: f64,
    pub tau: f64,
    pub omega0: f64,
}

impl Evolution {
    pub fn compute(response: &ResponseFunction, window: Window) -> Result<Self> {
        let tau = window.length();
        Ok(Self {
            g: response.g_at(tau)?,
            noise: noise_term(response, window)?,
            tau,
            omega0: response.bath().probe_frequency(),
        })
    }

    pub fn phase_g(&self) -> f64 {
        principal_phase(self.g)
    }

    /// `omega0 (t - t0)`.
    pub fn rotation(&self) -> f64 {
        self.omega0 * self.tau
    }

    /// Evolved variance of `X(theta)`.
    pub fn variance(&self, init: &GaussianProbeInit, theta: f64) -> f64 {
        self.g.norm_sqr() * init.variance_at(theta + self.rotation() - self.phase_g()) + self.noise
    }

    /// `|G|^4 det0 + |G|^2 tr0 n_B + n_B^2`.
    pub fn det_sigma(&self, init: &GaussianProbeInit) -> f64 {
        let g2 = self.g.norm_sqr();
        g2 * g2 * init.det() + g2 * init.trace() * self.noise + self.noise * self.noise
    }
}

/// `<X(theta)> = |G| <X[theta + omega0 tau - phi_G]>_0 + F |D| sin[theta + omega0 tau - phi_D]`.
pub fn quadrature_mean(
    init: &GaussianProbeInit,
    response: &ResponseFunction,
    d: &DisplacementCoefficient,
    theta: f64,
    force_value: f64,
    window: Window,
) -> Result<f64> {
    let g = response.g_at(window.length())?;
    let rot = response.bath().probe_frequency() * window.length();
    Ok(g.norm() * init.mean_at(theta + rot - principal_phase(g)) + force_value * d.abs() * (theta + rot - d.phase).sin())
}

pub fn quadrature_variance(init: &GaussianProbeInit, response: &ResponseFunction, theta: f64, window: Window) -> Result<f64> {
    Ok(Evolution::compute(response, window)?.variance(init, theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSnapshot {
    pub var_x_theta: f64,
    pub var_p_theta: f64,
    pub cross: f64,
    pub det_sigma: f64,
    pub noise_term: f64,
    pub g_abs_sq: f64,
    pub theta: f64,
}

/// Evolved 2x2 covariance in the frame rotated by `theta`; the determinant is
/// computed both from the closed form and from the reconstructed matrix.
pub fn covariance_snapshot(init: &GaussianProbeInit, response: &ResponseFunction, theta: f64, window: Window) -> Result<CovarianceSnapshot> {
    snapshot_from(&Evolution::compute(response, window)?, init, theta)
}

pub fn snapshot_from(ev: &Evolution, init: &GaussianProbeInit, theta: f64) -> Result<CovarianceSnapshot> {
    let var_x = ev.variance(init, theta);
    let var_p = ev.variance(init, theta + FRAC_PI_2);
    let cross = ev.variance(init, theta + FRAC_PI_4) - 0.5 * (var_x + var_p);
    let det_matrix = var_x * var_p - cross * cross;
    let det_sigma = ev.det_sigma(init);
    if (det_matrix - det_sigma).abs() > 1e-8 * det_sigma.abs().max(0.25) {
        return Err(Error::InternalConsistency(format!(
            "covariance determinant {det_matrix} disagrees with closed form {det_sigma}"
        )));
    }
    Ok(CovarianceSnapshot {
        var_x_theta: var_x,
        var_p_theta: var_p,
        cross,
        det_sigma,
        noise_term: ev.noise,
        g_abs_sq: ev.g.norm_sqr(),
        theta,
    })
}

/// `theta_m^t = theta_m^0 + phi_G - omega0 (t - t0)` reduced to `[0, pi)`.
pub fn rotate_max_variance_angle(theta_m_0: f64, response: &ResponseFunction, window: Window) -> Result<f64> {
    let g = response.g_at(window.length())?;
    let rot = response.bath().probe_frequency() * window.length();
    Ok((theta_m_0 + principal_phase(g) - rot).rem_euclid(PI))
}
