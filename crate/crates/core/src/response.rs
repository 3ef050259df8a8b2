//! The bath response function `G(tau)`: a Volterra integro-differential
//! solver, its Dyson series, and the analytic short-time, narrow-band and
//! Markovian forms.

use num_complex::Complex64;

use crate::bath::{memory_kernel, moments, ContinuousSpectrum, DiscreteBath};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, simpson_adaptive, ChebSeries};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform time grid with spacing `(t_end - t_start) / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::InvalidParameter(format!("grid needs t_end > t_start, got [{t_start}, {t_end}]")));
        }
        if n_steps < 2 {
            return Err(Error::InvalidParameter(format!("grid needs n_steps >= 2, got {n_steps}")));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    /// Grid starting at zero with the default resolution for `bath`:
    /// `h * max(Omega_2, omega0, max|detuning|) <= 0.02`, at least 1024 steps.
    pub fn for_bath(bath: &DiscreteBath, t_end: f64) -> Result<Self> {
        let rate = bath.k_squared().sqrt().max(bath.probe_frequency()).max(bath.max_abs_detuning());
        let n = ((t_end * rate / 0.02).ceil() as usize).max(1024);
        Self::new(0.0, t_end, n)
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.step()
    }
}

/// Time-marching scheme for [`solve_response`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Implicit product trapezoid, second order.
    Trapezoid,
    /// Product trapezoid on `h` and `h/2` combined by one Richardson step.
    #[default]
    TrapezoidRichardson,
}

/// Sampled `G`, `G'` and `G''` on a uniform grid starting at zero.
#[derive(Debug, Clone)]
pub struct ResponseFunction {
    grid: TimeGrid,
    g: Vec<Complex64>,
    g_dot: Vec<Complex64>,
    g_ddot: Vec<Complex64>,
    bath: DiscreteBath,
}

impl ResponseFunction {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn bath(&self) -> &DiscreteBath {
        &self.bath
    }

    pub fn g_samples(&self) -> &[Complex64] {
        &self.g
    }

    pub fn g_dot_samples(&self) -> &[Complex64] {
        &self.g_dot
    }

    pub fn g_ddot_samples(&self) -> &[Complex64] {
        &self.g_ddot
    }

    pub fn t_end(&self) -> f64 {
        self.grid.t_end
    }

    pub fn covers(&self, tau: f64) -> bool {
        tau <= self.grid.t_end * (1.0 + 1e-12)
    }

    pub fn check_coverage(&self, tau: f64) -> Result<()> {
        if self.covers(tau) {
            Ok(())
        } else {
            Err(Error::Coverage { needed: tau, available: self.grid.t_end })
        }
    }

    fn locate(&self, tau: f64) -> Result<(usize, f64)> {
        if tau < -1e-12 * self.grid.t_end {
            return Err(Error::InvalidParameter(format!("response queried at negative time {tau}")));
        }
        self.check_coverage(tau)?;
        let h = self.grid.step();
        let x = (tau.max(0.0) / h).min(self.grid.n_steps as f64);
        let j = (x.floor() as usize).min(self.grid.n_steps - 1);
        Ok((j, x - j as f64))
    }

    /// `G(tau)` by cubic Hermite interpolation on the stored `G` and `G'`.
    pub fn g_at(&self, tau: f64) -> Result<Complex64> {
        let (j, s) = self.locate(tau)?;
        Ok(hermite(self.g[j], self.g_dot[j], self.g[j + 1], self.g_dot[j + 1], self.grid.step(), s))
    }

    /// `G'(tau)` by cubic Hermite interpolation on the stored `G'` and `G''`.
    pub fn g_dot_at(&self, tau: f64) -> Result<Complex64> {
        let (j, s) = self.locate(tau)?;
        Ok(hermite(self.g_dot[j], self.g_ddot[j], self.g_dot[j + 1], self.g_ddot[j + 1], self.grid.step(), s))
    }
}

fn hermite(y0: Complex64, m0: Complex64, y1: Complex64, m1: Complex64, h: f64, s: f64) -> Complex64 {
    if s == 0.0 {
        return y0;
    }
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (h * (s3 - 2.0 * s2 + s)) + y1 * (3.0 * s2 - 2.0 * s3) + m1 * (h * (s3 - s2))
}

struct RawSolution {
    g: Vec<Complex64>,
    g_dot: Vec<Complex64>,
    g_ddot: Vec<Complex64>,
}

/// Product-trapezoid march of `G' = -int_0^tau kappa(tau - s) G(s) ds`.
fn march(bath: &DiscreteBath, h: f64, n: usize) -> RawSolution {
    let w0 = bath.probe_frequency();
    let mut kappa = vec![ZERO; n + 1];
    let mut kappa_dot = vec![ZERO; n + 1];
    for m in bath.modes() {
        let d = m.detuning(w0);
        let rot = Complex64::from_polar(1.0, d * h);
        let mut z = Complex64::new(m.coupling_magnitude_sq, 0.0);
        for j in 0..=n {
            // re-anchor the rotation every 64 steps to keep the phase exact
            if j % 64 == 0 {
                z = Complex64::from_polar(m.coupling_magnitude_sq, d * h * j as f64);
            }
            kappa[j] += z;
            kappa_dot[j] += z * I * d;
            z *= rot;
        }
    }
    let k0 = kappa[0];
    let mut g = vec![ZERO; n + 1];
    let mut g_dot = vec![ZERO; n + 1];
    let mut g_ddot = vec![ZERO; n + 1];
    g[0] = ONE;
    g_ddot[0] = -k0;
    let denom = ONE + k0 * (h * h / 4.0);
    for j in 1..=n {
        let mut acc = kappa[j] * 0.5;
        let mut acc_dot = kappa_dot[j] * 0.5;
        for m in 1..j {
            acc += kappa[j - m] * g[m];
            acc_dot += kappa_dot[j - m] * g[m];
        }
        let s = -acc * h;
        let gj = (g[j - 1] + (g_dot[j - 1] + s) * (h / 2.0)) / denom;
        g[j] = gj;
        g_dot[j] = s - k0 * gj * (h / 2.0);
        g_ddot[j] = -k0 * gj - (acc_dot + kappa_dot[0] * gj * 0.5) * h;
    }
    RawSolution { g, g_dot, g_ddot }
}

/// Solve for `G` on `grid` with the default (fourth-order) scheme.
pub fn solve_response(bath: &DiscreteBath, grid: TimeGrid) -> Result<ResponseFunction> {
    solve_response_with(bath, grid, Scheme::default())
}

pub fn solve_response_with(bath: &DiscreteBath, grid: TimeGrid, scheme: Scheme) -> Result<ResponseFunction> {
    if grid.t_start != 0.0 {
        return Err(Error::InvalidParameter(format!("response grid must start at 0, got {}", grid.t_start)));
    }
    let n = grid.n_steps;
    let h = grid.step();
    let raw = match scheme {
        Scheme::Trapezoid => march(bath, h, n),
        Scheme::TrapezoidRichardson => {
            let coarse = march(bath, h, n);
            let fine = march(bath, h / 2.0, 2 * n);
            let rich = |c: &[Complex64], f: &[Complex64]| -> Vec<Complex64> {
                (0..=n).map(|j| (f[2 * j] * 4.0 - c[j]) / 3.0).collect()
            };
            RawSolution {
                g: rich(&coarse.g, &fine.g),
                g_dot: rich(&coarse.g_dot, &fine.g_dot),
                g_ddot: rich(&coarse.g_ddot, &fine.g_ddot),
            }
        }
    };
    let RawSolution { mut g, mut g_dot, g_ddot } = raw;
    g[0] = ONE;
    g_dot[0] = ZERO;
    for (j, v) in g.iter().enumerate() {
        if v.norm() > 1.0 + 1e-6 || !v.norm().is_finite() {
            return Err(Error::SolverInstability { tau: grid.point(j), abs_g: v.norm() });
        }
    }
    Ok(ResponseFunction { grid, g, g_dot, g_ddot, bath: bath.clone() })
}

/// Largest residual `|G'_j + int_0^{tau_j} kappa(tau_j - s) G(s) ds|` over the
/// grid, with the integral taken by the composite Simpson rule on the stored
/// samples (trapezoid on the last panel when `j` is odd).
pub fn residual_max(resp: &ResponseFunction) -> f64 {
    let bath = resp.bath();
    let h = resp.grid.step();
    let n = resp.grid.n_steps;
    let kappa: Vec<Complex64> = (0..=n).map(|j| memory_kernel(bath, j as f64 * h)).collect();
    let g = &resp.g;
    let mut worst: f64 = 0.0;
    for j in 1..=n {
        let f = |m: usize| kappa[j - m] * g[m];
        let even = j - j % 2;
        let mut integral = ZERO;
        if even >= 2 {
            let mut acc = f(0) + f(even);
            for m in 1..even {
                acc += f(m) * if m % 2 == 1 { 4.0 } else { 2.0 };
            }
            integral += acc * (h / 3.0);
        }
        if j % 2 == 1 {
            integral += (f(j - 1) + f(j)) * (h / 2.0);
        }
        worst = worst.max((resp.g_dot[j] + integral).norm());
    }
    worst
}

/// `(1 - e^{i d tau}) / d^2 + i tau / d`, continued analytically through `d = 0`.
fn dyson1_bracket(d: f64, tau: f64) -> Complex64 {
    let x = d * tau;
    if x.abs() < 1e-2 {
        // sum_{j>=0} (i x)^j tau^2 / (j + 2)!
        let mut term = Complex64::new(tau * tau / 2.0, 0.0);
        let mut acc = term;
        for j in 1..8 {
            term = term * I * x / (j as f64 + 2.0);
            acc += term;
        }
        acc
    } else {
        (ONE - Complex64::from_polar(1.0, x)) / (d * d) + I * tau / d
    }
}

/// First-order Dyson term `-sum |K_n|^2 [(1 - e^{i Delta tau}) / Delta^2 + i tau / Delta]`.
pub fn long_time_g1(bath: &DiscreteBath, tau: f64) -> Complex64 {
    let w0 = bath.probe_frequency();
    let omega2 = bath.k_squared().sqrt();
    bath.modes()
        .iter()
        .map(|m| {
            let d = m.detuning(w0);
            if d.abs() < 1e-6 * omega2 {
                Complex64::new(-m.coupling_magnitude_sq * tau * tau / 2.0, 0.0)
            } else {
                -dyson1_bracket(d, tau) * m.coupling_magnitude_sq
            }
        })
        .sum()
}

/// First-order Dyson term of a continuum together with the long-time
/// asymptote of its real part.
#[derive(Debug, Clone, Copy)]
pub struct ContinuumG1 {
    pub value: Complex64,
    /// `-(pi/2) tau [rho(omega0-) + rho(omega0+)]`.
    pub asymptote_re: f64,
}

pub fn long_time_g1_continuum(spectrum: &ContinuousSpectrum, omega0: f64, tau: f64) -> ContinuumG1 {
    let end = spectrum.support_end();
    let integrand = |w: f64| -dyson1_bracket(omega0 - w, tau) * spectrum.density(w);
    let mut value = ZERO;
    let mut pieces = vec![0.0];
    if omega0 > 0.0 && omega0 < end {
        pieces.push(omega0);
    }
    pieces.push(end);
    for win in pieces.windows(2) {
        let n0 = (((win[1] - win[0]) * tau).ceil() as usize).max(64);
        value += simpson_adaptive(integrand, win[0], win[1], 1e-10, n0, 1 << 22).value;
    }
    ContinuumG1 { value, asymptote_re: g1_real_asymptote(spectrum, omega0, tau) }
}

pub fn g1_real_asymptote(spectrum: &ContinuousSpectrum, omega0: f64, tau: f64) -> f64 {
    let (lo, hi) = spectrum.density_limits(omega0);
    -std::f64::consts::FRAC_PI_2 * tau * (lo + hi)
}

/// `1 - K^2 tau^2 / 2 + i (tau^3 / 6) sum |K_n|^2 (omega_n - omega0)`.
pub fn short_time_g(bath: &DiscreteBath, tau: f64) -> Complex64 {
    let w0 = bath.probe_frequency();
    let first: f64 = bath.modes().iter().map(|m| m.coupling_magnitude_sq * (m.frequency - w0)).sum();
    Complex64::new(1.0 - bath.k_squared() * tau * tau / 2.0, tau.powi(3) / 6.0 * first)
}

/// `e^{-gamma tau / 2}`.
pub fn markov_closed_form(gamma: f64, tau: f64) -> Complex64 {
    Complex64::new((-gamma * tau / 2.0).exp(), 0.0)
}

/// `pi g |K|^2`.
pub fn markov_gamma(density_of_states: f64, k_sq: f64) -> f64 {
    std::f64::consts::PI * density_of_states * k_sq
}

/// Dyson series of `G` truncated after order `order_k`.
pub fn dyson_series(bath: &DiscreteBath, tau: f64, order_k: usize) -> Result<Complex64> {
    Ok(dyson_terms(bath, tau, order_k)?.into_iter().sum())
}

/// The individual Dyson terms of orders `0..=order_k` at `tau`.
pub fn dyson_terms(bath: &DiscreteBath, tau: f64, order_k: usize) -> Result<Vec<Complex64>> {
    let coupled: Vec<_> = bath.modes().iter().filter(|m| m.coupling_magnitude_sq > 0.0).collect();
    let mut out = vec![ONE];
    if order_k == 0 {
        return Ok(out);
    }
    if coupled.is_empty() {
        out.resize(order_k + 1, ZERO);
        return Ok(out);
    }
    if coupled.len() == 1 {
        let m = coupled[0];
        let d = m.detuning(bath.probe_frequency());
        let d = if d.abs() < 1e-6 * m.coupling_magnitude_sq.sqrt() { 0.0 } else { d };
        for k in 1..=order_k {
            let pref = (-m.coupling_magnitude_sq).powi(k as i32);
            out.push(single_mode_inverse(k + 1, k, Complex64::new(0.0, d), tau) * pref);
        }
        return Ok(out);
    }
    if order_k > 4 {
        return Err(Error::Unsupported(format!(
            "Dyson order {order_k} on a {}-mode bath (at most 4)",
            coupled.len()
        )));
    }
    out.push(long_time_g1(bath, tau));
    if order_k == 1 {
        return Ok(out);
    }
    let mut n = 16;
    let mut prev = nested_terms(bath, tau, order_k, n);
    loop {
        n *= 2;
        let cur = nested_terms(bath, tau, order_k, n);
        let change = prev.iter().zip(&cur).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if change <= 1e-8 || n >= 512 {
            out.extend(cur);
            return Ok(out);
        }
        prev = cur;
    }
}

/// Inverse Laplace transform of `1 / (z^m (z - a)^k)` at `tau`.
fn single_mode_inverse(m: usize, k: usize, a: Complex64, tau: f64) -> Complex64 {
    let x = a.norm() * tau;
    if x <= 4.0 {
        // sum_j a^j tau^{m+k-1+j} C(k+j-1, j) / (m+k+j-1)!
        let base = m + k - 1;
        let mut term = Complex64::new(tau.powi(base as i32) / factorial(base), 0.0);
        let mut acc = term;
        let mut j = 0usize;
        loop {
            j += 1;
            term = term * a * tau * ((k + j - 1) as f64 / j as f64) / (base + j) as f64;
            acc += term;
            if term.norm() <= 1e-18 * acc.norm() && j > 4 || j > 400 {
                return acc;
            }
        }
    }
    // partial fractions around z = 0 and z = a
    let mut acc = ZERO;
    let neg_a_pow_k = (-a).powi(k as i32);
    for i in 1..=m {
        let r = m - i;
        let coef = Complex64::new(binom(k + r - 1, r), 0.0) / (neg_a_pow_k * a.powi(r as i32));
        acc += coef * tau.powi(i as i32 - 1) / factorial(i - 1);
    }
    let e = (a * tau).exp();
    for l in 1..=k {
        let r = k - l;
        let coef = Complex64::new(binom(m + r - 1, r), 0.0) * (-ONE / a).powi(r as i32) / a.powi(m as i32);
        acc += coef * e * tau.powi(l as i32 - 1) / factorial(l - 1);
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64)
}

/// `int_0^u kappa(v) dv`.
fn kernel_integral(bath: &DiscreteBath, u: f64) -> Complex64 {
    let w0 = bath.probe_frequency();
    bath.modes()
        .iter()
        .map(|m| {
            let d = m.detuning(w0);
            let x = d * u;
            let v = if x.abs() < 1e-3 {
                // (e^{ix} - 1) / (i d) = u sum (ix)^j / (j+1)!
                let mut term = Complex64::new(u, 0.0);
                let mut acc = term;
                for j in 1..6 {
                    term = term * I * x / (j as f64 + 1.0);
                    acc += term;
                }
                acc
            } else {
                (Complex64::from_polar(1.0, x) - ONE) / (I * d)
            };
            v * m.coupling_magnitude_sq
        })
        .sum()
}

/// Dyson terms of orders `2..=order_k` at `tau`, each order obtained from the
/// previous one as `f_k(x) = -int_0^x Kint(x - s) f_{k-1}(s) ds`, where
/// `Kint` is the integrated kernel. Orders above two go through a Chebyshev
/// interpolant of the previous order on `[0, tau]`.
fn nested_terms(bath: &DiscreteBath, tau: f64, order_k: usize, n: usize) -> Vec<Complex64> {
    let nodes = ChebSeries::nodes(n, 0.0, tau);
    let mut points = nodes.clone();
    points.push(tau);
    let rule = gauss_legendre(n, 0.0, 1.0);
    let apply = |prev: &dyn Fn(f64) -> Complex64| -> Vec<Complex64> {
        points
            .iter()
            .map(|&x| {
                rule.iter()
                    .map(|&(u, w)| -kernel_integral(bath, x * (1.0 - u)) * prev(x * u) * (w * x))
                    .sum()
            })
            .collect()
    };
    let mut out = Vec::with_capacity(order_k - 1);
    let mut vals = apply(&|s| long_time_g1(bath, s));
    out.push(vals[n]);
    for _ in 3..=order_k {
        let series = ChebSeries::from_values(&vals[..n], 0.0, tau);
        vals = apply(&|s| series.eval(s));
        out.push(vals[n]);
    }
    out
}

/// Largest `|G|` over the stored samples.
pub fn max_abs_g(resp: &ResponseFunction) -> f64 {
    resp.g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Default grid and solution for `bath` covering `[0, t_end]`.
pub fn solve_default(bath: &DiscreteBath, t_end: f64) -> Result<ResponseFunction> {
    solve_response(bath, TimeGrid::for_bath(bath, t_end)?)
}

/// Default sequential bounds helper: `5 / Omega_2` (infinite for an empty bath).
pub fn inverse_omega2(bath: &DiscreteBath) -> f64 {
    let m = moments(bath, 2).expect("p_max = 2 is valid");
    let w = m.omega(2).unwrap_or(0.0);
    if w > 0.0 {
        1.0 / w
    } else {
        f64::INFINITY
    }
}
