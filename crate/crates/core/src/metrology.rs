//! Quantum Fisher information of the force, the optimal probe state and
//! quadrature, the Markovian and short-time forms, and a Monte-Carlo check of
//! the Cramér-Rao bound.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probe::{
    displacement_d, noiseless_d, principal_phase, DisplacementCoefficient, Evolution, ForceModulation, GaussianProbeInit,
    Window,
};
use crate::quadrature::{golden_section_max, simpson_adaptive};
use crate::response::ResponseFunction;

/// `E + sqrt(E^2 - 1/4)`, rejecting energies below the vacuum.
pub fn script_e(energy: f64) -> Result<f64> {
    if !(energy >= 0.5) {
        return Err(Error::EnergyBelowVacuum(energy));
    }
    Ok(energy + (energy * energy - 0.25).max(0.0).sqrt())
}

/// Squeezed vacuum maximizing the QFI at fixed mean energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestStateSpec {
    pub energy: f64,
    pub script_e: f64,
    pub squeeze_r: f64,
    /// `arg mu = 2 (phi_D - phi_G)`.
    pub squeeze_phase: f64,
}

impl BestStateSpec {
    pub fn min_variance(&self) -> f64 {
        0.25 / self.script_e
    }

    pub fn max_variance(&self) -> f64 {
        self.script_e
    }

    /// Initial state with its largest variance along `X(phi_D - phi_G)` and
    /// its smallest, `1/(4 script_e)`, along `P(phi_D - phi_G)`.
    pub fn to_init(&self) -> GaussianProbeInit {
        GaussianProbeInit::squeezed(self.squeeze_r, 0.5 * self.squeeze_phase + FRAC_PI_2)
    }
}

pub fn best_state(energy: f64, d: &DisplacementCoefficient, response: &ResponseFunction) -> Result<BestStateSpec> {
    let se = script_e(energy)?;
    let phase_g = principal_phase(response.g_at(d.window.length())?);
    Ok(BestStateSpec {
        energy,
        script_e: se,
        squeeze_r: 0.5 * (2.0 * se).ln(),
        squeeze_phase: 2.0 * (d.phase - phase_g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QfiForm {
    General,
    Aligned,
    BestState,
    Markov,
}

impl QfiForm {
    pub fn name(&self) -> &'static str {
        match self {
            QfiForm::General => "general",
            QfiForm::Aligned => "aligned",
            QfiForm::BestState => "best_state",
            QfiForm::Markov => "markov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiResult {
    pub value: f64,
    pub numerator_abs_d_sq: f64,
    /// Variance (aligned, best-state, Markov) or `var / det` inverse (general).
    pub denominator: f64,
    pub form: QfiForm,
}

impl QfiResult {
    fn new(numerator: f64, denominator: f64, form: QfiForm) -> Self {
        let value = if numerator == 0.0 { 0.0 } else { numerator / denominator };
        Self { value, numerator_abs_d_sq: numerator, denominator, form }
    }
}

/// Displacement coefficient and evolution shared by the QFI forms.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub d: DisplacementCoefficient,
    pub ev: Evolution,
}

impl Setup {
    pub fn compute(response: &ResponseFunction, force: &ForceModulation, window: Window) -> Result<Self> {
        Ok(Self { d: displacement_d(response, force, window)?, ev: Evolution::compute(response, window)? })
    }

    /// `phi_D - omega0 (t - t0)`, the optimal measurement angle.
    pub fn optimal_theta(&self) -> f64 {
        self.d.phase - self.ev.rotation()
    }

    pub fn general(&self, init: &GaussianProbeInit) -> QfiResult {
        let var = self.ev.variance(init, self.optimal_theta());
        let det = self.ev.det_sigma(init);
        QfiResult::new(self.d.abs().powi(2), det / var, QfiForm::General)
    }

    pub fn is_aligned(&self, init: &GaussianProbeInit) -> std::result::Result<(), f64> {
        if init.is_isotropic() || self.d.abs() == 0.0 {
            return Ok(());
        }
        let target = self.d.phase - self.ev.phase_g();
        let off = (init.max_variance_angle() - target).rem_euclid(PI);
        let off = off.min(PI - off);
        if off <= 1e-6 {
            Ok(())
        } else {
            Err(off)
        }
    }

    pub fn aligned(&self, init: &GaussianProbeInit) -> Result<QfiResult> {
        self.is_aligned(init).map_err(|offset| Error::Alignment { offset })?;
        let var = self.ev.variance(init, self.optimal_theta() + FRAC_PI_2);
        Ok(QfiResult::new(self.d.abs().powi(2), var, QfiForm::Aligned))
    }

    pub fn best(&self, energy: f64) -> Result<QfiResult> {
        let se = script_e(energy)?;
        let var = self.ev.g.norm_sqr() / (4.0 * se) + self.ev.noise;
        Ok(QfiResult::new(self.d.abs().powi(2), var, QfiForm::BestState))
    }

    /// Classical Fisher information of a `P(theta)` homodyne measurement.
    pub fn fisher_quadrature(&self, init: &GaussianProbeInit, theta: f64) -> f64 {
        let slope = self.d.abs() * (theta + self.ev.rotation() - self.d.phase).cos();
        if slope == 0.0 {
            return 0.0;
        }
        slope * slope / self.ev.variance(init, theta + FRAC_PI_2)
    }
}

/// `|D|^2 <dX(phi_D - omega0 tau)^2> / det Sigma`, valid for any Gaussian initial state.
pub fn qfi_general(init: &GaussianProbeInit, response: &ResponseFunction, force: &ForceModulation, window: Window) -> Result<QfiResult> {
    Ok(Setup::compute(response, force, window)?.general(init))
}

/// `|D|^2 / <dP(phi_D - omega0 tau)^2>`, for initial states aligned with the optimal quadrature.
pub fn qfi_aligned(init: &GaussianProbeInit, response: &ResponseFunction, force: &ForceModulation, window: Window) -> Result<QfiResult> {
    Setup::compute(response, force, window)?.aligned(init)
}

/// `|D|^2 / (|G|^2 / (4 script_e) + n_B)`.
pub fn qfi_best_state(energy: f64, response: &ResponseFunction, force: &ForceModulation, window: Window) -> Result<QfiResult> {
    script_e(energy)?;
    Setup::compute(response, force, window)?.best(energy)
}

pub fn fisher_quadrature(
    theta: f64,
    init: &GaussianProbeInit,
    response: &ResponseFunction,
    force: &ForceModulation,
    window: Window,
) -> Result<f64> {
    Ok(Setup::compute(response, force, window)?.fisher_quadrature(init, theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureScan {
    pub grid_argmax: f64,
    pub grid_max: f64,
    pub refined_argmax: f64,
    pub refined_max: f64,
    /// `phi_D - omega0 tau` reduced to `[0, pi)`.
    pub predicted: f64,
}

/// Scan `fisher_quadrature` over `n_grid` angles in `[0, pi)` and refine the
/// best grid point by golden section.
pub fn best_quadrature_scan(setup: &Setup, init: &GaussianProbeInit, n_grid: usize) -> QuadratureScan {
    let step = PI / n_grid as f64;
    let (i_best, grid_max) = (0..n_grid)
        .map(|i| (i, setup.fisher_quadrature(init, i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let grid_argmax = i_best as f64 * step;
    let (refined_argmax, refined_max) = golden_section_max(
        |th| setup.fisher_quadrature(init, th),
        grid_argmax - step,
        grid_argmax + step,
        1e-13,
        200,
    );
    QuadratureScan {
        grid_argmax,
        grid_max,
        refined_argmax: refined_argmax.rem_euclid(PI),
        refined_max,
        predicted: setup.optimal_theta().rem_euclid(PI),
    }
}

/// Angular distance modulo `pi`.
pub fn angle_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    /// Mean of the per-replication estimates.
    pub estimate: f64,
    pub empirical_mse: f64,
    pub qfi: f64,
    pub nu: usize,
    pub replications: usize,
    /// `mse * nu * F_Q`, one at Cramér-Rao saturation.
    pub cramer_rao_ratio: f64,
}

/// Sample `nu` outcomes of the optimal quadrature per replication, estimate
/// the force by inverting the linear mean, and collect the mean squared error.
///
/// Replication `k` draws from the ChaCha8 stream `k` of `seed`, so results do
/// not depend on the number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn simulate_estimation(
    init: &GaussianProbeInit,
    response: &ResponseFunction,
    force: &ForceModulation,
    window: Window,
    f_true: f64,
    nu: usize,
    replications: usize,
    seed: u64,
) -> Result<EstimationResult> {
    if nu == 0 || replications == 0 {
        return Err(Error::InvalidParameter("nu and replications must be >= 1".into()));
    }
    let setup = Setup::compute(response, force, window)?;
    if setup.d.abs() == 0.0 {
        return Err(Error::EstimationImpossible);
    }
    let theta = setup.optimal_theta();
    let qfi = setup.aligned(init)?.value;
    let slope = setup.d.abs();
    let offset = setup.ev.g.norm() * init.mean_at(theta + FRAC_PI_2 + setup.ev.rotation() - setup.ev.phase_g());
    let sd = setup.ev.variance(init, theta + FRAC_PI_2).sqrt();
    let dist = Normal::new(offset + f_true * slope, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let estimates: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mean = (0..nu).map(|_| dist.sample(&mut rng)).sum::<f64>() / nu as f64;
            (mean - offset) / slope
        })
        .collect();
    let estimate = estimates.iter().sum::<f64>() / replications as f64;
    let empirical_mse = estimates.iter().map(|e| (e - f_true).powi(2)).sum::<f64>() / replications as f64;
    Ok(EstimationResult {
        estimate,
        empirical_mse,
        qfi,
        nu,
        replications,
        cramer_rao_ratio: empirical_mse * nu as f64 * qfi,
    })
}

/// Two-term short-time QFI
/// `omega0^2 tau^2 / <dP[phi_D0]^2>_0 [zeta(t0)^2 + zeta(t0) zeta'(t0) tau]`.
pub fn short_time_qfi(init: &GaussianProbeInit, force: &ForceModulation, omega0: f64, t0: f64, tau: f64) -> f64 {
    let z = force.zeta(t0);
    let zd = force.zeta_dot(t0);
    let d0 = noiseless_d(force, omega0, Window { start: t0, end: t0 + tau });
    let var = init.variance_at(d0.phase + FRAC_PI_2);
    omega0 * omega0 * tau * tau / var * (z * z + z * zd * tau)
}

/// Markovian QFI
/// `omega0^2 |int zeta e^{i omega0 (u - t0)} e^{-gamma (t - u)/2} du|^2 / [e^{-gamma tau} V0 + (N + 1/2)(1 - e^{-gamma tau})]`
/// with `V0` the initial variance of the quadrature that is measured.
pub fn markov_qfi(init: &GaussianProbeInit, gamma: f64, n_thermal: f64, force: &ForceModulation, omega0: f64, window: Window) -> Result<QfiResult> {
    if !(gamma >= 0.0) || !(n_thermal >= 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma >= 0 and N >= 0, got {gamma}, {n_thermal}")));
    }
    let tau = window.length();
    let integral = match force.clip(window.start, window.end) {
        None => Complex64::new(0.0, 0.0),
        Some((lo, hi)) => {
            let f = |u: f64| Complex64::from_polar(force.zeta(u) * (-gamma * (window.end - u) / 2.0).exp(), omega0 * (u - window.start));
            let n0 = (((hi - lo) * omega0.max(gamma) * 4.0).ceil() as usize).max(16);
            simpson_adaptive(f, lo, hi, 1e-12, n0, 1 << 22).value
        }
    };
    let d = integral * omega0;
    let decay = (-gamma * tau).exp();
    let v0 = init.variance_at(principal_phase(d) + FRAC_PI_2);
    let denom = decay * v0 + (n_thermal + 0.5) * (1.0 - decay);
    Ok(QfiResult::new(d.norm_sqr(), denom, QfiForm::Markov))
}

/// `zeta zeta' + zeta^2 [gamma/2 - gamma (N + 1/2) / V0]`, the cubic coefficient of
/// `markov_qfi * V0 / omega0^2` in the window length.
pub fn markov_third_order_coefficient(zeta: f64, zeta_dot: f64, gamma: f64, n_thermal: f64, v0: f64) -> f64 {
    zeta * zeta_dot + zeta * zeta * (gamma / 2.0 - gamma * (n_thermal + 0.5) / v0)
}
