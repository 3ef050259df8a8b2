//! Discrete and continuous Gaussian baths, their memory kernel, bare
//! correlation function and moment frequencies.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One bath oscillator. Only the squared coupling modulus ever enters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub coupling_magnitude_sq: f64,
    pub frequency: f64,
    pub occupation: f64,
}

impl BathMode {
    pub fn new(coupling_magnitude_sq: f64, frequency: f64, occupation: f64) -> Result<Self> {
        if !(coupling_magnitude_sq.is_finite() && coupling_magnitude_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling |K|^2 must be finite and >= 0, got {coupling_magnitude_sq}"
            )));
        }
        if !(frequency.is_finite() && frequency >= 0.0) {
            return Err(Error::InvalidParameter(format!("mode frequency must be >= 0, got {frequency}")));
        }
        if !(occupation.is_finite() && occupation >= 0.0) {
            return Err(Error::InvalidParameter(format!("occupation must be >= 0, got {occupation}")));
        }
        Ok(Self { coupling_magnitude_sq, frequency, occupation })
    }

    /// Detuning `omega0 - omega_n`.
    pub fn detuning(&self, omega0: f64) -> f64 {
        omega0 - self.frequency
    }
}

/// A finite collection of bath modes together with the probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    modes: Vec<BathMode>,
    probe_frequency: f64,
}

impl DiscreteBath {
    pub fn new(modes: Vec<BathMode>, probe_frequency: f64) -> Result<Self> {
        if !(probe_frequency.is_finite() && probe_frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "probe frequency must be > 0, got {probe_frequency}"
            )));
        }
        for m in &modes {
            BathMode::new(m.coupling_magnitude_sq, m.frequency, m.occupation)?;
        }
        Ok(Self { modes, probe_frequency })
    }

    /// The noiseless limit: no modes, G identically 1.
    pub fn empty(probe_frequency: f64) -> Result<Self> {
        Self::new(Vec::new(), probe_frequency)
    }

    /// Convenience constructor from `(k_sq, detuning, occupation)` triples,
    /// detuning measured as `omega0 - omega_n`.
    pub fn from_detunings(triples: &[(f64, f64, f64)], probe_frequency: f64) -> Result<Self> {
        let modes = triples
            .iter()
            .map(|&(k, d, n)| BathMode::new(k, probe_frequency - d, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes, probe_frequency)
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }

    pub fn probe_frequency(&self) -> f64 {
        self.probe_frequency
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Same modes with one extra mode appended.
    pub fn with_mode(&self, mode: BathMode) -> Self {
        let mut modes = self.modes.clone();
        modes.push(mode);
        Self { modes, probe_frequency: self.probe_frequency }
    }

    /// Same modes with every coupling multiplied by `factor` (|K|^2 scales by `factor^2`).
    pub fn scaled_coupling(&self, factor: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| BathMode { coupling_magnitude_sq: m.coupling_magnitude_sq * factor * factor, ..*m })
            .collect();
        Self { modes, probe_frequency: self.probe_frequency }
    }

    /// Largest |detuning| over all coupled modes.
    pub fn max_abs_detuning(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.coupling_magnitude_sq > 0.0)
            .map(|m| m.detuning(self.probe_frequency).abs())
            .fold(0.0, f64::max)
    }

    pub fn k_squared(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling_magnitude_sq).sum()
    }

    pub fn script_n(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling_magnitude_sq * (m.occupation + 0.5)).sum()
    }
}

/// Memory kernel `kappa(tau) = sum |K_n|^2 exp(i (omega0 - omega_n) tau)`.
pub fn memory_kernel(bath: &DiscreteBath, tau: f64) -> Complex64 {
    let w0 = bath.probe_frequency;
    bath.modes
        .iter()
        .map(|m| Complex64::from_polar(m.coupling_magnitude_sq, m.detuning(w0) * tau))
        .sum()
}

/// Bare bath correlation `C0(tau) = sum |K_n|^2 (N_n + 1/2) exp(i (omega0 - omega_n) tau)`.
pub fn bare_correlation_c0(bath: &DiscreteBath, tau: f64) -> Complex64 {
    let w0 = bath.probe_frequency;
    bath.modes
        .iter()
        .map(|m| Complex64::from_polar(m.coupling_magnitude_sq * (m.occupation + 0.5), m.detuning(w0) * tau))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathMoments {
    pub k_squared: f64,
    pub script_n: f64,
    /// `omega_p[i]` holds the frequency of order `p = i + 2`.
    pub omega_p: Vec<f64>,
    /// `chi_q[i]` holds the magnitude of order `q = i + 1`; empty when the bath injects no noise.
    pub chi_q: Vec<f64>,
    /// Set when `script_n == 0` so the occupation-weighted frequencies are undefined.
    pub chi_absent: bool,
}

impl BathMoments {
    /// Frequency of order `p >= 2`, or `None` beyond `p_max`.
    pub fn omega(&self, p: usize) -> Option<f64> {
        p.checked_sub(2).and_then(|i| self.omega_p.get(i).copied())
    }

    /// Occupation-weighted frequency of order `q >= 1`.
    pub fn chi(&self, q: usize) -> Option<f64> {
        q.checked_sub(1).and_then(|i| self.chi_q.get(i).copied())
    }

    /// Largest of all `Omega_p` and `|chi_q|`.
    pub fn max_frequency(&self) -> f64 {
        self.omega_p.iter().chain(self.chi_q.iter()).fold(0.0, |a, &b| a.max(b.abs()))
    }
}

pub const DEFAULT_P_MAX: usize = 6;

pub fn moments(bath: &DiscreteBath, p_max: usize) -> Result<BathMoments> {
    if p_max < 2 {
        return Err(Error::InvalidParameter(format!("p_max must be >= 2, got {p_max}")));
    }
    let w0 = bath.probe_frequency;
    let k_squared = bath.k_squared();
    let script_n = bath.script_n();
    let omega_p = (2..=p_max)
        .map(|p| {
            let s: f64 = bath
                .modes
                .iter()
                .map(|m| m.coupling_magnitude_sq * m.detuning(w0).powi(p as i32 - 2))
                .sum();
            s.abs().powf(1.0 / p as f64)
        })
        .collect();
    let chi_absent = script_n <= 0.0;
    let chi_q = if chi_absent {
        Vec::new()
    } else {
        (1..=p_max)
            .map(|q| {
                let s: f64 = bath
                    .modes
                    .iter()
                    .map(|m| m.coupling_magnitude_sq * (m.occupation + 0.5) / script_n * m.detuning(w0).powi(q as i32))
                    .sum();
                s.abs().powf(1.0 / q as f64)
            })
            .collect()
    };
    Ok(BathMoments { k_squared, script_n, omega_p, chi_q, chi_absent })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFamily {
    FlatBand,
    Ohmic { exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffShape {
    Hard,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupationModel {
    ZeroTemperature,
    /// Bose-Einstein occupation at temperature `T` (rad/time, hbar = k_B = 1).
    Thermal(f64),
    Constant(f64),
}

impl OccupationModel {
    pub fn occupation(&self, omega: f64) -> f64 {
        match *self {
            OccupationModel::ZeroTemperature => 0.0,
            OccupationModel::Thermal(t) => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 / (omega / t).exp_m1()
                }
            }
            OccupationModel::Constant(n) => n,
        }
    }
}

/// Continuum spectral density `rho(omega) = g(omega) |K(omega)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSpectrum {
    family: SpectralFamily,
    scale: f64,
    cutoff: f64,
    cutoff_shape: CutoffShape,
    occupation_model: OccupationModel,
}

impl ContinuousSpectrum {
    pub fn new(
        family: SpectralFamily,
        scale: f64,
        cutoff: f64,
        cutoff_shape: CutoffShape,
        occupation_model: OccupationModel,
    ) -> Result<Self> {
        if let SpectralFamily::Ohmic { exponent } = family {
            if !(exponent.is_finite() && exponent > 0.0) {
                return Err(Error::InvalidParameter(format!("ohmic exponent must be > 0, got {exponent}")));
            }
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidParameter(format!("spectral scale must be >= 0, got {scale}")));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be > 0, got {cutoff}")));
        }
        match occupation_model {
            OccupationModel::Thermal(t) if !(t.is_finite() && t >= 0.0) => {
                return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {t}")));
            }
            OccupationModel::Constant(n) if !(n.is_finite() && n >= 0.0) => {
                return Err(Error::InvalidParameter(format!("occupation must be >= 0, got {n}")));
            }
            _ => {}
        }
        Ok(Self { family, scale, cutoff, cutoff_shape, occupation_model })
    }

    pub fn family(&self) -> SpectralFamily {
        self.family
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn cutoff_shape(&self) -> CutoffShape {
        self.cutoff_shape
    }

    pub fn occupation_model(&self) -> OccupationModel {
        self.occupation_model
    }

    /// Upper end of the frequency interval that is discretized.
    pub fn support_end(&self) -> f64 {
        match self.cutoff_shape {
            CutoffShape::Hard => self.cutoff,
            CutoffShape::Exponential => 8.0 * self.cutoff,
        }
    }

    /// `g(omega)|K(omega)|^2`; zero outside the support.
    pub fn density(&self, omega: f64) -> f64 {
        if omega < 0.0 || omega > self.support_end() {
            return 0.0;
        }
        let base = match self.family {
            SpectralFamily::FlatBand => self.scale,
            SpectralFamily::Ohmic { exponent } => self.scale * omega.powf(exponent),
        };
        match self.cutoff_shape {
            CutoffShape::Hard => base,
            CutoffShape::Exponential => base * (-omega / self.cutoff).exp(),
        }
    }

    /// One-sided limits of the density at `omega0`, `(rho(omega0-), rho(omega0+))`.
    pub fn density_limits(&self, omega0: f64) -> (f64, f64) {
        let end = self.support_end();
        let below = if omega0 > 0.0 && omega0 <= end { self.density(omega0) } else { 0.0 };
        let above = if omega0 >= 0.0 && omega0 < end { self.density(omega0) } else { 0.0 };
        (below, above)
    }

    /// Markovian decay rate `pi [rho(omega0-) + rho(omega0+)]`.
    ///
    /// A band that extends on both sides of the probe frequency contributes
    /// both half-lines; at a band edge only one side survives and the rate is
    /// `pi rho(omega0)`.
    pub fn markov_gamma(&self, omega0: f64) -> f64 {
        let (lo, hi) = self.density_limits(omega0);
        std::f64::consts::PI * (lo + hi)
    }
}

/// Midpoint-rule discretization onto `n_modes` equal bins.
pub fn discretize(spectrum: &ContinuousSpectrum, n_modes: usize, probe_frequency: f64) -> Result<DiscreteBath> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be >= 1".into()));
    }
    let width = spectrum.support_end() / n_modes as f64;
    let modes = (0..n_modes)
        .map(|j| {
            let omega = (j as f64 + 0.5) * width;
            BathMode {
                coupling_magnitude_sq: spectrum.density(omega) * width,
                frequency: omega,
                occupation: spectrum.occupation_model.occupation(omega),
            }
        })
        .collect();
    DiscreteBath::new(modes, probe_frequency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair() -> DiscreteBath {
        DiscreteBath::from_detunings(&[(1.0, 1.0, 0.0), (1.0, -1.0, 0.0)], 3.0).unwrap()
    }

    #[test]
    fn flat_band_bins_are_equal() {
        let s = ContinuousSpectrum::new(SpectralFamily::FlatBand, 0.3, 2.0, CutoffShape::Hard, OccupationModel::ZeroTemperature)
            .unwrap();
        let b = discretize(&s, 4, 1.0).unwrap();
        for m in b.modes() {
            assert!((m.coupling_magnitude_sq - 0.3 * 2.0 / 4.0).abs() < 1e-15);
        }
        let one = discretize(&s, 1, 1.0).unwrap();
        assert_eq!(one.modes()[0].frequency, 1.0);
        assert!((one.modes()[0].coupling_magnitude_sq - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ohmic_sum_converges() {
        let s = ContinuousSpectrum::new(
            SpectralFamily::Ohmic { exponent: 1.0 },
            1.0,
            2.0,
            CutoffShape::Hard,
            OccupationModel::ZeroTemperature,
        )
        .unwrap();
        let b = discretize(&s, 64, 1.0).unwrap();
        assert!((b.k_squared() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn ohmic_error_halves_with_doubling() {
        // sub-ohmic density with an exact integral scale * wc^(s+1) / (s+1)
        let sexp = 0.5;
        let s = ContinuousSpectrum::new(
            SpectralFamily::Ohmic { exponent: sexp },
            1.0,
            1.0,
            CutoffShape::Hard,
            OccupationModel::ZeroTemperature,
        )
        .unwrap();
        let exact = 1.0 / (sexp + 1.0);
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64, 128] {
            let err = (discretize(&s, n, 1.0).unwrap().k_squared() - exact).abs();
            assert!(err <= prev / 2.0 + 1e-15, "n={n} err={err} prev={prev}");
            prev = err;
        }
    }

    #[test]
    fn invalid_exponent_rejected() {
        let r = ContinuousSpectrum::new(
            SpectralFamily::Ohmic { exponent: -1.0 },
            1.0,
            1.0,
            CutoffShape::Hard,
            OccupationModel::ZeroTemperature,
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_scale_gives_noiseless_modes() {
        let s = ContinuousSpectrum::new(SpectralFamily::FlatBand, 0.0, 1.0, CutoffShape::Exponential, OccupationModel::Thermal(1.0))
            .unwrap();
        let b = discretize(&s, 8, 1.0).unwrap();
        assert_eq!(b.k_squared(), 0.0);
        assert!((b.modes()[7].frequency - 7.5).abs() < 1e-12);
    }

    #[test]
    fn kernel_examples() {
        let res = DiscreteBath::from_detunings(&[(0.25, 0.0, 0.0)], 1.0).unwrap();
        assert_eq!(memory_kernel(&res, 3.7), Complex64::new(0.25, 0.0));
        assert_eq!(memory_kernel(&DiscreteBath::empty(1.0).unwrap(), 1.0), Complex64::new(0.0, 0.0));
        assert!(memory_kernel(&pair(), std::f64::consts::FRAC_PI_2).norm() < 1e-15);
        let res1 = DiscreteBath::from_detunings(&[(1.0, 0.0, 0.0)], 1.0).unwrap();
        assert!((bare_correlation_c0(&res1, 2.0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn c0_thermal_pair_matches_direct_sum() {
        let b = DiscreteBath::new(
            vec![BathMode::new(0.4, 1.5, 1.2).unwrap(), BathMode::new(0.7, 2.5, 0.3).unwrap()],
            2.0,
        )
        .unwrap();
        let expect = Complex64::new(0.0, 0.5).exp() * (0.4 * 1.7) + Complex64::new(0.0, -0.5).exp() * (0.7 * 0.8);
        assert!((bare_correlation_c0(&b, 1.0) - expect).norm() < 1e-14);
    }

    #[test]
    fn moment_examples() {
        let m = moments(&DiscreteBath::from_detunings(&[(0.25, 0.0, 0.0)], 1.0).unwrap(), 6).unwrap();
        assert!((m.omega(2).unwrap() - 0.5).abs() < 1e-15);
        assert!(m.omega_p[1..].iter().all(|&w| w == 0.0));
        assert!(m.chi_q.iter().all(|&c| c == 0.0));

        let e = moments(&DiscreteBath::empty(1.0).unwrap(), 6).unwrap();
        assert_eq!((e.k_squared, e.script_n), (0.0, 0.0));
        assert!(e.chi_absent && e.chi_q.is_empty());
        assert!(e.omega_p.iter().all(|&w| w == 0.0));

        let p = moments(&pair(), 6).unwrap();
        assert!((p.k_squared - 2.0).abs() < 1e-15);
        assert!((p.script_n - 1.0).abs() < 1e-15);
        assert!((p.omega(2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(p.omega(3).unwrap().abs() < 1e-15);
        assert!((p.omega(4).unwrap() - 2f64.powf(0.25)).abs() < 1e-15);
        assert!(p.chi(1).unwrap().abs() < 1e-15);
        assert!((p.chi(2).unwrap() - 1.0).abs() < 1e-15);
        assert!(p.chi(3).unwrap().abs() < 1e-15);
        assert!(moments(&pair(), 1).is_err());
    }

    #[test]
    fn markov_gamma_band_edge_and_interior() {
        let s = ContinuousSpectrum::new(SpectralFamily::FlatBand, 0.1, 2.0, CutoffShape::Hard, OccupationModel::ZeroTemperature)
            .unwrap();
        let pi = std::f64::consts::PI;
        assert!((s.markov_gamma(1.0) - 2.0 * pi * 0.1).abs() < 1e-15);
        assert!((s.markov_gamma(2.0) - pi * 0.1).abs() < 1e-15);
        assert_eq!(s.markov_gamma(3.0), 0.0);
    }

    #[test]
    fn thermal_occupation() {
        let m = OccupationModel::Thermal(2.0);
        assert!((m.occupation(1.0) - 1.0 / (0.5f64.exp() - 1.0)).abs() < 1e-14);
        assert_eq!(OccupationModel::Thermal(0.0).occupation(1.0), 0.0);
    }

    fn arb_bath() -> impl Strategy<Value = DiscreteBath> {
        prop::collection::vec((0.0..2.0f64, 0.0..5.0f64, 0.0..3.0f64), 0..6).prop_map(|v| {
            let modes = v.into_iter().map(|(k, w, n)| BathMode::new(k, w, n).unwrap()).collect();
            DiscreteBath::new(modes, 2.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn kernel_at_zero_is_k_squared(b in arb_bath()) {
            let m = moments(&b, 6).unwrap();
            let k0 = memory_kernel(&b, 0.0);
            prop_assert!(k0.im.abs() < 1e-14);
            prop_assert!((k0.re - m.k_squared).abs() <= 1e-12 * m.k_squared.max(1e-300));
            prop_assert!((m.omega(2).unwrap() - m.k_squared.sqrt()).abs() <= 1e-14 * (1.0 + m.k_squared));
            prop_assert!(m.script_n >= m.k_squared / 2.0 - 1e-14);
        }

        #[test]
        fn hermitian_and_bounded(b in arb_bath(), tau in -20.0..20.0f64) {
            let n = b.script_n();
            let c = bare_correlation_c0(&b, tau);
            prop_assert!(c.norm() <= n * (1.0 + 1e-12) + 1e-15);
            prop_assert!((c - bare_correlation_c0(&b, -tau).conj()).norm() < 1e-12);
            prop_assert!((memory_kernel(&b, tau) - memory_kernel(&b, -tau).conj()).norm() < 1e-12);
        }
    }
}
