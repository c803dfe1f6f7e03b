//! Spectral densities and the bath two-point correlation function.
//!
//! Convention: `C(τ) = (1/π) ∫₀^∞ dω J(ω) [coth(βω/2) cos ωτ − i sin ωτ]`,
//! i.e. `C(τ) = ⟨δB(τ) δB(0)⟩` for the fluctuation `δB = B − ⟨B⟩`.
//! The mean `⟨B⟩` is carried separately.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::liouville::C64;
use crate::quadrature::integrate_adaptive;

/// Quadrature stops at this multiple of the cutoff frequency.
pub const FREQUENCY_CUTOFF_MULTIPLE: f64 = 40.0;

const QUAD_REL_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralDensity {
    /// `J(ω) = η ω e^{−ω/ω_c}`
    Ohmic { eta: f64, cutoff: f64 },
    /// `J(ω) = 2 λ γ ω / (ω² + γ²)` on `(0, 40γ]`. The hard cutoff keeps `C(0)` finite.
    DrudeLorentz { reorganization: f64, width: f64 },
}

impl SpectralDensity {
    pub fn eval(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        match *self {
            SpectralDensity::Ohmic { eta, cutoff } => eta * omega * (-omega / cutoff).exp(),
            SpectralDensity::DrudeLorentz {
                reorganization,
                width,
            } => {
                if omega > self.max_frequency() {
                    0.0
                } else {
                    2.0 * reorganization * width * omega / (omega * omega + width * width)
                }
            }
        }
    }

    /// Characteristic frequency: `ω_c` for Ohmic, `γ` for Drude–Lorentz.
    pub fn cutoff(&self) -> f64 {
        match *self {
            SpectralDensity::Ohmic { cutoff, .. } => cutoff,
            SpectralDensity::DrudeLorentz { width, .. } => width,
        }
    }

    pub fn max_frequency(&self) -> f64 {
        FREQUENCY_CUTOFF_MULTIPLE * self.cutoff()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpectralDensity::Ohmic { eta, cutoff } => eta >= 0.0 && cutoff > 0.0,
            SpectralDensity::DrudeLorentz {
                reorganization,
                width,
            } => reorganization >= 0.0 && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "spectral density parameters out of range: {self:?}"
            )))
        }
    }

    /// `J(ω) coth(βω/2)`, finite as `ω → 0`.
    fn thermal_weight(&self, omega: f64, beta: Option<f64>) -> f64 {
        match beta {
            None => self.eval(omega),
            Some(beta) => {
                let x = 0.5 * beta * omega;
                if x < 1e-8 {
                    // J(ω) ~ J'(0) ω near zero
                    let slope = self.eval(1e-12) / 1e-12;
                    slope * 2.0 / beta
                } else {
                    self.eval(omega) / x.tanh()
                }
            }
        }
    }
}

/// Exact two-point data of a discrete bath: `C(τ) = Σ_k w_k e^{−iν_k τ} − ⟨B⟩²`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpectrum {
    pub weights: Vec<f64>,
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Source {
    OhmicZeroTemperature { eta: f64, cutoff: f64 },
    Quadrature(SpectralDensity),
    Discrete(Arc<DiscreteSpectrum>),
}

/// Stationary two-point correlation `C(τ)` of the bath fluctuation plus the mean `⟨B⟩`.
#[derive(Clone, Debug)]
pub struct BathCorrelation {
    source: Source,
    beta: Option<f64>,
    mean: f64,
}

fn check_beta(beta: Option<f64>) -> Result<()> {
    match beta {
        Some(b) if !(b > 0.0) || !b.is_finite() => Err(Error::InvalidArgument(format!(
            "inverse temperature must be positive, got {b}"
        ))),
        _ => Ok(()),
    }
}

/// `None` for `beta` means zero temperature.
pub fn correlation_from_spectral_density(
    density: SpectralDensity,
    beta: Option<f64>,
) -> Result<BathCorrelation> {
    density.validate()?;
    check_beta(beta)?;
    let source = match (density, beta) {
        (SpectralDensity::Ohmic { eta, cutoff }, None) => {
            Source::OhmicZeroTemperature { eta, cutoff }
        }
        _ => Source::Quadrature(density),
    };
    Ok(BathCorrelation {
        source,
        beta,
        mean: 0.0,
    })
}

impl BathCorrelation {
    /// Always evaluates by quadrature, even where a closed form exists.
    pub fn by_quadrature(density: SpectralDensity, beta: Option<f64>) -> Result<Self> {
        density.validate()?;
        check_beta(beta)?;
        Ok(Self {
            source: Source::Quadrature(density),
            beta,
            mean: 0.0,
        })
    }

    pub fn from_discrete(spectrum: DiscreteSpectrum, beta: Option<f64>, mean: f64) -> Self {
        Self {
            source: Source::Discrete(Arc::new(spectrum)),
            beta,
            mean,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Same correlation for the coupling `λ B`: `C → λ² C`, `⟨B⟩ → λ⟨B⟩`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let source = match &self.source {
            Source::OhmicZeroTemperature { eta, cutoff } => Source::OhmicZeroTemperature {
                eta: eta * lambda * lambda,
                cutoff: *cutoff,
            },
            Source::Quadrature(SpectralDensity::Ohmic { eta, cutoff }) => {
                Source::Quadrature(SpectralDensity::Ohmic {
                    eta: eta * lambda * lambda,
                    cutoff: *cutoff,
                })
            }
            Source::Quadrature(SpectralDensity::DrudeLorentz {
                reorganization,
                width,
            }) => Source::Quadrature(SpectralDensity::DrudeLorentz {
                reorganization: reorganization * lambda * lambda,
                width: *width,
            }),
            Source::Discrete(spec) => Source::Discrete(Arc::new(DiscreteSpectrum {
                weights: spec.weights.iter().map(|w| w * lambda * lambda).collect(),
                frequencies: spec.frequencies.clone(),
            })),
        };
        Self {
            source,
            beta: self.beta,
            mean: self.mean * lambda,
        }
    }

    /// `C(τ)`
    pub fn eval(&self, tau: f64) -> Result<C64> {
        match &self.source {
            Source::OhmicZeroTemperature { eta, cutoff } => {
                let denom = C64::new(1.0, cutoff * tau);
                Ok(C64::new(eta / PI * cutoff * cutoff, 0.0) / (denom * denom))
            }
            Source::Quadrature(density) => {
                if tau < 0.0 {
                    return Ok(self.eval(-tau)?.conj());
                }
                let omega_max = density.max_frequency();
                let panels = 8 + (omega_max * tau / PI).ceil() as usize;
                let beta = self.beta;
                let scale = integrate_adaptive(
                    |w| C64::new(density.thermal_weight(w, beta), 0.0),
                    0.0,
                    omega_max,
                    1e-300,
                    QUAD_REL_TOL,
                    8,
                )?
                .norm()
                    / PI;
                let v = integrate_adaptive(
                    |w| {
                        let (s, c) = (w * tau).sin_cos();
                        C64::new(density.thermal_weight(w, beta) * c, -density.eval(w) * s)
                    },
                    0.0,
                    omega_max,
                    QUAD_REL_TOL * scale.max(1e-300) * PI,
                    QUAD_REL_TOL,
                    panels,
                )?;
                Ok(v / PI)
            }
            Source::Discrete(spec) => {
                let mut acc = C64::new(-self.mean * self.mean, 0.0);
                for (w, nu) in spec.weights.iter().zip(&spec.frequencies) {
                    acc += C64::from_polar(*w, -nu * tau);
                }
                Ok(acc)
            }
        }
    }

    /// `C(k·dt)` for `k = 0..=n`.
    pub fn tabulate(&self, dt: f64, n: usize) -> Result<Vec<C64>> {
        (0..=n).map(|k| self.eval(k as f64 * dt)).collect()
    }
}
