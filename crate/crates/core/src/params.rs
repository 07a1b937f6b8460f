//! Medium constants, field and coherence records, and grid construction.
//!
//! Units throughout: Rabi frequencies and decay rates in units of the
//! excited-state decay rate Γ, positions as a fraction of the medium length
//! (z ∈ [0, 1]), times in units of 1/Γ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Cplx, Real};

/// Default Γ/2π in Hz.
pub const DEFAULT_GAMMA_UNIT_HZ: f64 = 6.0e6;
/// Default optical coherence decay rate, units of Γ.
pub const DEFAULT_GAMMA_OPTICAL: f64 = 1.25;
/// Default medium length in mm.
pub const DEFAULT_LENGTH_MM: f64 = 3.5;

/// Ratio γ21/γ31 above which the ground-state dephasing is flagged.
const DEPHASING_WARN_RATIO: f64 = 0.1;

/// Atomic and medium constants for the double-Λ system.
///
/// The probe and signal transitions share one optical density `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams<T> {
    pub alpha: T,
    pub gamma31: T,
    pub gamma41: T,
    pub gamma21: T,
    /// Physical medium length, only used when reporting lengths.
    pub length_mm: T,
    /// Γ/2π in Hz, only used when reporting times in seconds.
    pub gamma_unit_hz: T,
}

impl<T: Real> PhysParams<T> {
    /// Builds a parameter set with default length and Γ, checking the invariants.
    pub fn new(alpha: T, gamma31: T, gamma41: T, gamma21: T) -> Result<Self> {
        let p = PhysParams {
            alpha,
            gamma31,
            gamma41,
            gamma21,
            length_mm: T::lit(DEFAULT_LENGTH_MM),
            gamma_unit_hz: T::lit(DEFAULT_GAMMA_UNIT_HZ),
        };
        p.check()?;
        Ok(p)
    }

    /// Symmetric optical decay γ31 = γ41 = 1.25 Γ.
    pub fn symmetric(alpha: T, gamma21: T) -> Result<Self> {
        let g = T::lit(DEFAULT_GAMMA_OPTICAL);
        Self::new(alpha, g, g, gamma21)
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_gamma21(mut self, gamma21: T) -> Self {
        self.gamma21 = gamma21;
        self
    }

    /// Validates the hard invariants; returns warnings for soft ones.
    pub fn check(&self) -> Result<Vec<String>> {
        let finite = [
            self.alpha,
            self.gamma31,
            self.gamma41,
            self.gamma21,
            self.length_mm,
            self.gamma_unit_hz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("parameters must be finite".into()));
        }
        if self.alpha <= T::zero() {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if self.gamma31 <= T::zero() {
            return Err(Error::Config("gamma31 must be positive".into()));
        }
        if self.gamma41 <= T::zero() {
            return Err(Error::Config("gamma41 must be positive".into()));
        }
        if self.gamma21 < T::zero() {
            return Err(Error::Config("gamma21 must be non-negative".into()));
        }
        if self.length_mm <= T::zero() {
            return Err(Error::Config("length_mm must be positive".into()));
        }
        if self.gamma_unit_hz <= T::zero() {
            return Err(Error::Config("gamma_unit_hz must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.gamma21 > T::lit(DEPHASING_WARN_RATIO) * self.gamma31 {
            warnings.push(format!(
                "gamma21 = {} exceeds 0.1 * gamma31 = {}; the EIT picture assumes gamma21 << gamma31",
                self.gamma21,
                T::lit(DEPHASING_WARN_RATIO) * self.gamma31
            ));
        }
        Ok(warnings)
    }

    /// Γ in rad/s.
    pub fn gamma_unit(&self) -> T {
        T::TAU() * self.gamma_unit_hz
    }

    /// Converts a duration in units of 1/Γ into seconds.
    pub fn to_seconds(&self, t: T) -> T {
        t / self.gamma_unit()
    }

    /// Propagation prefactors (αγ31/2, αγ41/2) for the probe and signal.
    pub(crate) fn couplings(&self) -> (T, T) {
        let half = T::lit(0.5);
        (half * self.alpha * self.gamma31, half * self.alpha * self.gamma41)
    }

    pub fn cast<U: Real>(&self) -> PhysParams<U> {
        PhysParams {
            alpha: U::lit(self.alpha.to_f64_lossy()),
            gamma31: U::lit(self.gamma31.to_f64_lossy()),
            gamma41: U::lit(self.gamma41.to_f64_lossy()),
            gamma21: U::lit(self.gamma21.to_f64_lossy()),
            length_mm: U::lit(self.length_mm.to_f64_lossy()),
            gamma_unit_hz: U::lit(self.gamma_unit_hz.to_f64_lossy()),
        }
    }
}

/// Slowly varying coherences ρ31, ρ41, ρ21 at one point (ρ11 = 1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherenceState<T> {
    pub rho31: Cplx<T>,
    pub rho41: Cplx<T>,
    pub rho21: Cplx<T>,
}

impl<T: Real> CoherenceState<T> {
    pub fn zero() -> Self {
        CoherenceState {
            rho31: Cplx::new(T::zero(), T::zero()),
            rho41: Cplx::new(T::zero(), T::zero()),
            rho21: Cplx::new(T::zero(), T::zero()),
        }
    }

    pub fn max_magnitude(&self) -> T {
        self.rho31.norm().max(self.rho41.norm()).max(self.rho21.norm())
    }

    /// First-order perturbation theory requires every coherence to stay below one.
    pub fn is_perturbative(&self) -> bool {
        self.max_magnitude() <= T::one()
    }

    pub(crate) fn axpy(&self, h: T, k: &Self) -> Self {
        CoherenceState {
            rho31: self.rho31 + k.rho31 * h,
            rho41: self.rho41 + k.rho41 * h,
            rho21: self.rho21 + k.rho21 * h,
        }
    }
}

/// Probe and signal envelopes sampled along the medium.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub z: Vec<T>,
    pub omega_p: Vec<Cplx<T>>,
    pub omega_s: Vec<Cplx<T>>,
    pub t: Option<Vec<T>>,
}

impl<T: Real> FieldState<T> {
    pub fn new(z: Vec<T>, omega_p: Vec<Cplx<T>>, omega_s: Vec<Cplx<T>>) -> Result<Self> {
        if omega_p.len() != z.len() || omega_s.len() != z.len() {
            return Err(Error::InvalidInput(format!(
                "field arrays ({}, {}) do not match grid length {}",
                omega_p.len(),
                omega_s.len(),
                z.len()
            )));
        }
        if !strictly_increasing(&z) {
            return Err(Error::InvalidInput("z grid must be strictly increasing".into()));
        }
        Ok(FieldState {
            z,
            omega_p,
            omega_s,
            t: None,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// |Ω_p|² + |Ω_s|² per grid point.
    pub fn total_intensity(&self) -> Vec<T> {
        self.omega_p
            .iter()
            .zip(&self.omega_s)
            .map(|(p, s)| p.norm_sqr() + s.norm_sqr())
            .collect()
    }
}

pub(crate) fn strictly_increasing<T: Real>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Uniform spatial grid and optional time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids<T> {
    pub z: Vec<T>,
    pub t: Option<Vec<T>>,
}

impl<T: Real> Grids<T> {
    pub fn dz(&self) -> T {
        self.z[1] - self.z[0]
    }

    pub fn dt(&self) -> Option<T> {
        self.t.as_ref().map(|t| t[1] - t[0])
    }
}

/// Uniform z grid on [0, 1] with `n_z` points and, when `n_t` is given,
/// a uniform time grid on [0, t_span].
pub fn build_grid<T: Real>(n_z: usize, n_t: Option<usize>, t_span: Option<T>) -> Result<Grids<T>> {
    if n_z < 2 {
        return Err(Error::InvalidInput(format!("n_z must be at least 2, got {n_z}")));
    }
    let z = linspace(T::zero(), T::one(), n_z);
    let t = match (n_t, t_span) {
        (None, None) => None,
        (Some(n), Some(span)) => {
            if !(span > T::zero()) || !span.is_finite() {
                return Err(Error::InvalidInput(format!("t_span must be positive, got {span}")));
            }
            if n < 2 {
                return Err(Error::InvalidInput(format!("n_t must be at least 2, got {n}")));
            }
            Some(linspace(T::zero(), span, n))
        }
        (Some(_), None) => return Err(Error::InvalidInput("n_t given without t_span".into())),
        (None, Some(_)) => return Err(Error::InvalidInput("t_span given without n_t".into())),
    };
    Ok(Grids { z, t })
}

/// `n` evenly spaced points from `a` to `b` inclusive, computed as a + i·h
/// so that the end point is hit exactly.
pub(crate) fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let last = T::lit((n - 1) as f64);
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * T::lit(i as f64) / last
            }
        })
        .collect()
}
