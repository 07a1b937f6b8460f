//! Control-field Rabi frequencies Ω_c(z), Ω_d(z) over the medium.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{cplx, is_finite_c, Cplx, Real};
use crate::params::strictly_increasing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Uniform,
    Sincos,
    GaussianPair,
    CustomTabulated,
}

impl ProfileKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileKind::Uniform => "uniform",
            ProfileKind::Sincos => "sincos",
            ProfileKind::GaussianPair => "gaussian-pair",
            ProfileKind::CustomTabulated => "custom-tabulated",
        }
    }
}

/// Control fields sampled on a z grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile<T> {
    z: Vec<T>,
    omega_c: Vec<Cplx<T>>,
    omega_d: Vec<Cplx<T>>,
}

impl<T: Real> TabulatedProfile<T> {
    pub fn new(z: Vec<T>, omega_c: Vec<Cplx<T>>, omega_d: Vec<Cplx<T>>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::InvalidInput("tabulated profile needs at least two samples".into()));
        }
        if omega_c.len() != z.len() || omega_d.len() != z.len() {
            return Err(Error::InvalidInput("tabulated profile arrays differ in length".into()));
        }
        if !strictly_increasing(&z) {
            return Err(Error::InvalidInput("tabulated z must be strictly increasing".into()));
        }
        if z[0] > T::zero() || *z.last().unwrap() < T::one() {
            return Err(Error::InvalidInput("tabulated z must cover [0, 1]".into()));
        }
        if !omega_c.iter().chain(&omega_d).all(|v| is_finite_c(*v)) {
            return Err(Error::InvalidInput("tabulated profile values must be finite".into()));
        }
        Ok(TabulatedProfile { z, omega_c, omega_d })
    }

    fn at(&self, z: T) -> (Cplx<T>, Cplx<T>) {
        let n = self.z.len();
        let i = match self.z.partition_point(|&x| x <= z) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let w = ((z - z0) / (z1 - z0)).max(T::zero()).min(T::one());
        let lerp = |a: Cplx<T>, b: Cplx<T>| a + (b - a) * w;
        (lerp(self.omega_c[i], self.omega_c[i + 1]), lerp(self.omega_d[i], self.omega_d[i + 1]))
    }
}

/// Pair of control Rabi frequencies as functions of z ∈ [0, 1], units of Γ.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlProfile<T> {
    /// z-independent controls.
    Uniform { omega_c: Cplx<T>, omega_d: Cplx<T> },
    /// Ω_c = Ω_0 cos(πz/2), Ω_d = Ω_0 sin(πz/2).
    Sincos { omega_0: T },
    /// Two Gaussians of common 1/e field half-width `width`, centred at
    /// `center_c` and `center_d` (all in units of L).
    GaussianPair {
        omega_c_peak: T,
        omega_d_peak: T,
        center_c: T,
        center_d: T,
        width: T,
    },
    Tabulated(TabulatedProfile<T>),
    /// Another profile with the coupling and driving roles exchanged.
    Swapped(Box<ControlProfile<T>>),
}

impl<T: Real> ControlProfile<T> {
    pub fn uniform(omega_c: T, omega_d: T) -> Self {
        ControlProfile::Uniform {
            omega_c: cplx(omega_c),
            omega_d: cplx(omega_d),
        }
    }

    pub fn kind(&self) -> ProfileKind {
        match self {
            ControlProfile::Uniform { .. } => ProfileKind::Uniform,
            ControlProfile::Sincos { .. } => ProfileKind::Sincos,
            ControlProfile::GaussianPair { .. } => ProfileKind::GaussianPair,
            ControlProfile::Tabulated(_) => ProfileKind::CustomTabulated,
            ControlProfile::Swapped(inner) => inner.kind(),
        }
    }

    /// (Ω_c(z), Ω_d(z)).
    #[inline]
    pub fn at(&self, z: T) -> (Cplx<T>, Cplx<T>) {
        match self {
            ControlProfile::Uniform { omega_c, omega_d } => (*omega_c, *omega_d),
            ControlProfile::Sincos { omega_0 } => {
                let phase = T::FRAC_PI_2() * z;
                (cplx(*omega_0 * phase.cos()), cplx(*omega_0 * phase.sin()))
            }
            ControlProfile::GaussianPair {
                omega_c_peak,
                omega_d_peak,
                center_c,
                center_d,
                width,
            } => {
                let g = |center: T| {
                    let u = (z - center) / *width;
                    (-u * u).exp()
                };
                (cplx(*omega_c_peak * g(*center_c)), cplx(*omega_d_peak * g(*center_d)))
            }
            ControlProfile::Tabulated(tab) => tab.at(z),
            ControlProfile::Swapped(inner) => {
                let (c, d) = inner.at(z);
                (d, c)
            }
        }
    }

    /// Ω_tot(z) = √(|Ω_c|² + |Ω_d|²).
    pub fn total(&self, z: T) -> T {
        let (c, d) = self.at(z);
        (c.norm_sqr() + d.norm_sqr()).sqrt()
    }

    /// Checks finiteness and that Ω_tot > 0 at every grid point.
    pub fn check_on(&self, z: &[T]) -> Result<()> {
        for &zi in z {
            let (c, d) = self.at(zi);
            if !is_finite_c(c) || !is_finite_c(d) {
                return Err(Error::InvalidInput(format!(
                    "control profile not finite at z = {zi}"
                )));
            }
            if c.norm_sqr() + d.norm_sqr() <= T::zero() {
                return Err(Error::InvalidInput(format!(
                    "total control strength vanishes at z = {zi}"
                )));
            }
        }
        Ok(())
    }

    /// Exchanges the roles of the coupling and driving fields.
    pub fn swapped(&self) -> Self {
        match self {
            ControlProfile::Swapped(inner) => (**inner).clone(),
            other => ControlProfile::Swapped(Box::new(other.clone())),
        }
    }

    /// Tabulates the profile on `z`.
    pub fn tabulate(&self, z: &[T]) -> (Vec<Cplx<T>>, Vec<Cplx<T>>) {
        z.iter().map(|&zi| self.at(zi)).unzip()
    }
}
