//! Continuous-wave propagation of probe and signal through the medium.
//!
//! With ∂/∂t = 0 the field equations reduce to the complex ODE pair
//! dΩ_p/dz = i(αγ31/2)ρ31, dΩ_s/dz = i(αγ41/2)ρ41 (z in units of L), closed
//! pointwise by [`steady_coherences`]. The pair is integrated with classical
//! fourth-order Runge–Kutta on a fixed grid.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{steady_coherences, to_normal_modes, NormalModes};
use crate::error::{Error, Result};
use crate::num::{cplx, Cplx, Real};
use crate::params::{linspace, FieldState, PhysParams};
use crate::profile::ControlProfile;

pub const DEFAULT_N_Z: usize = 2001;

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadySolver<T> {
    /// Number of grid points on [0, 1].
    pub n_z: usize,
    /// Re-run with half the step and require agreement within `tolerance`.
    pub check_convergence: bool,
    pub tolerance: T,
}

impl<T: Real> Default for SteadySolver<T> {
    fn default() -> Self {
        SteadySolver {
            n_z: DEFAULT_N_Z,
            check_convergence: true,
            tolerance: T::lit(1e-8).max(T::convergence_floor()),
        }
    }
}

/// CW result: z-resolved fields plus end-of-medium figures of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadySolution<T> {
    pub fields: FieldState<T>,
    /// |Ω_p(L)|² / |Ω_p0|².
    pub probe_transmission: T,
    /// |Ω_s(L)|² / |Ω_p0|².
    pub conversion_efficiency: T,
    /// Largest change of T_p or CE under step halving, when checked.
    pub refinement_delta: Option<T>,
}

impl<T: Real> SteadySolution<T> {
    /// Normal-mode decomposition of the propagated fields at every grid point.
    pub fn normal_modes(&self, profile: &ControlProfile<T>) -> Result<Vec<NormalModes<T>>> {
        let f = &self.fields;
        f.z.iter()
            .zip(f.omega_p.iter().zip(&f.omega_s))
            .map(|(&z, (&p, &s))| {
                let (c, d) = profile.at(z);
                to_normal_modes(p, s, c, d)
            })
            .collect()
    }
}

#[inline]
fn field_rhs<T: Real>(
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    z: T,
    p: Cplx<T>,
    s: Cplx<T>,
) -> Result<(Cplx<T>, Cplx<T>)> {
    let (c, d) = profile.at(z);
    let rho = steady_coherences(p, s, c, d, params).map_err(|e| match e {
        Error::Singular { detail, .. } => Error::Singular {
            z: z.to_f64_lossy(),
            detail,
        },
        other => other,
    })?;
    let (kp, ks) = params.couplings();
    let i = Complex::new(T::zero(), T::one());
    Ok((i * rho.rho31 * kp, i * rho.rho41 * ks))
}

/// Integrates the steady-state field equations from the given input
/// amplitudes at z = 0 over an `n_z`-point grid.
pub fn propagate_fields<T: Real>(
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    omega_p0: Cplx<T>,
    omega_s0: Cplx<T>,
    n_z: usize,
) -> Result<FieldState<T>> {
    if n_z < 2 {
        return Err(Error::InvalidInput(format!("n_z must be at least 2, got {n_z}")));
    }
    let z = linspace(T::zero(), T::one(), n_z);
    let h = z[1] - z[0];
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut omega_p = Vec::with_capacity(n_z);
    let mut omega_s = Vec::with_capacity(n_z);
    let (mut p, mut s) = (omega_p0, omega_s0);
    omega_p.push(p);
    omega_s.push(s);
    for k in 0..n_z - 1 {
        let z0 = z[k];
        let zm = z0 + half * h;
        let (k1p, k1s) = field_rhs(profile, params, z0, p, s)?;
        let (k2p, k2s) = field_rhs(profile, params, zm, p + k1p * (half * h), s + k1s * (half * h))?;
        let (k3p, k3s) = field_rhs(profile, params, zm, p + k2p * (half * h), s + k2s * (half * h))?;
        let (k4p, k4s) = field_rhs(profile, params, z[k + 1], p + k3p * h, s + k3s * h)?;
        p += (k1p + (k2p + k3p) * two + k4p) * sixth;
        s += (k1s + (k2s + k3s) * two + k4s) * sixth;
        omega_p.push(p);
        omega_s.push(s);
    }
    FieldState::new(z, omega_p, omega_s)
}

impl<T: Real> SteadySolver<T> {
    pub fn with_n_z(mut self, n_z: usize) -> Self {
        self.n_z = n_z;
        self
    }

    pub fn unchecked(mut self) -> Self {
        self.check_convergence = false;
        self
    }

    /// Propagates a probe of amplitude `omega_p0` with no input signal.
    pub fn solve(
        &self,
        profile: &ControlProfile<T>,
        params: &PhysParams<T>,
        omega_p0: Cplx<T>,
    ) -> Result<SteadySolution<T>> {
        let norm = omega_p0.norm_sqr();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "input probe amplitude must be finite and nonzero, got {omega_p0}"
            )));
        }
        let zero = cplx(T::zero());
        let fields = propagate_fields(profile, params, omega_p0, zero, self.n_z)?;
        let end = |f: &FieldState<T>| {
            let n = f.len() - 1;
            (f.omega_p[n].norm_sqr() / norm, f.omega_s[n].norm_sqr() / norm)
        };
        let (t_p, ce) = end(&fields);
        let refinement_delta = if self.check_convergence {
            let fine = propagate_fields(profile, params, omega_p0, zero, 2 * self.n_z - 1)?;
            let (t_p2, ce2) = end(&fine);
            let (dp, dc) = ((t_p2 - t_p).abs(), (ce2 - ce).abs());
            for (quantity, delta) in [("T_p", dp), ("CE", dc)] {
                if !(delta < self.tolerance) {
                    return Err(Error::NotConverged {
                        quantity,
                        delta: delta.to_f64_lossy(),
                        tolerance: self.tolerance.to_f64_lossy(),
                    });
                }
            }
            Some(dp.max(dc))
        } else {
            None
        };
        Ok(SteadySolution {
            fields,
            probe_transmission: t_p,
            conversion_efficiency: ce,
            refinement_delta,
        })
    }
}

/// Steady-state propagation with the default solver settings.
pub fn integrate_steady<T: Real>(
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    omega_p0: Cplx<T>,
) -> Result<SteadySolution<T>> {
    SteadySolver::default().solve(profile, params, omega_p0)
}

/// One row of an optical-density sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdPoint {
    pub alpha: f64,
    #[serde(rename = "T_p")]
    pub t_p: f64,
    #[serde(rename = "CE")]
    pub ce: f64,
}

/// Runs one CW solution per optical density, in parallel, preserving input order.
pub fn sweep_od<T: Real>(
    alphas: &[T],
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    solver: &SteadySolver<T>,
) -> Result<Vec<OdPoint>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            if !(alpha > T::zero()) {
                return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
            }
            let p = params.with_alpha(alpha);
            let sol = solver.solve(profile, &p, cplx(T::one()))?;
            Ok(OdPoint {
                alpha: alpha.to_f64_lossy(),
                t_p: sol.probe_transmission.to_f64_lossy(),
                ce: sol.conversion_efficiency.to_f64_lossy(),
            })
        })
        .collect()
}
