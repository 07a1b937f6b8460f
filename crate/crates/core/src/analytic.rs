//! Closed-form steady-state solutions (γ21 = 0, γ31 = γ41).
//!
//! For the sine/cosine modulation Ω_c = Ω_0 cos βz, Ω_d = Ω_0 sin βz
//! (β = π/2L) the normal modes obey
//!
//! ```text
//! dΩ_T/dz = β Ω_D,   dΩ_D/dz = −β Ω_T − η Ω_D,   η = α/2L
//! ```
//!
//! with Ω_T(0) = Ω_p0, Ω_D(0) = 0, so
//!
//! ```text
//! Ω_T(z) = Ω_p0 e^{−ηz/2} [cosh κz + (η/2κ) sinh κz]
//! Ω_D(z) = −Ω_p0 (β/κ) e^{−ηz/2} sinh κz,           κ = √((η/2)² − β²)
//! ```
//!
//! At z = L the basis rotation is a quarter turn and |Ω_s(L)| = |Ω_T(L)|,
//! |Ω_p(L)| = |Ω_D(L)|. Inside the medium the probe and signal are the
//! rotated combinations, which is what [`analytic_sincos`] returns.

use num_complex::Complex;

use crate::num::Real;

/// Normal-mode amplitudes for the sincos profile, normalized to Ω_p0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincosModes<T> {
    pub transmission: T,
    pub dissipation: T,
}

/// Ω_T(z), Ω_D(z) for the sincos profile with z ∈ [0, 1].
///
/// κ is carried as a complex number so the same expression covers the
/// over-damped (κ real), critical (κ = 0) and oscillatory (κ imaginary)
/// regimes; the exponentials are combined before multiplying so large
/// optical densities do not overflow.
pub fn sincos_modes<T: Real>(alpha: T, z: T) -> SincosModes<T> {
    let half = T::lit(0.5);
    let beta = T::FRAC_PI_2();
    let a = half * half * alpha; // η/2
    let kappa = Complex::new(a * a - beta * beta, T::zero()).sqrt();
    let kz = kappa * z;
    let decay = (-a * z).exp();
    // C = e^{−az} cosh κz, S = e^{−az} sinh(κz)/κ
    let (c, s) = if kz.norm() < T::lit(1e-2) {
        let k2 = kz * kz;
        let c = (Complex::new(T::one(), T::zero()) + k2 * half + k2 * k2 / T::lit(24.0)) * decay;
        let s = (Complex::new(T::one(), T::zero()) + k2 / T::lit(6.0) + k2 * k2 / T::lit(120.0))
            * (decay * z);
        (c, s)
    } else {
        let grow = (kappa - a) * z;
        let fall = -(kappa + a) * z;
        let (eg, ef) = (grow.exp(), fall.exp());
        ((eg + ef) * half, (eg - ef) / (kappa * T::lit(2.0)))
    };
    SincosModes {
        transmission: (c + s * a).re,
        dissipation: -(s * beta).re,
    }
}

/// (|Ω_p(z)|², |Ω_s(z)|²) for the sincos profile, normalized to |Ω_p0|² = 1.
pub fn analytic_sincos<T: Real>(alpha: T, z: T) -> (T, T) {
    let m = sincos_modes(alpha, z);
    let phase = T::FRAC_PI_2() * z;
    let (cs, sn) = (phase.cos(), phase.sin());
    let p = cs * m.transmission - sn * m.dissipation;
    let s = sn * m.transmission + cs * m.dissipation;
    (p * p, s * s)
}

/// (|Ω_D(z)|², |Ω_T(z)|²): the textbook hyperbolic expressions, which equal
/// the probe and signal intensities at the trailing end z = 1.
pub fn sincos_mode_intensities<T: Real>(alpha: T, z: T) -> (T, T) {
    let m = sincos_modes(alpha, z);
    (m.dissipation * m.dissipation, m.transmission * m.transmission)
}

/// Large-OD limit at z = L: (π²/α²·(1 − e^{−α/2})², 1 − π²/α).
pub fn sincos_large_od<T: Real>(alpha: T) -> (T, T) {
    let pi2 = T::PI() * T::PI();
    let g = T::one() - (-alpha * T::lit(0.5)).exp();
    (pi2 / (alpha * alpha) * g * g, T::one() - pi2 / alpha)
}

/// Uniform equal controls: normal modes and fields normalized to Ω_p0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSolution<T> {
    pub omega_t: T,
    pub omega_d: T,
    pub omega_p: T,
    pub omega_s: T,
}

/// Ω_T = 1/√2, Ω_D = −e^{−αz/2}/√2, Ω_p = (1 + e^{−αz/2})/2, Ω_s = (1 − e^{−αz/2})/2.
pub fn uniform_closed_form<T: Real>(alpha: T, z: T) -> UniformSolution<T> {
    let half = T::lit(0.5);
    let e = (-alpha * z * half).exp();
    UniformSolution {
        omega_t: T::FRAC_1_SQRT_2(),
        omega_d: -T::FRAC_1_SQRT_2() * e,
        omega_p: half * (T::one() + e),
        omega_s: half * (T::one() - e),
    }
}

/// CE = ¼(1 − e^{−α/2})², approaching the 25% limit from below.
pub fn uniform_ce<T: Real>(alpha: T) -> T {
    let s = uniform_closed_form(alpha, T::one()).omega_s;
    s * s
}

/// Narrowband EIT group delay τ = αγ31/|Ω_c|² in units of 1/Γ.
pub fn eit_group_delay<T: Real>(alpha: T, omega_c: T, gamma31: T) -> T {
    alpha * gamma31 / (omega_c * omega_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn od19_end_values() {
        let (p, s) = analytic_sincos(19.0f64, 1.0);
        assert!((p - 0.0180).abs() < 5e-5, "{p}");
        assert!((s - 0.62142).abs() < 5e-5, "{s}");
        let kappa = (4.75f64 * 4.75 - std::f64::consts::FRAC_PI_2.powi(2)).sqrt();
        assert!((kappa - 4.4828).abs() < 1e-4);
        // direct transcription of the hyperbolic forms
        let e = (-9.5f64).exp();
        let beta = std::f64::consts::FRAC_PI_2;
        let p_direct = beta * beta / (kappa * kappa) * kappa.sinh().powi(2) * e;
        let s_direct = (kappa.cosh() + 4.75 / kappa * kappa.sinh()).powi(2) * e;
        assert!((p - p_direct).abs() < 1e-14);
        assert!((s - s_direct).abs() < 1e-13);
    }

    #[test]
    fn od240_headline() {
        let (p, s) = analytic_sincos(240.0f64, 1.0);
        assert!((s - 0.9601).abs() < 1e-4, "{s}");
        assert!((p - 1.65e-4).abs() < 1e-6, "{p}");
        let (_, s16) = sincos_large_od(240.0f64);
        assert!((s16 - 0.95888).abs() < 1e-5);
        assert!((s - s16).abs() / s < 2e-3);
    }

    #[test]
    fn boundary_values() {
        let (p, s) = analytic_sincos(19.0f64, 0.0);
        assert_eq!((p, s), (1.0, 0.0));
        // the hyperbolic signal expression is |Ω_T|², which starts at one
        let (d, t) = sincos_mode_intensities(19.0f64, 0.0);
        assert_eq!((d, t), (0.0, 1.0));
    }

    #[test]
    fn mode_intensities_match_fields_at_trailing_end() {
        for alpha in [0.5, 3.0, 6.0, 19.0, 120.0] {
            let (p, s) = analytic_sincos(alpha, 1.0f64);
            let (d, t) = sincos_mode_intensities(alpha, 1.0f64);
            assert!((p - d).abs() < 1e-15 && (s - t).abs() < 1e-15);
        }
    }

    #[test]
    fn continuous_across_critical_damping() {
        let crit = 2.0 * std::f64::consts::PI; // η/2 = β
        for z in [0.3, 1.0] {
            let m0 = sincos_modes(crit, z);
            for d in [1e-9, 1e-6, 1e-4] {
                for a in [crit - d, crit + d] {
                    let m = sincos_modes(a, z);
                    assert!((m.transmission - m0.transmission).abs() < 10.0 * d);
                    assert!((m.dissipation - m0.dissipation).abs() < 10.0 * d);
                }
            }
        }
    }

    #[test]
    fn lossless_limit_rotates_fully() {
        // α → 0: Ω_T = cos βz, Ω_D = −sin βz, so the probe is never converted.
        let (p, s) = analytic_sincos(1e-12f64, 1.0);
        assert!((p - 1.0).abs() < 1e-9 && s < 1e-9);
    }

    #[test]
    fn no_overflow_at_large_od() {
        let (p, s) = analytic_sincos(5000.0f64, 1.0);
        assert!(p.is_finite() && s.is_finite());
        assert!((s - (1.0 - std::f64::consts::PI.powi(2) / 5000.0)).abs() < 1e-5);
        let (p32, s32) = analytic_sincos(240.0f32, 1.0);
        assert!((s32 - 0.9601).abs() < 1e-4 && p32 > 0.0);
    }

    #[test]
    fn uniform_values() {
        let u = uniform_closed_form(19.0f64, 0.0);
        assert_eq!((u.omega_p, u.omega_s), (1.0, 0.0));
        let u = uniform_closed_form(19.0f64, 1.0);
        assert!((u.omega_d + 5.29e-5).abs() < 1e-7, "{}", u.omega_d);
        assert!((uniform_ce(1e4f64) - 0.25).abs() < 1e-15);
        assert!(uniform_ce(19.0f64) < 0.25);
        // e^{−50} is below half an ulp of one
        assert!(uniform_ce(100.0f64) <= 0.25);
    }

    #[test]
    fn eit_delay_at_fig5a() {
        let tau = eit_group_delay(19.0f64, 0.26, 1.25);
        assert!((tau - 351.33).abs() < 0.01);
        let us = tau / (2.0 * std::f64::consts::PI * 6e6) * 1e6;
        assert!((us - 9.32).abs() < 0.01);
    }
}
