//! Resonant double-Λ optical Bloch equations to first order in the probe and
//! signal fields, and the transmission/dissipation normal-mode basis.
//!
//! With ρ11 = 1 the coherences obey
//!
//! ```text
//! dρ41/dt = i/2 Ω_s + i/2 Ω_d ρ21 − γ41/2 ρ41
//! dρ31/dt = i/2 Ω_p + i/2 Ω_c ρ21 − γ31/2 ρ31
//! dρ21/dt = i/2 Ω_c* ρ31 + i/2 Ω_d* ρ41 − γ21/2 ρ21
//! ```

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::{is_finite_c, Cplx, Real};
use crate::params::{CoherenceState, PhysParams};

fn i_unit<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::one())
}

/// Time derivative of the coherences for the given instantaneous fields.
#[inline]
pub fn bloch_rhs<T: Real>(
    rho: &CoherenceState<T>,
    omega_p: Cplx<T>,
    omega_s: Cplx<T>,
    omega_c: Cplx<T>,
    omega_d: Cplx<T>,
    params: &PhysParams<T>,
) -> CoherenceState<T> {
    let half = T::lit(0.5);
    let ih = Complex::new(T::zero(), half);
    CoherenceState {
        rho41: ih * (omega_s + omega_d * rho.rho21) - rho.rho41 * (half * params.gamma41),
        rho31: ih * (omega_p + omega_c * rho.rho21) - rho.rho31 * (half * params.gamma31),
        rho21: ih * (omega_c.conj() * rho.rho31 + omega_d.conj() * rho.rho41)
            - rho.rho21 * (half * params.gamma21),
    }
}

/// Steady-state coherences: the unique solution with all time derivatives zero.
///
/// Eliminating ρ31 and ρ41 gives
/// ρ21 = −(Ω_c*Ω_p/γ31 + Ω_d*Ω_s/γ41) / (γ21 + |Ω_c|²/γ31 + |Ω_d|²/γ41).
/// When the denominator vanishes (no controls, γ21 = 0) the numerator vanishes
/// too and the decoupled two-level limit ρ21 = 0 is returned.
#[inline]
pub fn steady_coherences<T: Real>(
    omega_p: Cplx<T>,
    omega_s: Cplx<T>,
    omega_c: Cplx<T>,
    omega_d: Cplx<T>,
    params: &PhysParams<T>,
) -> Result<CoherenceState<T>> {
    let (g31, g41) = (params.gamma31, params.gamma41);
    let denom = params.gamma21 + (omega_c.norm_sqr() / g31 + omega_d.norm_sqr() / g41);
    let rho21 = if denom > T::zero() {
        -(omega_c.conj() * omega_p / g31 + omega_d.conj() * omega_s / g41) / denom
    } else {
        Complex::new(T::zero(), T::zero())
    };
    let i = i_unit::<T>();
    let rho = CoherenceState {
        rho31: i * (omega_p + omega_c * rho21) / g31,
        rho41: i * (omega_s + omega_d * rho21) / g41,
        rho21,
    };
    if !(is_finite_c(rho.rho31) && is_finite_c(rho.rho41) && is_finite_c(rho.rho21)) {
        return Err(Error::Singular {
            z: f64::NAN,
            detail: format!(
                "non-finite coherences for fields p={omega_p}, s={omega_s}, c={omega_c}, d={omega_d}"
            ),
        });
    }
    Ok(rho)
}

/// Transmission-mode and dissipation-mode amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModes<T> {
    pub omega_t: Cplx<T>,
    pub omega_d: Cplx<T>,
    pub omega_tot: T,
}

/// (Ω_T, Ω_D) = (1/Ω_tot)·[[Ω_c*, Ω_d*], [−Ω_d, Ω_c]]·(Ω_p, Ω_s).
pub fn to_normal_modes<T: Real>(
    omega_p: Cplx<T>,
    omega_s: Cplx<T>,
    omega_c: Cplx<T>,
    omega_d: Cplx<T>,
) -> Result<NormalModes<T>> {
    let omega_tot = (omega_c.norm_sqr() + omega_d.norm_sqr()).sqrt();
    if !(omega_tot > T::zero()) {
        return Err(Error::UndefinedBasis);
    }
    Ok(NormalModes {
        omega_t: (omega_c.conj() * omega_p + omega_d.conj() * omega_s) / omega_tot,
        omega_d: (omega_c * omega_s - omega_d * omega_p) / omega_tot,
        omega_tot,
    })
}

/// Inverse transform (conjugate transpose): returns (Ω_p, Ω_s).
pub fn from_normal_modes<T: Real>(
    modes: &NormalModes<T>,
    omega_c: Cplx<T>,
    omega_d: Cplx<T>,
) -> Result<(Cplx<T>, Cplx<T>)> {
    let omega_tot = (omega_c.norm_sqr() + omega_d.norm_sqr()).sqrt();
    if !(omega_tot > T::zero()) {
        return Err(Error::UndefinedBasis);
    }
    let p = (omega_c * modes.omega_t - omega_d.conj() * modes.omega_d) / omega_tot;
    let s = (omega_d * modes.omega_t + omega_c.conj() * modes.omega_d) / omega_tot;
    Ok((p, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    /// Solves the 3×3 steady-state system by Cramer's rule. Rows are the
    /// right-hand sides of the Bloch equations multiplied by 2, unknowns
    /// ordered (ρ31, ρ41, ρ21).
    fn cramer(p: C, s: C, oc: C, od: C, g31: f64, g41: f64, g21: f64) -> [C; 3] {
        let i = C::i();
        let a = [
            [c(-g31), c(0.0), i * oc],
            [c(0.0), c(-g41), i * od],
            [i * oc.conj(), i * od.conj(), c(-g21)],
        ];
        let b = [-i * p, -i * s, c(0.0)];
        let det = |m: &[[C; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(&a);
        let mut out = [c(0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut m = a;
            for r in 0..3 {
                m[r][k] = b[r];
            }
            *slot = det(&m) / d;
        }
        out
    }

    fn relax(p: C, s: C, oc: C, od: C, params: &PhysParams<f64>, t_end: f64, dt: f64) -> CoherenceState<f64> {
        let mut rho = CoherenceState::zero();
        let n = (t_end / dt).round() as usize;
        for _ in 0..n {
            let k1 = bloch_rhs(&rho, p, s, oc, od, params);
            let k2 = bloch_rhs(&rho.axpy(dt / 2.0, &k1), p, s, oc, od, params);
            let k3 = bloch_rhs(&rho.axpy(dt / 2.0, &k2), p, s, oc, od, params);
            let k4 = bloch_rhs(&rho.axpy(dt, &k3), p, s, oc, od, params);
            rho = CoherenceState {
                rho31: rho.rho31 + (k1.rho31 + (k2.rho31 + k3.rho31) * 2.0 + k4.rho31) * (dt / 6.0),
                rho41: rho.rho41 + (k1.rho41 + (k2.rho41 + k3.rho41) * 2.0 + k4.rho41) * (dt / 6.0),
                rho21: rho.rho21 + (k1.rho21 + (k2.rho21 + k3.rho21) * 2.0 + k4.rho21) * (dt / 6.0),
            };
        }
        rho
    }

    #[test]
    fn eit_dark_state() {
        let params = PhysParams::new(19.0, 1.25, 1.25, 0.0).unwrap();
        let r = steady_coherences(c(0.01), c(0.0), c(0.26), c(0.0), &params).unwrap();
        assert!(r.rho31.norm() < 1e-18);
        assert!((r.rho21 - c(-0.01 / 0.26)).norm() < 1e-16);
        assert!((r.rho21.re + 0.03846).abs() < 1e-5);
    }

    #[test]
    fn decoupled_two_level_response() {
        for g21 in [0.0, 1e-3, 0.3] {
            let params = PhysParams::new(19.0, 1.25, 1.25, g21).unwrap();
            let r = steady_coherences(c(0.01), c(0.005), c(0.0), c(0.0), &params).unwrap();
            assert!((r.rho31 - C::new(0.0, 0.008)).norm() < 1e-16);
            assert!((r.rho41 - C::new(0.0, 0.004)).norm() < 1e-16);
            assert_eq!(r.rho21, c(0.0));
        }
    }

    #[test]
    fn matches_cramer_and_relaxation() {
        let params = PhysParams::new(19.0, 1.25, 1.25, 8e-4).unwrap();
        let (p, s, oc, od) = (c(0.01), c(0.002), c(0.39), c(0.41));
        let r = steady_coherences(p, s, oc, od, &params).unwrap();
        let k = cramer(p, s, oc, od, 1.25, 1.25, 8e-4);
        assert!((r.rho31 - k[0]).norm() < 1e-12);
        assert!((r.rho41 - k[1]).norm() < 1e-12);
        assert!((r.rho21 - k[2]).norm() < 1e-12);

        // slowest eigenvalue ≈ γ21/2 + (Ω_tot²/γ)/2 ≈ 0.13; 400/Γ is ~50 e-folds
        let relaxed = relax(p, s, oc, od, &params, 400.0, 0.05);
        assert!((relaxed.rho31 - r.rho31).norm() < 1e-9);
        assert!((relaxed.rho41 - r.rho41).norm() < 1e-9);
        assert!((relaxed.rho21 - r.rho21).norm() < 1e-9);
    }

    #[test]
    fn asymmetric_decay_matches_cramer() {
        let params = PhysParams::new(5.0, 1.1, 1.7, 3e-3).unwrap();
        let (p, s, oc, od) = (C::new(0.01, -0.003), C::new(0.002, 0.004), C::new(0.2, 0.1), C::new(-0.3, 0.25));
        let r = steady_coherences(p, s, oc, od, &params).unwrap();
        let k = cramer(p, s, oc, od, 1.1, 1.7, 3e-3);
        assert!((r.rho31 - k[0]).norm() < 1e-14);
        assert!((r.rho41 - k[1]).norm() < 1e-14);
        assert!((r.rho21 - k[2]).norm() < 1e-14);
    }

    #[test]
    fn rhs_vanishes_at_steady_state() {
        let params = PhysParams::new(19.0, 1.25, 1.4, 1e-3).unwrap();
        let (p, s, oc, od) = (c(0.01), c(0.002), C::new(0.3, 0.1), c(0.41));
        let r = steady_coherences(p, s, oc, od, &params).unwrap();
        let d = bloch_rhs(&r, p, s, oc, od, &params);
        assert!(d.max_magnitude() < 1e-16);
    }

    #[test]
    fn non_finite_input_is_singular() {
        let params = PhysParams::new(19.0, 1.25, 1.25, 0.0).unwrap();
        let e = steady_coherences(c(f64::NAN), c(0.0), c(0.3), c(0.0), &params).unwrap_err();
        assert!(matches!(e, Error::Singular { .. }));
    }

    #[test]
    fn balanced_fields_have_no_dissipation_mode() {
        // Ω_p Ω_d = Ω_s Ω_c
        let (oc, od) = (C::new(0.3, 0.1), C::new(0.2, -0.05));
        let p = C::new(0.7, 0.2);
        let s = p * od / oc;
        let m = to_normal_modes(p, s, oc, od).unwrap();
        assert!(m.omega_d.norm() < 1e-15);
    }

    #[test]
    fn identity_basis_without_driving() {
        let (p, s) = (C::new(0.7, 0.2), C::new(-0.1, 0.3));
        let m = to_normal_modes(p, s, c(0.26), c(0.0)).unwrap();
        assert!((m.omega_t - p).norm() < 1e-16);
        assert!((m.omega_d - s).norm() < 1e-16);
    }

    #[test]
    fn zero_controls_have_no_basis() {
        assert!(matches!(
            to_normal_modes(c(1.0), c(0.0), c(0.0), c(0.0)),
            Err(Error::UndefinedBasis)
        ));
    }

    fn arb_c() -> impl Strategy<Value = C> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C::new(re, im))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normal_mode_transform_is_unitary(p in arb_c(), s in arb_c(), oc in arb_c(), od in arb_c()) {
            prop_assume!(oc.norm_sqr() + od.norm_sqr() > 1e-6);
            let m = to_normal_modes(p, s, oc, od).unwrap();
            let before = p.norm_sqr() + s.norm_sqr();
            let after = m.omega_t.norm_sqr() + m.omega_d.norm_sqr();
            prop_assert!((after - before).abs() <= 1e-12 * before.max(1e-300));
            let (p2, s2) = from_normal_modes(&m, oc, od).unwrap();
            prop_assert!((p2 - p).norm() < 1e-14 && (s2 - s).norm() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn steady_response_is_linear(
            p1 in arb_c(), s1 in arb_c(), p2 in arb_c(), s2 in arb_c(),
            oc in arb_c(), od in arb_c(), a in -2.0f64..2.0, g21 in 0.0f64..1e-2,
        ) {
            let params = PhysParams::new(19.0, 1.25, 1.25, g21).unwrap();
            let r1 = steady_coherences(p1, s1, oc, od, &params).unwrap();
            let r2 = steady_coherences(p2, s2, oc, od, &params).unwrap();
            let r = steady_coherences(p1 * a + p2, s1 * a + s2, oc, od, &params).unwrap();
            let scale = 1.0 + r1.max_magnitude() + r2.max_magnitude();
            prop_assert!((r.rho31 - (r1.rho31 * a + r2.rho31)).norm() < 1e-12 * scale);
            prop_assert!((r.rho41 - (r1.rho41 * a + r2.rho41)).norm() < 1e-12 * scale);
            prop_assert!((r.rho21 - (r1.rho21 * a + r2.rho21)).norm() < 1e-12 * scale);
        }

        #[test]
        fn swapping_transitions_swaps_coherences(
            p in arb_c(), s in arb_c(), oc in arb_c(), od in arb_c(),
            g31 in 0.5f64..2.0, g41 in 0.5f64..2.0, g21 in 0.0f64..1e-2,
        ) {
            let a = PhysParams::new(19.0, g31, g41, g21).unwrap();
            let b = PhysParams::new(19.0, g41, g31, g21).unwrap();
            let r = steady_coherences(p, s, oc, od, &a).unwrap();
            let w = steady_coherences(s, p, od, oc, &b).unwrap();
            prop_assert_eq!(r.rho31, w.rho41);
            prop_assert_eq!(r.rho41, w.rho31);
            prop_assert_eq!(r.rho21, w.rho21);
        }
    }
}
