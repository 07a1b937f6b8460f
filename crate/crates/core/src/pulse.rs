//! Time-domain propagation of probe and signal pulses.
//!
//! The field equations are solved in the retarded frame with the vacuum
//! transit time neglected, so ∂Ω/∂z depends only on the local coherence
//! trace at the same z. Marching z outward with fourth-order Runge–Kutta,
//! every stage integrates the Bloch equations over the whole time grid
//! (again RK4, drive linearly interpolated at half steps) starting from
//! ρ = 0 before the pulse arrives.

use num_complex::Complex;
use serde::Serialize;

use crate::bloch::bloch_rhs;
use crate::error::{Error, Result};
use crate::num::{is_finite_c, Cplx, Real};
use crate::params::{strictly_increasing, CoherenceState, Grids, PhysParams};
use crate::profile::ControlProfile;

/// Minimum number of z points for pulse runs.
pub const MIN_Z_POINTS: usize = 500;
/// Minimum number of time samples per pulse FWHM.
pub const MIN_POINTS_PER_FWHM: f64 = 40.0;
/// Bound on dt·(γ_max + Ω_tot,max)/2 for the Bloch stepper.
pub const MAX_BLOCH_STEP: f64 = 1.0;
/// Coherence magnitude beyond which first-order perturbation is not trusted.
pub const MAX_COHERENCE: f64 = 0.5;
/// Window edges must sit below this fraction of the peak intensity.
pub const TAIL_FRACTION: f64 = 1e-4;

/// Default input pulse: intensity FWHM in units of 1/Γ (≈ 53 µs at Γ = 2π·6 MHz).
pub const DEFAULT_FWHM: f64 = 2000.0;
pub const DEFAULT_PEAK: f64 = 0.01;

/// Incident probe pulse Ω_p(0, t).
#[derive(Debug, Clone, PartialEq)]
pub enum PulseSpec<T> {
    /// peak·exp(−2 ln2 (t − t0)²/fwhm²): Gaussian with intensity FWHM `fwhm`.
    Gaussian { peak: T, t0: T, fwhm: T },
    /// Samples linearly interpolated onto the simulation grid, zero outside.
    Tabulated { t: Vec<T>, amplitude: Vec<Cplx<T>> },
}

impl<T: Real> PulseSpec<T> {
    pub fn gaussian(peak: T, t0: T, fwhm: T) -> Result<Self> {
        let p = PulseSpec::Gaussian { peak, t0, fwhm };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            PulseSpec::Gaussian { peak, t0, fwhm } => {
                if !(*fwhm > T::zero()) || !fwhm.is_finite() {
                    return Err(Error::InvalidInput(format!("pulse fwhm must be positive, got {fwhm}")));
                }
                if !peak.is_finite() || !t0.is_finite() {
                    return Err(Error::InvalidInput("pulse peak and t0 must be finite".into()));
                }
            }
            PulseSpec::Tabulated { t, amplitude } => {
                if t.len() < 2 || t.len() != amplitude.len() {
                    return Err(Error::InvalidInput("tabulated pulse needs matching t and amplitude arrays".into()));
                }
                if !strictly_increasing(t) {
                    return Err(Error::InvalidInput("tabulated pulse t must be strictly increasing".into()));
                }
                if !amplitude.iter().all(|a| is_finite_c(*a)) {
                    return Err(Error::InvalidInput("tabulated pulse must be finite".into()));
                }
                if !(self.fwhm() > T::zero()) && amplitude.iter().any(|a| a.norm_sqr() > T::zero()) {
                    return Err(Error::InvalidInput("tabulated pulse has no resolvable width".into()));
                }
            }
        }
        Ok(())
    }

    /// Intensity full width at half maximum.
    pub fn fwhm(&self) -> T {
        match self {
            PulseSpec::Gaussian { fwhm, .. } => *fwhm,
            PulseSpec::Tabulated { t, amplitude } => {
                let intensity: Vec<T> = amplitude.iter().map(|a| a.norm_sqr()).collect();
                let peak = intensity.iter().cloned().fold(T::zero(), T::max);
                if !(peak > T::zero()) {
                    return T::zero();
                }
                let half = peak * T::lit(0.5);
                let first = intensity.iter().position(|&v| v >= half).unwrap();
                let last = intensity.iter().rposition(|&v| v >= half).unwrap();
                let cross = |i: usize, j: usize| {
                    let (a, b) = (intensity[i], intensity[j]);
                    t[i] + (t[j] - t[i]) * (half - a) / (b - a)
                };
                let lo = if first == 0 { t[0] } else { cross(first - 1, first) };
                let hi = if last + 1 == t.len() { t[last] } else { cross(last, last + 1) };
                hi - lo
            }
        }
    }

    /// Ω_p(0, t) on the given time grid.
    pub fn sample(&self, grid: &[T]) -> Vec<Cplx<T>> {
        match self {
            PulseSpec::Gaussian { peak, t0, fwhm } => {
                let k = T::lit(2.0) * T::LN_2() / (*fwhm * *fwhm);
                grid.iter()
                    .map(|&t| {
                        let u = t - *t0;
                        Complex::new(*peak * (-k * u * u).exp(), T::zero())
                    })
                    .collect()
            }
            PulseSpec::Tabulated { t, amplitude } => grid
                .iter()
                .map(|&x| {
                    if x < t[0] || x > *t.last().unwrap() {
                        return Complex::new(T::zero(), T::zero());
                    }
                    let i = t.partition_point(|&v| v <= x).clamp(1, t.len() - 1) - 1;
                    let w = (x - t[i]) / (t[i + 1] - t[i]);
                    amplitude[i] + (amplitude[i + 1] - amplitude[i]) * w
                })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        match self {
            PulseSpec::Gaussian { peak, t0, fwhm } => PulseSpec::Gaussian {
                peak: *peak * factor,
                t0: *t0,
                fwhm: *fwhm,
            },
            PulseSpec::Tabulated { t, amplitude } => PulseSpec::Tabulated {
                t: t.clone(),
                amplitude: amplitude.iter().map(|a| *a * factor).collect(),
            },
        }
    }
}

/// Energy transmissions and centroid delays of a pulse run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseMetrics<T> {
    #[serde(rename = "T_p")]
    pub t_p: T,
    #[serde(rename = "T_s")]
    pub t_s: T,
    /// Output centroid minus input centroid, units of 1/Γ; `None` when the
    /// trace carries no energy.
    pub delay_p: Option<T>,
    pub delay_s: Option<T>,
    /// A trace does not decay below the tail threshold at the window edges.
    pub clipped: bool,
}

impl<T: Real> PulseMetrics<T> {
    pub fn delay_p_seconds(&self, params: &PhysParams<T>) -> Option<T> {
        self.delay_p.map(|d| params.to_seconds(d))
    }

    pub fn delay_s_seconds(&self, params: &PhysParams<T>) -> Option<T> {
        self.delay_s.map(|d| params.to_seconds(d))
    }
}

/// Input and output traces of a pulse run.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResult<T> {
    pub t: Vec<T>,
    pub input: Vec<Cplx<T>>,
    pub probe_out: Vec<Cplx<T>>,
    pub signal_out: Vec<Cplx<T>>,
    pub metrics: PulseMetrics<T>,
    /// Largest coherence magnitude met anywhere in the medium.
    pub max_coherence: T,
}

impl<T: Real> PulseResult<T> {
    pub fn probe_out_intensity(&self) -> Vec<T> {
        self.probe_out.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn signal_out_intensity(&self) -> Vec<T> {
        self.signal_out.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// (∫|Ω|² dt, ∫t|Ω|² dt) by the trapezoidal rule.
fn moments<T: Real>(t: &[T], trace: &[Cplx<T>]) -> (T, T) {
    let half = T::lit(0.5);
    let mut e = T::zero();
    let mut m = T::zero();
    for k in 0..t.len().saturating_sub(1) {
        let dt = t[k + 1] - t[k];
        let (a, b) = (trace[k].norm_sqr(), trace[k + 1].norm_sqr());
        e += half * dt * (a + b);
        m += half * dt * (t[k] * a + t[k + 1] * b);
    }
    (e, m)
}

fn peak_intensity<T: Real>(trace: &[Cplx<T>]) -> T {
    trace.iter().map(|v| v.norm_sqr()).fold(T::zero(), T::max)
}

/// Edge intensity above `TAIL_FRACTION` of the reference peak. Outputs are
/// judged against the input peak so strongly absorbed traces are not flagged
/// for residue far below anything that matters.
fn clipped<T: Real>(trace: &[Cplx<T>], reference: T) -> bool {
    if !(reference > T::zero()) {
        return false;
    }
    let limit = reference * T::lit(TAIL_FRACTION);
    trace[0].norm_sqr() > limit || trace[trace.len() - 1].norm_sqr() > limit
}

/// Energy transmissions ∫|Ω(L,t)|²dt / ∫|Ω_p(0,t)|²dt and centroid delays.
pub fn pulse_metrics<T: Real>(
    t: &[T],
    input: &[Cplx<T>],
    probe_out: &[Cplx<T>],
    signal_out: &[Cplx<T>],
) -> Result<PulseMetrics<T>> {
    let n = t.len();
    if n < 2 || input.len() != n || probe_out.len() != n || signal_out.len() != n {
        return Err(Error::InvalidInput("pulse traces must match the time grid".into()));
    }
    let (e_in, m_in) = moments(t, input);
    let (e_p, m_p) = moments(t, probe_out);
    let (e_s, m_s) = moments(t, signal_out);
    let reference = peak_intensity(input);
    let clip = clipped(input, reference) || clipped(probe_out, reference) || clipped(signal_out, reference);
    if clip {
        log::warn!("pulse trace does not decay below {TAIL_FRACTION:e} of its peak at the window edges");
    }
    if !(e_in > T::zero()) {
        return Ok(PulseMetrics {
            t_p: T::zero(),
            t_s: T::zero(),
            delay_p: None,
            delay_s: None,
            clipped: clip,
        });
    }
    let c_in = m_in / e_in;
    let delay = |e: T, m: T| if e > T::zero() { Some(m / e - c_in) } else { None };
    Ok(PulseMetrics {
        t_p: e_p / e_in,
        t_s: e_s / e_in,
        delay_p: delay(e_p, m_p),
        delay_s: delay(e_s, m_s),
        clipped: clip,
    })
}

/// Local Bloch response along the time grid at fixed controls.
///
/// Writes i(αγ31/2)ρ31(t) and i(αγ41/2)ρ41(t) into `dp`, `ds` and returns
/// the largest coherence magnitude.
#[allow(clippy::too_many_arguments)]
fn local_response<T: Real>(
    params: &PhysParams<T>,
    omega_c: Cplx<T>,
    omega_d: Cplx<T>,
    dt: T,
    p: &[Cplx<T>],
    s: &[Cplx<T>],
    dp: &mut [Cplx<T>],
    ds: &mut [Cplx<T>],
) -> T {
    let (kp, ks) = params.couplings();
    let ikp = Complex::new(T::zero(), kp);
    let iks = Complex::new(T::zero(), ks);
    let half = T::lit(0.5);
    let h2 = dt * half;
    let h6 = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut rho = CoherenceState::zero();
    let mut max = T::zero();
    dp[0] = ikp * rho.rho31;
    ds[0] = iks * rho.rho41;
    for j in 0..p.len() - 1 {
        let (p0, s0) = (p[j], s[j]);
        let (p1, s1) = (p[j + 1], s[j + 1]);
        let (pm, sm) = ((p0 + p1) * half, (s0 + s1) * half);
        let k1 = bloch_rhs(&rho, p0, s0, omega_c, omega_d, params);
        let k2 = bloch_rhs(&rho.axpy(h2, &k1), pm, sm, omega_c, omega_d, params);
        let k3 = bloch_rhs(&rho.axpy(h2, &k2), pm, sm, omega_c, omega_d, params);
        let k4 = bloch_rhs(&rho.axpy(dt, &k3), p1, s1, omega_c, omega_d, params);
        rho = CoherenceState {
            rho31: rho.rho31 + (k1.rho31 + (k2.rho31 + k3.rho31) * two + k4.rho31) * h6,
            rho41: rho.rho41 + (k1.rho41 + (k2.rho41 + k3.rho41) * two + k4.rho41) * h6,
            rho21: rho.rho21 + (k1.rho21 + (k2.rho21 + k3.rho21) * two + k4.rho21) * h6,
        };
        let m = rho.max_magnitude();
        if m > max {
            max = m;
        }
        dp[j + 1] = ikp * rho.rho31;
        ds[j + 1] = iks * rho.rho41;
    }
    max
}

fn check_resolution<T: Real>(
    pulse: &PulseSpec<T>,
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    grids: &Grids<T>,
) -> Result<()> {
    let t = grids
        .t
        .as_ref()
        .ok_or_else(|| Error::Resolution("pulse runs need a time grid".into()))?;
    if grids.z.len() < MIN_Z_POINTS {
        return Err(Error::Resolution(format!(
            "{} z points; at least {MIN_Z_POINTS} required",
            grids.z.len()
        )));
    }
    let dt = t[1] - t[0];
    let fwhm = pulse.fwhm();
    if fwhm > T::zero() && fwhm / dt < T::lit(MIN_POINTS_PER_FWHM) {
        return Err(Error::Resolution(format!(
            "{:.1} time points per FWHM; at least {MIN_POINTS_PER_FWHM} required",
            (fwhm / dt).to_f64_lossy()
        )));
    }
    let omega_max = grids.z.iter().map(|&z| profile.total(z)).fold(T::zero(), T::max);
    let rate = params.gamma31.max(params.gamma41) + omega_max;
    if dt * rate * T::lit(0.5) > T::lit(MAX_BLOCH_STEP) {
        return Err(Error::Resolution(format!(
            "time step {dt} too coarse for Bloch rates (gamma + Omega_tot = {rate})"
        )));
    }
    Ok(())
}

/// Propagates `pulse` through the medium described by `profile`.
///
/// The input signal is zero. `grids` must carry a time axis; the z grid
/// step sets the field integrator step.
pub fn simulate_pulse<T: Real>(
    pulse: &PulseSpec<T>,
    profile: &ControlProfile<T>,
    params: &PhysParams<T>,
    grids: &Grids<T>,
) -> Result<PulseResult<T>> {
    pulse.check()?;
    check_resolution(pulse, profile, params, grids)?;
    let t = grids.t.as_ref().unwrap();
    let dt = t[1] - t[0];
    let n_t = t.len();
    let zero = Complex::new(T::zero(), T::zero());
    let input = pulse.sample(t);

    let mut p = input.clone();
    let mut s = vec![zero; n_t];
    // stage buffers: K1..K4 for probe and signal, plus trial fields
    let mut kp = vec![vec![zero; n_t]; 4];
    let mut ks = vec![vec![zero; n_t]; 4];
    let mut tp = vec![zero; n_t];
    let mut ts = vec![zero; n_t];
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut max_coherence = T::zero();

    let z = &grids.z;
    for k in 0..z.len() - 1 {
        let h = z[k + 1] - z[k];
        let zs = [z[k], z[k] + half * h, z[k] + half * h, z[k + 1]];
        let weights = [T::zero(), half * h, half * h, h];
        for stage in 0..4 {
            let (trial_p, trial_s): (&[Cplx<T>], &[Cplx<T>]) = if stage == 0 {
                (&p, &s)
            } else {
                let w = weights[stage];
                for j in 0..n_t {
                    tp[j] = p[j] + kp[stage - 1][j] * w;
                    ts[j] = s[j] + ks[stage - 1][j] * w;
                }
                (&tp, &ts)
            };
            let (c, d) = profile.at(zs[stage]);
            let m = local_response(params, c, d, dt, trial_p, trial_s, &mut kp[stage], &mut ks[stage]);
            if m > max_coherence {
                max_coherence = m;
            }
            if m > T::lit(MAX_COHERENCE) || !m.is_finite() {
                return Err(Error::Perturbative {
                    max_coherence: m.to_f64_lossy(),
                    z: zs[stage].to_f64_lossy(),
                });
            }
        }
        let h6 = h / T::lit(6.0);
        for j in 0..n_t {
            p[j] += (kp[0][j] + (kp[1][j] + kp[2][j]) * two + kp[3][j]) * h6;
            s[j] += (ks[0][j] + (ks[1][j] + ks[2][j]) * two + ks[3][j]) * h6;
        }
    }

    let metrics = pulse_metrics(t, &input, &p, &s)?;
    Ok(PulseResult {
        t: t.clone(),
        input,
        probe_out: p,
        signal_out: s,
        metrics,
        max_coherence,
    })
}
