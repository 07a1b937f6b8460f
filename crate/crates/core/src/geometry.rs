//! Control-field profiles from beam geometry and transverse ray averaging.
//!
//! The control beams cross the probe at angle θ, so their transverse
//! Gaussian shape along w maps onto z with width w_z = w_0/sin θ. The
//! coupling beam is displaced upstream and the driving beam downstream by
//! ΔS/sin θ. A probe ray at transverse offset x crosses both beams shifted
//! by x/tan θ along z.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{cplx, Real};
use crate::params::{Grids, PhysParams};
use crate::profile::ControlProfile;
use crate::pulse::{simulate_pulse, PulseSpec};
use crate::steady::SteadySolver;

pub const DEFAULT_N_RAYS: usize = 41;
/// Rays span ±RAY_SPAN probe waists.
pub const RAY_SPAN: f64 = 2.0;
/// A beam whose peak sits more than this many widths outside [0, L] is negligible.
const NEGLIGIBLE_WIDTHS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGeometry<T> {
    /// Probe–control crossing angle in radians.
    pub angle_rad: T,
    /// e⁻² radius of the control beams along w.
    pub control_waist_um: T,
    /// e⁻² radius of the probe; zero means a single on-axis ray.
    pub probe_waist_um: T,
    /// Half separation of the control-beam peaks along w.
    pub delta_s_um: T,
    pub medium_length_mm: T,
    pub omega_c_peak: T,
    pub omega_d_peak: T,
}

impl<T: Real> BeamGeometry<T> {
    /// 2° crossing, 124 µm controls, 141 µm probe, 3.5 mm medium.
    pub fn standard(delta_s_um: T, omega_c_peak: T, omega_d_peak: T) -> Self {
        BeamGeometry {
            angle_rad: T::lit(2.0).to_radians(),
            control_waist_um: T::lit(124.0),
            probe_waist_um: T::lit(141.0),
            delta_s_um,
            medium_length_mm: T::lit(3.5),
            omega_c_peak,
            omega_d_peak,
        }
    }

    pub fn with_delta_s(mut self, delta_s_um: T) -> Self {
        self.delta_s_um = delta_s_um;
        self
    }

    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("geometry: {what}")));
        if !(self.angle_rad > T::zero() && self.angle_rad < T::FRAC_PI_2()) {
            return bad("angle must lie in (0, pi/2)");
        }
        if !(self.control_waist_um > T::zero()) {
            return bad("control waist must be positive");
        }
        if !(self.probe_waist_um >= T::zero()) {
            return bad("probe waist must be non-negative");
        }
        if !(self.delta_s_um >= T::zero()) {
            return bad("delta_s must be non-negative");
        }
        if !(self.medium_length_mm > T::zero()) {
            return bad("medium length must be positive");
        }
        if !self.omega_c_peak.is_finite() || !self.omega_d_peak.is_finite() {
            return bad("peak Rabi frequencies must be finite");
        }
        Ok(())
    }

    fn length_um(&self) -> T {
        self.medium_length_mm * T::lit(1000.0)
    }

    /// Longitudinal e⁻¹ amplitude width in units of L.
    pub fn width_z(&self) -> T {
        self.control_waist_um / self.angle_rad.sin() / self.length_um()
    }

    /// Peak positions (z_c, z_d) in units of L seen by a ray at transverse offset `offset_um`.
    pub fn centers(&self, offset_um: T) -> (T, T) {
        let l = self.length_um();
        let half = T::lit(0.5);
        let d = self.delta_s_um / self.angle_rad.sin() / l;
        let shift = offset_um / self.angle_rad.tan() / l;
        (half - d + shift, half + d + shift)
    }

    /// Both control peaks sit far outside the medium.
    pub fn is_negligible(&self) -> bool {
        let w = self.width_z() * T::lit(NEGLIGIBLE_WIDTHS);
        let outside = |c: T| c < -w || c > T::one() + w;
        let (zc, zd) = self.centers(T::zero());
        outside(zc) && outside(zd)
    }
}

/// Ω_c = Ω_0 cos(πz/2), Ω_d = Ω_0 sin(πz/2).
pub fn profile_sincos<T: Real>(omega_0: T) -> ControlProfile<T> {
    ControlProfile::Sincos { omega_0 }
}

/// Tilted Gaussian pair seen by the probe ray at transverse offset `offset_um`.
pub fn ray_profile<T: Real>(geom: &BeamGeometry<T>, offset_um: T) -> Result<ControlProfile<T>> {
    geom.check()?;
    let (center_c, center_d) = geom.centers(offset_um);
    Ok(ControlProfile::GaussianPair {
        omega_c_peak: geom.omega_c_peak,
        omega_d_peak: geom.omega_d_peak,
        center_c,
        center_d,
        width: geom.width_z(),
    })
}

/// On-axis control profile for `geom`.
pub fn profile_gaussian_pair<T: Real>(geom: &BeamGeometry<T>) -> Result<ControlProfile<T>> {
    let p = ray_profile(geom, T::zero())?;
    if geom.is_negligible() {
        log::warn!(
            "control beams displaced far outside the medium (delta_s = {} um); profile is negligible",
            geom.delta_s_um
        );
    }
    Ok(p)
}

/// How each ray is propagated.
#[derive(Debug, Clone, PartialEq)]
pub enum RunKind<T> {
    Cw(SteadySolver<T>),
    Pulse { pulse: PulseSpec<T>, grids: Grids<T> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayResult<T> {
    pub offset_um: T,
    pub weight: T,
    #[serde(rename = "T_p")]
    pub t_p: T,
    #[serde(rename = "T_s")]
    pub t_s: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedResult<T> {
    #[serde(rename = "T_p")]
    pub t_p: T,
    #[serde(rename = "T_s")]
    pub t_s: T,
    pub rays: Vec<RayResult<T>>,
}

/// Ray offsets evenly spaced over ±2 probe waists with intensity weights
/// exp(−2x²/w_p²). A zero probe waist yields the single center ray.
pub fn ray_offsets<T: Real>(probe_waist_um: T, n_rays: usize) -> Result<Vec<(T, T)>> {
    if n_rays < 3 || n_rays % 2 == 0 {
        return Err(Error::Config(format!("n_rays must be odd and at least 3, got {n_rays}")));
    }
    if probe_waist_um == T::zero() {
        return Ok(vec![(T::zero(), T::one())]);
    }
    let half = (n_rays / 2) as f64;
    let span = T::lit(RAY_SPAN) * probe_waist_um;
    Ok((0..n_rays)
        .map(|k| {
            let x = span * T::lit((k as f64 - half) / half);
            let u = x / probe_waist_um;
            (x, (-T::lit(2.0) * u * u).exp())
        })
        .collect())
}

/// Weighted mean of per-ray transmissions.
///
/// Accumulated as deviations from the center ray, so identical rays
/// reproduce its value exactly.
pub fn average_over_rays<T: Real>(rays: &[RayResult<T>]) -> Result<(T, T)> {
    if rays.is_empty() {
        return Err(Error::InvalidInput("no rays to average".into()));
    }
    let r0 = rays[rays.len() / 2];
    let (mut w, mut dp, mut ds) = (T::zero(), T::zero(), T::zero());
    for r in rays {
        w += r.weight;
        dp += r.weight * (r.t_p - r0.t_p);
        ds += r.weight * (r.t_s - r0.t_s);
    }
    if !(w > T::zero()) {
        return Err(Error::InvalidInput("ray weights sum to zero".into()));
    }
    Ok((r0.t_p + dp / w, r0.t_s + ds / w))
}

fn run_ray<T: Real>(profile: &ControlProfile<T>, params: &PhysParams<T>, run: &RunKind<T>) -> Result<(T, T)> {
    match run {
        RunKind::Cw(solver) => {
            let s = solver.solve(profile, params, cplx(T::one()))?;
            Ok((s.probe_transmission, s.conversion_efficiency))
        }
        RunKind::Pulse { pulse, grids } => {
            let r = simulate_pulse(pulse, profile, params, grids)?;
            Ok((r.metrics.t_p, r.metrics.t_s))
        }
    }
}

/// Averages the 1D solution over probe rays. Any failed ray aborts the average.
pub fn transverse_average<T: Real>(
    geom: &BeamGeometry<T>,
    params: &PhysParams<T>,
    run: &RunKind<T>,
    n_rays: usize,
) -> Result<AveragedResult<T>> {
    geom.check()?;
    if geom.is_negligible() {
        log::warn!("control beams displaced far outside the medium (delta_s = {} um)", geom.delta_s_um);
    }
    let offsets = ray_offsets(geom.probe_waist_um, n_rays)?;
    let rays = offsets
        .par_iter()
        .map(|&(x, weight)| {
            let prof = ray_profile(geom, x)?;
            let (t_p, t_s) = run_ray(&prof, params, run).map_err(|e| Error::Ray {
                offset_um: x.to_f64_lossy(),
                source: Box::new(e),
            })?;
            Ok(RayResult {
                offset_um: x,
                weight,
                t_p,
                t_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (t_p, t_s) = average_over_rays(&rays)?;
    Ok(AveragedResult { t_p, t_s, rays })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsPoint<T> {
    pub ds_um: T,
    #[serde(rename = "T_p")]
    pub t_p: T,
    #[serde(rename = "T_s")]
    pub t_s: T,
    #[serde(skip)]
    pub rays: Vec<RayResult<T>>,
}

/// One transverse average per ΔS value, in input order.
pub fn sweep_ds<T: Real>(
    ds_values: &[T],
    geom: &BeamGeometry<T>,
    params: &PhysParams<T>,
    run: &RunKind<T>,
    n_rays: usize,
) -> Result<Vec<DsPoint<T>>> {
    ds_values
        .iter()
        .map(|&ds| {
            let avg = transverse_average(&geom.with_delta_s(ds), params, run, n_rays)?;
            Ok(DsPoint {
                ds_um: ds,
                t_p: avg.t_p,
                t_s: avg.t_s,
                rays: avg.rays,
            })
        })
        .collect()
}
