//! Parameter recovery from transmission data.
//!
//! A Nelder–Mead simplex runs in coordinates scaled to the unit box, each
//! trial point projected back onto the box. The loss is the sum of squared
//! residuals of intensity transmissions (or intensity traces).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{transverse_average, BeamGeometry, RunKind};
use crate::num::{cplx, Real};
use crate::params::PhysParams;
use crate::profile::ControlProfile;
use crate::pulse::simulate_pulse;

/// α from a measured EIT group delay: α = τ|Ω_c|²/γ31.
pub fn od_from_delay<T: Real>(delay: T, omega_c: T, gamma31: T) -> Result<T> {
    if !(delay >= T::zero()) || !(omega_c > T::zero()) || !(gamma31 > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "od_from_delay needs delay >= 0 and positive omega_c, gamma31 (got {delay}, {omega_c}, {gamma31})"
        )));
    }
    Ok(delay * omega_c * omega_c / gamma31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    OmegaDPeak,
    Gamma21,
    OmegaCPeak,
    Alpha,
}

impl FitParam {
    pub fn as_str(self) -> &'static str {
        match self {
            FitParam::OmegaDPeak => "omega_d_peak",
            FitParam::Gamma21 => "gamma21",
            FitParam::OmegaCPeak => "omega_c_peak",
            FitParam::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParam<T> {
    pub param: FitParam,
    pub lower: T,
    pub upper: T,
    pub start: T,
}

/// Control configuration of a forward model.
#[derive(Debug, Clone, PartialEq)]
pub enum Controls<T> {
    Profile(ControlProfile<T>),
    Geometry { geom: BeamGeometry<T>, n_rays: usize },
}

/// Everything needed to predict one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub params: PhysParams<T>,
    pub controls: Controls<T>,
    pub run: RunKind<T>,
}

impl<T: Real> Model<T> {
    /// Copy of the model with `param` set to `value`.
    pub fn with(&self, param: FitParam, value: T) -> Result<Self> {
        let mut m = self.clone();
        let unsupported = || {
            Error::Config(format!(
                "{} cannot be varied for this control profile",
                param.as_str()
            ))
        };
        match param {
            FitParam::Alpha => m.params.alpha = value,
            FitParam::Gamma21 => m.params.gamma21 = value,
            FitParam::OmegaCPeak | FitParam::OmegaDPeak => {
                let is_c = param == FitParam::OmegaCPeak;
                match &mut m.controls {
                    Controls::Geometry { geom, .. } => {
                        if is_c {
                            geom.omega_c_peak = value
                        } else {
                            geom.omega_d_peak = value
                        }
                    }
                    Controls::Profile(ControlProfile::Uniform { omega_c, omega_d }) => {
                        let target = if is_c { omega_c } else { omega_d };
                        *target = cplx(value);
                    }
                    Controls::Profile(ControlProfile::GaussianPair {
                        omega_c_peak,
                        omega_d_peak,
                        ..
                    }) => {
                        if is_c {
                            *omega_c_peak = value
                        } else {
                            *omega_d_peak = value
                        }
                    }
                    _ => return Err(unsupported()),
                }
            }
        }
        Ok(m)
    }

    /// Predicted intensity data for `target`.
    pub fn predict(&self, target: &Target<T>) -> Result<Vec<T>> {
        match target {
            Target::Transmissions { .. } => {
                let (t_p, t_s) = match (&self.controls, &self.run) {
                    (Controls::Geometry { geom, n_rays }, run) => {
                        let a = transverse_average(geom, &self.params, run, *n_rays)?;
                        (a.t_p, a.t_s)
                    }
                    (Controls::Profile(p), RunKind::Cw(solver)) => {
                        let s = solver.solve(p, &self.params, cplx(T::one()))?;
                        (s.probe_transmission, s.conversion_efficiency)
                    }
                    (Controls::Profile(p), RunKind::Pulse { pulse, grids }) => {
                        let r = simulate_pulse(pulse, p, &self.params, grids)?;
                        (r.metrics.t_p, r.metrics.t_s)
                    }
                };
                Ok(vec![t_p, t_s])
            }
            Target::Traces { .. } => {
                let (Controls::Profile(p), RunKind::Pulse { pulse, grids }) = (&self.controls, &self.run) else {
                    return Err(Error::Config("trace fits need a pulse run with a fixed control profile".into()));
                };
                let r = simulate_pulse(pulse, p, &self.params, grids)?;
                let mut out = r.probe_out_intensity();
                out.extend(r.signal_out_intensity());
                Ok(out)
            }
        }
    }
}

/// Measured quantities to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target<T> {
    /// Either transmission may be absent.
    Transmissions { t_p: Option<T>, t_s: Option<T> },
    /// Output intensities |Ω_p(L,t)|², |Ω_s(L,t)|² on the run's time grid.
    Traces { probe: Vec<T>, signal: Vec<T> },
}

impl<T: Real> Target<T> {
    fn residuals(&self, predicted: &[T], out: &mut Vec<T>) -> Result<()> {
        match self {
            Target::Transmissions { t_p, t_s } => {
                if let Some(v) = t_p {
                    out.push(predicted[0] - *v);
                }
                if let Some(v) = t_s {
                    out.push(predicted[1] - *v);
                }
            }
            Target::Traces { probe, signal } => {
                if predicted.len() != probe.len() + signal.len() {
                    return Err(Error::InvalidInput("observed trace length does not match the time grid".into()));
                }
                for (p, o) in predicted.iter().zip(probe.iter().chain(signal)) {
                    out.push(*p - *o);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub model: Model<T>,
    pub target: Target<T>,
}

/// Simplex settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NelderMead {
    /// Initial simplex edge in scaled coordinates.
    pub initial_scale: f64,
    /// Simplex diameter, scaled coordinates, at which the search stops.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            initial_scale: 0.1,
            tolerance: 1e-7,
            max_evaluations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub loss: T,
    pub evaluations: usize,
    pub converged: bool,
    /// Best loss after each iteration.
    pub loss_trace: Vec<T>,
}

/// Box-constrained Nelder–Mead minimization.
///
/// After the simplex collapses it is rebuilt around the best vertex; the
/// search ends when a restart brings no improvement. Projection onto the
/// box can flatten a simplex against a face, and the restart recovers it.
pub fn minimize_box<T: Real, F>(f: F, start: &[T], lower: &[T], upper: &[T], settings: &NelderMead) -> Result<Minimum<T>>
where
    F: Fn(&[T]) -> Result<T>,
{
    let n = start.len();
    if n == 0 || lower.len() != n || upper.len() != n {
        return Err(Error::Config("need at least one free parameter with matching bounds".into()));
    }
    for i in 0..n {
        if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
            return Err(Error::Config(format!("bounds must be finite with lower < upper (parameter {i})")));
        }
    }
    let to_x = |u: &[T]| -> Vec<T> { (0..n).map(|i| lower[i] + u[i] * (upper[i] - lower[i])).collect() };
    let evals = std::cell::Cell::new(0usize);
    let eval = |u: &[T]| -> Result<T> {
        evals.set(evals.get() + 1);
        let v = f(&to_x(u))?;
        Ok(if v.is_finite() { v } else { T::infinity() })
    };

    let mut u: Vec<T> = (0..n)
        .map(|i| ((start[i] - lower[i]) / (upper[i] - lower[i])).max(T::zero()).min(T::one()))
        .collect();
    let mut loss = eval(&u)?;
    let mut trace = Vec::new();
    let mut converged = false;
    while evals.get() < settings.max_evaluations {
        let (u1, l1, done) = simplex_search(&eval, &u, loss, settings, &evals, &mut trace)?;
        let improved = l1 < loss;
        u = u1;
        loss = l1;
        if !done {
            break;
        }
        if !improved {
            converged = true;
            break;
        }
    }
    Ok(Minimum {
        x: to_x(&u),
        loss,
        evaluations: evals.get(),
        converged,
        loss_trace: trace,
    })
}

/// One simplex descent from `u0`; returns the best vertex, its loss and
/// whether the diameter fell below tolerance.
fn simplex_search<T: Real, E>(
    eval: &E,
    u0: &[T],
    f0: T,
    settings: &NelderMead,
    evals: &std::cell::Cell<usize>,
    trace: &mut Vec<T>,
) -> Result<(Vec<T>, T, bool)>
where
    E: Fn(&[T]) -> Result<T>,
{
    let n = u0.len();
    let zero = T::zero();
    let one = T::one();
    let clamp = |u: Vec<T>| -> Vec<T> { u.into_iter().map(|v| v.max(zero).min(one)).collect() };
    let scale = T::lit(settings.initial_scale);
    let mut simplex = vec![u0.to_vec()];
    let mut losses = vec![f0];
    for i in 0..n {
        let mut u = u0.to_vec();
        u[i] = if u[i] + scale <= one { u[i] + scale } else { u[i] - scale };
        losses.push(eval(&u)?);
        simplex.push(u);
    }

    let tol = T::lit(settings.tolerance);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    loop {
        // stable ordering: ties keep earlier vertices first
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp_real(&losses[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        losses = order.iter().map(|&k| losses[k]).collect();
        trace.push(losses[0]);

        let diameter = simplex[1..]
            .iter()
            .map(|u| {
                u.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .fold(zero, |s, v| s + v)
                    .sqrt()
            })
            .fold(zero, T::max);
        if diameter < tol {
            return Ok((simplex.swap_remove(0), losses[0], true));
        }
        if evals.get() >= settings.max_evaluations {
            return Ok((simplex.swap_remove(0), losses[0], false));
        }

        let centroid: Vec<T> = (0..n)
            .map(|i| simplex[..n].iter().fold(zero, |s, u| s + u[i]) / T::lit(n as f64))
            .collect();
        let along = |c: T| clamp((0..n).map(|i| centroid[i] + c * (simplex[n][i] - centroid[i])).collect());

        let xr = along(-one);
        let fr = eval(&xr)?;
        if fr < losses[0] {
            let xe = along(-two);
            let fe = eval(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                losses[n] = fe;
            } else {
                simplex[n] = xr;
                losses[n] = fr;
            }
            continue;
        }
        if fr < losses[n - 1] {
            simplex[n] = xr;
            losses[n] = fr;
            continue;
        }
        let xc = if fr < losses[n] { along(-half) } else { along(half) };
        let fc = eval(&xc)?;
        if fc < losses[n].min(fr) {
            simplex[n] = xc;
            losses[n] = fc;
            continue;
        }
        for k in 1..=n {
            let u: Vec<T> = (0..n).map(|i| simplex[0][i] + half * (simplex[k][i] - simplex[0][i])).collect();
            losses[k] = eval(&u)?;
            simplex[k] = u;
        }
    }
}

trait TotalCmp {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering;
}

impl<T: Real> TotalCmp for T {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap_or_else(|| self.is_nan().cmp(&other.is_nan()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem<T> {
    pub free: Vec<FreeParam<T>>,
    pub observations: Vec<Observation<T>>,
    pub settings: NelderMead,
    /// Extra starting points, run in parallel alongside `free[..].start`.
    pub extra_starts: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport<T> {
    pub names: Vec<&'static str>,
    pub values: Vec<T>,
    pub loss: T,
    pub initial_loss: T,
    pub evaluations: usize,
    pub converged: bool,
    pub loss_trace: Vec<T>,
    pub settings: NelderMead,
}

impl<T: Real> FitProblem<T> {
    pub fn check(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::Config("fit needs at least one free parameter".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::Config("fit needs at least one observation".into()));
        }
        for f in &self.free {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return Err(Error::Config(format!("bounds of {} must be finite with lower < upper", f.param.as_str())));
            }
        }
        for s in &self.extra_starts {
            if s.len() != self.free.len() {
                return Err(Error::Config("each extra start needs one value per free parameter".into()));
            }
        }
        Ok(())
    }

    /// Sum of squared residuals at parameter values `x` (ordered as `free`).
    pub fn loss(&self, x: &[T]) -> Result<T> {
        let mut res = Vec::new();
        for obs in &self.observations {
            let mut m = obs.model.clone();
            for (f, v) in self.free.iter().zip(x) {
                m = m.with(f.param, *v)?;
            }
            let pred = m.predict(&obs.target)?;
            obs.target.residuals(&pred, &mut res)?;
        }
        Ok(res.iter().fold(T::zero(), |s, r| s + *r * *r))
    }
}

/// Fits the free parameters; among several starts the lowest loss wins, ties going to the earliest.
pub fn fit_params<T: Real>(problem: &FitProblem<T>) -> Result<FitReport<T>> {
    problem.check()?;
    let lower: Vec<T> = problem.free.iter().map(|f| f.lower).collect();
    let upper: Vec<T> = problem.free.iter().map(|f| f.upper).collect();
    let mut starts = vec![problem.free.iter().map(|f| f.start).collect::<Vec<_>>()];
    starts.extend(problem.extra_starts.iter().cloned());
    let runs = starts
        .par_iter()
        .map(|s| {
            let m = minimize_box(|x| problem.loss(x), s, &lower, &upper, &problem.settings)?;
            let clamped: Vec<T> = (0..s.len()).map(|i| s[i].max(lower[i]).min(upper[i])).collect();
            let initial = problem.loss(&clamped)?;
            Ok((m, initial))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.0.loss < runs[best].0.loss {
            best = k;
        }
    }
    let (m, initial_loss) = runs.into_iter().nth(best).unwrap();
    if !m.converged {
        log::warn!("fit stopped after {} evaluations without converging", m.evaluations);
    }
    Ok(FitReport {
        names: problem.free.iter().map(|f| f.param.as_str()).collect(),
        values: m.x,
        loss: m.loss,
        initial_loss,
        evaluations: m.evaluations,
        converged: m.converged,
        loss_trace: m.loss_trace,
        settings: problem.settings,
    })
}
