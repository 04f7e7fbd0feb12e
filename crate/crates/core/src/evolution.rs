//! Time integration of `i u_t = L_a u - |u|^2 u` for radial data.
//!
//! The reduced field `w = r u` is advanced by Strang splitting: an exact
//! nonlinear phase rotation for half a step, a Crank-Nicolson step of the
//! linear part, and another half phase. Both pieces conserve the discrete
//! mass `4 pi h Σ |w_k|^2` exactly, and the composition is second order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{functionals_with, l4_origin_factor, Functionals};
use crate::grid::{PotentialParam, RadialField};
use crate::operator::RadialOperator;
use crate::tridiag::ShiftedFactor;
use crate::virial::{dv_formula, moment, VirialWeight};

/// Number of `dt` halvings allowed before a kinetic-energy trip is final.
pub const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub monitor_stride: usize,
    /// Trip when `kinetic_a > blowup_factor^2 * kinetic_a(0)`.
    #[serde(default = "default_blowup_factor")]
    pub blowup_factor: f64,
    #[serde(default)]
    pub scatter_window: Option<(f64, f64)>,
    #[serde(default = "default_scatter_tol")]
    pub scatter_tol: f64,
    #[serde(default = "default_weight")]
    pub weight: VirialWeight,
}

fn default_stride() -> usize {
    10
}
fn default_blowup_factor() -> f64 {
    10.0
}
fn default_scatter_tol() -> f64 {
    1e-2
}
fn default_weight() -> VirialWeight {
    VirialWeight::FullSquare
}

impl EvolveConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            monitor_stride: default_stride(),
            blowup_factor: default_blowup_factor(),
            scatter_window: None,
            scatter_tol: default_scatter_tol(),
            weight: default_weight(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.monitor_stride == 0 {
            return Err(Error::InvalidArgument("monitor_stride must be at least 1".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "blowup_factor must exceed 1, got {}",
                self.blowup_factor
            )));
        }
        if let Some((t1, t2)) = self.scatter_window {
            if !(0.0 <= t1 && t1 < t2 && t2 <= self.t_final) {
                return Err(Error::InvalidArgument(format!(
                    "scatter window ({t1}, {t2}) must satisfy 0 <= t1 < t2 <= t_final"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub f: Functionals,
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    RanToHorizon,
    BlowupDetected { t: f64, overflow: bool },
    ScatteringDetected { t1: f64, t2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub t1: f64,
    pub t2: f64,
    pub distance: f64,
    pub scattered: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    pub scatter: Option<ScatterReport>,
    /// Time step in force at the end (smaller than requested after refinements).
    pub final_dt: f64,
    pub refinements: usize,
    pub final_state: RadialField,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    /// Largest relative deviation of `select` from its initial value.
    pub fn max_drift(&self, select: impl Fn(&Sample) -> f64) -> f64 {
        let x0 = select(&self.samples[0]);
        self.samples
            .iter()
            .map(|s| (select(s) - x0).abs() / x0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Reusable split-step propagator for one `(operator, dt)` pair.
pub struct SplitStep {
    op: RadialOperator,
    dt: f64,
    factor: ShiftedFactor,
    /// `kappa_k / r_k^2`: phase rate per unit `|w_k|^2`.
    phase_rate: Vec<f64>,
    rhs: Vec<Complex64>,
}

impl SplitStep {
    pub fn new(op: RadialOperator, dt: f64) -> Result<Self> {
        let factor = ShiftedFactor::new(op.matrix(), 0.5 * dt)?;
        let g = *op.grid();
        let kappa0 = l4_origin_factor(op.param());
        let phase_rate = (0..g.n())
            .map(|k| {
                let r = g.r(k);
                (if k == 0 { kappa0 } else { 1.0 }) / (r * r)
            })
            .collect();
        Ok(Self {
            rhs: vec![Complex64::new(0.0, 0.0); op.dim()],
            op,
            dt,
            factor,
            phase_rate,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator(&self) -> &RadialOperator {
        &self.op
    }

    /// Crank-Nicolson: `(I + i dt/2 A) w+ = (I - i dt/2 A) w`.
    pub fn linear(&mut self, w: &mut [Complex64]) {
        let a = self.op.matrix();
        let m = a.dim();
        let s = Complex64::new(0.0, 0.5 * self.dt);
        for i in 0..m {
            let mut aw = w[i] * a.diag[i];
            if i > 0 {
                aw += w[i - 1] * a.off;
            }
            if i + 1 < m {
                aw += w[i + 1] * a.off;
            }
            self.rhs[i] = w[i] - s * aw;
        }
        self.factor.solve(&mut self.rhs);
        w[..m].copy_from_slice(&self.rhs);
        w[m] = Complex64::new(0.0, 0.0);
    }

    /// `w_k <- w_k exp(i kappa_k |u_k|^2 tau)`.
    pub fn phase(&self, w: &mut [Complex64], tau: f64) {
        for (wk, rate) in w.iter_mut().zip(&self.phase_rate) {
            let theta = rate * wk.norm_sqr() * tau;
            *wk *= Complex64::from_polar(1.0, theta);
        }
    }

    pub fn strang(&mut self, w: &mut [Complex64]) {
        self.phase(w, 0.5 * self.dt);
        self.linear(w);
        self.phase(w, 0.5 * self.dt);
    }
}

fn pinned_reduced(u: &RadialField) -> Vec<Complex64> {
    let mut w = u.reduced();
    if let Some(last) = w.last_mut() {
        *last = Complex64::new(0.0, 0.0);
    }
    w
}

fn field_from(u: &RadialField, w: &[Complex64]) -> RadialField {
    RadialField::from_reduced(*u.grid(), w).expect("length preserved")
}

pub fn linear_step(u: &RadialField, p: &PotentialParam, dt: f64) -> Result<RadialField> {
    let mut st = SplitStep::new(RadialOperator::new(*p, *u.grid()), dt)?;
    let mut w = pinned_reduced(u);
    st.linear(&mut w);
    Ok(field_from(u, &w))
}

/// Exact flow of `i u_t = -|u|^2 u` (with the origin quadrature factor on
/// the first node for `a < 0`).
pub fn nonlinear_phase_step(u: &RadialField, p: &PotentialParam, dt: f64) -> RadialField {
    let kappa0 = l4_origin_factor(p);
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let kappa = if k == 0 { kappa0 } else { 1.0 };
            v * Complex64::from_polar(1.0, kappa * v.norm_sqr() * dt)
        })
        .collect();
    RadialField::new(*u.grid(), values).expect("length preserved")
}

pub fn strang_step(u: &RadialField, p: &PotentialParam, dt: f64) -> Result<RadialField> {
    let mut st = SplitStep::new(RadialOperator::new(*p, *u.grid()), dt)?;
    let mut w = pinned_reduced(u);
    st.strang(&mut w);
    Ok(field_from(u, &w))
}

fn sample(t: f64, u: &RadialField, op: &RadialOperator, weight: &VirialWeight) -> Sample {
    let f = functionals_with(u, op);
    Sample {
        t,
        f,
        v: moment(u, weight),
        dv: dv_formula(u, weight),
        d2v: match weight {
            VirialWeight::FullSquare => f.virial_bracket(),
            VirialWeight::Truncated { radius } => {
                crate::virial::d2v_truncated_terms(u, op.param(), *radius)
                    .map(|t| t.main + t.exterior_correction + t.remainder)
                    .unwrap_or(f64::NAN)
            }
        },
    }
}

pub fn evolve(u0: &RadialField, p: &PotentialParam, cfg: &EvolveConfig) -> Result<Trajectory> {
    evolve_observed(u0, p, cfg, |_, _| {})
}

/// [`evolve`] with a callback invoked on every recorded sample.
pub fn evolve_observed(
    u0: &RadialField,
    p: &PotentialParam,
    cfg: &EvolveConfig,
    mut observer: impl FnMut(f64, &RadialField),
) -> Result<Trajectory> {
    cfg.validate()?;
    let f0 = functionals_of_checked(u0, p)?;
    let op = RadialOperator::new(*p, *u0.grid());
    let grid = *u0.grid();
    let mut dt = cfg.dt;
    let mut stride = cfg.monitor_stride;
    let mut st = SplitStep::new(op.clone(), dt)?;
    let k_limit = cfg.blowup_factor * cfg.blowup_factor * f0.kinetic_a;

    let mut w = pinned_reduced(u0);
    let first = sample(0.0, &field_from(u0, &w), &op, &cfg.weight);
    observer(0.0, &field_from(u0, &w));
    let mut samples = vec![first];

    // Checkpoint: state and time at the last accepted sample.
    let mut ck_w = w.clone();
    let mut ck_t = 0.0;
    let mut refinements = 0;
    let mut snapshots: [Option<Vec<Complex64>>; 2] = [None, None];
    let (t1, t2) = cfg.scatter_window.unwrap_or((f64::NAN, f64::NAN));
    let eps_t = 1e-9 * cfg.dt;

    let outcome = 'outer: loop {
        // One monitor block from the checkpoint.
        let remaining = cfg.t_final - ck_t;
        if remaining <= eps_t {
            break Outcome::RanToHorizon;
        }
        let steps = (stride as f64).min((remaining / dt).round().max(1.0)) as usize;
        let mut overflow = false;
        for s in 1..=steps {
            st.strang(&mut w);
            let t = ck_t + s as f64 * dt;
            for (slot, &target) in snapshots.iter_mut().zip(&[t1, t2]) {
                if slot.is_none() && (t - target).abs() < 0.5 * dt {
                    *slot = Some(w.clone());
                }
            }
            if s % 64 == 0 && !w.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                overflow = true;
                break;
            }
        }
        let t = ck_t + steps as f64 * dt;
        let u = field_from(u0, &w);
        let smp = sample(t, &u, &op, &cfg.weight);
        if overflow || !u.is_finite() || !smp.f.kinetic_a.is_finite() {
            break 'outer Outcome::BlowupDetected {
                t: ck_t,
                overflow: true,
            };
        }
        if smp.f.kinetic_a > k_limit {
            if refinements == MAX_REFINEMENTS {
                break 'outer Outcome::BlowupDetected {
                    t: ck_t,
                    overflow: false,
                };
            }
            refinements += 1;
            dt *= 0.5;
            stride *= 2;
            st = SplitStep::new(op.clone(), dt)?;
            w.clone_from(&ck_w);
            // Snapshots past the checkpoint are retaken on the refined path.
            for (slot, &target) in snapshots.iter_mut().zip(&[t1, t2]) {
                if target > ck_t + 0.5 * dt {
                    *slot = None;
                }
            }
            log::debug!("kinetic trip after t = {ck_t}; refining to dt = {dt}");
            continue;
        }
        observer(t, &u);
        samples.push(smp);
        ck_w.clone_from(&w);
        ck_t = t;
    };

    let mut scatter = None;
    let mut outcome = outcome;
    if let Some((t1, t2)) = cfg.scatter_window {
        if let (Some(w1), Some(w2)) = (&snapshots[0], &snapshots[1]) {
            let u1 = RadialField::from_reduced(grid, w1)?;
            let u2 = RadialField::from_reduced(grid, w2)?;
            let report = detect_scattering(&u1, &u2, t1, t2, p, dt, u0, cfg.scatter_tol)?;
            if report.scattered && matches!(outcome, Outcome::RanToHorizon) {
                outcome = Outcome::ScatteringDetected { t1, t2 };
            }
            scatter = Some(report);
        }
    }

    Ok(Trajectory {
        samples,
        outcome,
        scatter,
        final_dt: dt,
        refinements,
        final_state: RadialField::from_reduced(grid, &w)?,
    })
}

fn functionals_of_checked(u0: &RadialField, p: &PotentialParam) -> Result<Functionals> {
    let f = crate::functionals::functionals_of(u0, p);
    if !(f.mass.is_finite() && f.kinetic_a.is_finite() && f.l4.is_finite()) {
        return Err(Error::InvalidArgument("initial data has non-finite functionals".into()));
    }
    Ok(f)
}

/// Discrete `H^1_a` norm: `(mass + kinetic_a)^{1/2}`.
pub fn h1_norm(u: &RadialField, op: &RadialOperator) -> f64 {
    let f = functionals_with(u, op);
    (f.mass + f.kinetic_a).sqrt()
}

/// Cauchy test for `e^{itL} u(t)`: the linear propagator is unitary and
/// commutes with itself, so comparing `u(t1)` with `u(t2)` pulled back by
/// `t2 - t1` equals comparing both pulled back to `t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn detect_scattering(
    u1: &RadialField,
    u2: &RadialField,
    t1: f64,
    t2: f64,
    p: &PotentialParam,
    dt: f64,
    u0: &RadialField,
    tol: f64,
) -> Result<ScatterReport> {
    if !(t1 < t2) {
        return Err(Error::ProbeInapplicable(format!("need t1 < t2, got ({t1}, {t2})")));
    }
    let op = RadialOperator::new(*p, *u1.grid());
    let steps = ((t2 - t1) / dt).round() as usize;
    let back_dt = (t2 - t1) / steps.max(1) as f64;
    let mut st = SplitStep::new(op.clone(), -back_dt)?;
    let mut w = pinned_reduced(u2);
    for _ in 0..steps {
        st.linear(&mut w);
    }
    let w1 = pinned_reduced(u1);
    let diff: Vec<Complex64> = w1.iter().zip(&w).map(|(a, b)| a - b).collect();
    let d = h1_norm(&RadialField::from_reduced(*u1.grid(), &diff)?, &op) / h1_norm(u0, &op);
    Ok(ScatterReport {
        t1,
        t2,
        distance: d,
        scattered: d < tol,
    })
}

/// Scattering probe from the outcome of a run: inapplicable when the run
/// stopped before `t1`.
pub fn scattering_from(traj: &Trajectory, cfg: &EvolveConfig) -> Result<ScatterReport> {
    match (cfg.scatter_window, traj.scatter) {
        (_, Some(r)) => Ok(r),
        (None, None) => Err(Error::ProbeInapplicable("no scatter window configured".into())),
        (Some((t1, _)), None) => Err(Error::ProbeInapplicable(match traj.outcome {
            Outcome::BlowupDetected { t, .. } => format!("blowup detected at t = {t} before the window"),
            _ => format!("run did not reach the window starting at t1 = {t1}"),
        })),
    }
}

/// Spatial part of the scaling symmetry, `u^lambda(r) = lambda u(lambda r)`,
/// by linear interpolation of the reduced field (`w(0) = 0`).
pub fn rescale(u: &RadialField, lambda: f64) -> Result<RadialField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let g = *u.grid();
    let n = g.n();
    let h = g.h();
    let peak = u.peak();
    if lambda < 1.0 && peak > 0.0 {
        let cut = lambda * g.r_max();
        let lost = (0..n)
            .filter(|&k| g.r(k) > cut + 1e-12 * h)
            .map(|k| u.values()[k].norm())
            .fold(0.0, f64::max)
            / peak;
        if lost > 1e-6 {
            return Err(Error::SupportOverflow(lost));
        }
    }
    let w = u.reduced();
    let values = (0..n)
        .map(|k| {
            let r = g.r(k);
            let s = lambda * r / h; // position in units of h; node j sits at s = j
            let j = s.floor() as usize;
            let frac = s - j as f64;
            let at = |j: usize| -> Complex64 {
                if j == 0 || j > n {
                    Complex64::new(0.0, 0.0)
                } else {
                    w[j - 1]
                }
            };
            let wl = if j >= n { Complex64::new(0.0, 0.0) } else { at(j) * (1.0 - frac) + at(j + 1) * frac };
            wl / r
        })
        .collect();
    RadialField::new(g, values)
}
