//! Ground states `Q_a` of `-L_a Q - Q + Q^3 = 0`, the sharp
//! Gagliardo-Nirenberg constant and the derived thresholds.
//!
//! Two independent solvers are provided: shooting with bisection on the
//! amplitude of the Friedrichs branch, and projected gradient ascent of the
//! Weinstein functional `J = l4 / (mass^{1/2} kinetic^{3/2})`.
//!
//! Shooting integrates `v = r^sigma Q`, which is regular at the origin:
//!
//! ```text
//! v'' + (2 - 2 sigma) v' / r = v - r^{-2 sigma} v^3,
//! v = c + c r^2 / (6 - 4 sigma) - c^3 r^{2 - 2 sigma} / (2 (1 - sigma)(3 - 4 sigma)) + ...
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{functionals_of, l4_origin_factor, Functionals};
use crate::grid::{PotentialParam, RadialField, RadialGrid};
use crate::operator::RadialOperator;
use crate::tridiag;

/// Which Gagliardo-Nirenberg problem a constant belongs to: the unrestricted
/// one (attained only for `a <= 0`) or the one restricted to radial functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    General,
    Radial,
}

impl Flavor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flavor::General => "general",
            Flavor::Radial => "radial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CrossedZero,
    Diverged,
    Decayed,
}

/// Residual level below which a ground state counts as converged, whatever
/// the requested tolerance (the quadrature itself is second order).
pub const POHOZAEV_FLOOR: f64 = 1e-4;

/// Relative amplitude at which the computed tail is replaced by its asymptote.
pub const TAIL_PATCH_LEVEL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub a: f64,
    pub profile: RadialField,
    /// Bisection amplitude of `r^sigma Q` at the origin; `None` for the
    /// gradient-flow solver.
    pub shoot_c: Option<f64>,
    pub f: Functionals,
    pub pohozaev_rho1: f64,
    pub pohozaev_rho2: f64,
    pub c_constant: f64,
    /// `J` evaluated on the computed profile.
    pub gn_value: f64,
    pub flavor: Flavor,
    pub converged: bool,
}

impl GroundStateResult {
    fn assemble(
        p: &PotentialParam,
        profile: RadialField,
        shoot_c: Option<f64>,
        tol: f64,
        flavor: Flavor,
    ) -> Result<Self> {
        let f = functionals_of(&profile, p);
        let rho1 = (f.mass - f.kinetic_a / 3.0).abs() / f.mass;
        let rho2 = (f.mass - f.l4 / 4.0).abs() / f.mass;
        let limit = (10.0 * tol).max(POHOZAEV_FLOOR);
        let converged = rho1 <= limit && rho2 <= limit;
        if !converged {
            log::warn!("ground state at a = {} unconverged: rho1 = {rho1:.3e}, rho2 = {rho2:.3e}", p.a());
        }
        Ok(Self {
            a: p.a(),
            shoot_c,
            gn_value: f.gn_quotient()?,
            c_constant: 4.0 * 3f64.powf(-1.5) / f.mass,
            f,
            pohozaev_rho1: rho1,
            pohozaev_rho2: rho2,
            profile,
            flavor,
            converged,
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        thresholds_from_constant(self.c_constant, self.flavor)
            .expect("ground-state constants are positive")
    }
}

fn check_request(p: &PotentialParam, tol: f64, flavor: Flavor) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1e-3], got {tol}")));
    }
    if flavor == Flavor::General && p.a() > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "no general-flavor optimizer exists for a = {} > 0; use the radial flavor or the a = 0 constant",
            p.a()
        )));
    }
    Ok(())
}

/// RK4 integrator for the `v` equation on the grid nodes.
struct Shooter {
    grid: RadialGrid,
    sigma: f64,
    /// `r^{-2 sigma}` at `r = h (1 + i/2)`, `i = 0..2n-1`.
    weight: Vec<f64>,
}

impl Shooter {
    fn new(p: &PotentialParam, grid: RadialGrid) -> Self {
        let h = grid.h();
        let s = p.sigma();
        let weight = (0..2 * grid.n() - 1)
            .map(|i| (h * (1.0 + 0.5 * i as f64)).powf(-2.0 * s))
            .collect();
        Self {
            grid,
            sigma: s,
            weight,
        }
    }

    #[inline]
    fn rhs(&self, r: f64, wt: f64, v: f64, dv: f64) -> (f64, f64) {
        (dv, -(2.0 - 2.0 * self.sigma) * dv / r + v - wt * v * v * v)
    }

    fn start(&self, c: f64) -> (f64, f64) {
        let s = self.sigma;
        let r = self.grid.h();
        let v = c + c * r * r / (6.0 - 4.0 * s)
            - c.powi(3) * r.powf(2.0 - 2.0 * s) / (2.0 * (1.0 - s) * (3.0 - 4.0 * s));
        let dv = c * r / (3.0 - 2.0 * s) - c.powi(3) * r.powf(1.0 - 2.0 * s) / (3.0 - 4.0 * s);
        (v, dv)
    }

    /// Integrates until an event; returns `v` at the visited nodes.
    fn run(&self, c: f64) -> (Vec<f64>, Verdict) {
        let h = self.grid.h();
        let n = self.grid.n();
        let (mut v, mut dv) = self.start(c);
        let mut out = Vec::with_capacity(n);
        out.push(v);
        if !(v > 0.0) {
            return (out, if v.is_finite() { Verdict::CrossedZero } else { Verdict::Diverged });
        }
        let mut decreasing = dv < 0.0;
        for k in 0..n - 1 {
            let r = self.grid.r(k);
            let (w0, w1, w2) = (self.weight[2 * k], self.weight[2 * k + 1], self.weight[2 * k + 2]);
            let (a1, b1) = self.rhs(r, w0, v, dv);
            let (a2, b2) = self.rhs(r + 0.5 * h, w1, v + 0.5 * h * a1, dv + 0.5 * h * b1);
            let (a3, b3) = self.rhs(r + 0.5 * h, w1, v + 0.5 * h * a2, dv + 0.5 * h * b2);
            let (a4, b4) = self.rhs(r + h, w2, v + h * a3, dv + h * b3);
            v += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            dv += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            out.push(v);
            if !v.is_finite() || !dv.is_finite() || v > 10.0 * c {
                return (out, Verdict::Diverged);
            }
            if v < 0.0 {
                return (out, Verdict::CrossedZero);
            }
            if dv < 0.0 {
                decreasing = true;
            } else if decreasing && dv > 0.0 {
                return (out, Verdict::Diverged);
            }
        }
        // Reaching the end without decaying (e.g. the constant solution
        // v = 1 at sigma = 0) is an undershoot.
        if v < 1e-8 * c {
            (out, Verdict::Decayed)
        } else {
            (out, Verdict::Diverged)
        }
    }
}

/// One shot with amplitude `c`. The profile holds `Q = r^{-sigma} v` on the
/// nodes reached before the event and zero beyond.
#[derive(Debug, Clone)]
pub struct Shot {
    pub profile: RadialField,
    pub verdict: Verdict,
    /// Number of nodes integrated.
    pub reached: usize,
}

pub fn shoot(p: &PotentialParam, c: f64, g: RadialGrid) -> Result<Shot> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("shooting amplitude must be positive, got {c}")));
    }
    let sh = Shooter::new(p, g);
    let (v, verdict) = sh.run(c);
    Ok(Shot {
        profile: v_to_profile(p, g, &v),
        verdict,
        reached: v.len(),
    })
}

fn v_to_profile(p: &PotentialParam, g: RadialGrid, v: &[f64]) -> RadialField {
    let mut q = vec![0.0; g.n()];
    for (k, vk) in v.iter().enumerate() {
        q[k] = g.r(k).powf(-p.sigma()) * vk;
    }
    RadialField::from_real(g, &q).expect("length matches grid")
}

pub const SCAN_LO: f64 = 1e-3;
pub const SCAN_HI: f64 = 1e3;

/// First (diverged, crossed) amplitude pair on a geometric scan.
pub fn find_bracket(p: &PotentialParam, g: RadialGrid) -> Result<(f64, f64)> {
    let sh = Shooter::new(p, g);
    let steps = 240;
    let ratio = (SCAN_HI / SCAN_LO).powf(1.0 / steps as f64);
    let mut prev: Option<f64> = None;
    let mut c = SCAN_LO;
    for _ in 0..=steps {
        match sh.run(c).1 {
            Verdict::Diverged => prev = Some(c),
            Verdict::CrossedZero => {
                if let Some(lo) = prev {
                    return Ok((lo, c));
                }
            }
            Verdict::Decayed => {
                if prev.is_some() {
                    return Ok((c, c));
                }
            }
        }
        c *= ratio;
    }
    Err(Error::NoBracket {
        lo: SCAN_LO,
        hi: SCAN_HI,
    })
}

/// Shooting solver. Bisection runs to machine precision; `tol` sets the
/// Pohozaev convergence threshold.
pub fn solve_ground_state(
    p: &PotentialParam,
    g: RadialGrid,
    tol: f64,
    flavor: Flavor,
) -> Result<GroundStateResult> {
    check_request(p, tol, flavor)?;
    let sh = Shooter::new(p, g);
    let (mut lo, mut hi) = find_bracket(p, g)?;
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match sh.run(mid).1 {
            Verdict::Diverged => lo = mid,
            Verdict::CrossedZero => hi = mid,
            Verdict::Decayed => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let (v_lo, _) = sh.run(lo);
    let (v_hi, _) = sh.run(hi);
    let q_lo: Vec<f64> = v_lo.iter().enumerate().map(|(k, v)| g.r(k).powf(-p.sigma()) * v).collect();
    let q_hi: Vec<f64> = v_hi.iter().enumerate().map(|(k, v)| g.r(k).powf(-p.sigma()) * v).collect();

    let (k_peak, peak) = q_lo
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (k, &q)| if q > acc.1 { (k, q) } else { acc });
    let patch = (k_peak..q_lo.len())
        .find(|&k| q_lo[k] < TAIL_PATCH_LEVEL * peak)
        .ok_or_else(|| {
            Error::UnreliableTail(format!(
                "trajectory left the decaying branch at r = {:.3} before reaching {TAIL_PATCH_LEVEL:e} of the peak",
                g.r(q_lo.len() - 1)
            ))
        })?;
    if patch >= q_hi.len() || (q_lo[patch] - q_hi[patch]).abs() > 1e-2 * q_lo[patch] {
        return Err(Error::UnreliableTail(format!(
            "bracketing trajectories disagree at the patch point r = {:.3}",
            g.r(patch)
        )));
    }

    let asym = |r: f64| (-r).exp() / r * (1.0 + p.a() / (2.0 * r));
    let beta = q_lo[patch] / asym(g.r(patch));
    let q: Vec<f64> = (0..g.n())
        .map(|k| if k <= patch { q_lo[k] } else { beta * asym(g.r(k)) })
        .collect();
    let profile = RadialField::from_real(g, &q)?;
    let c = 0.5 * (lo + hi);
    GroundStateResult::assemble(p, profile, Some(c), tol, flavor)
}

/// Seed width of the gradient flow.
const FLOW_SEED_VARIANCE: f64 = 1.5;
const FLOW_STEP: f64 = 1e-2;
const FLOW_MAX_REJECTIONS: usize = 100;
const FLOW_MAX_STEPS: usize = 200_000;

/// Projected gradient ascent of `J`; returns the rescaled optimizer and the
/// accepted `J` history (non-decreasing by construction).
pub fn gradient_flow_trace(
    p: &PotentialParam,
    g: RadialGrid,
    tol: f64,
    flavor: Flavor,
) -> Result<(GroundStateResult, Vec<f64>)> {
    check_request(p, tol, flavor)?;
    let op = RadialOperator::new(*p, g);
    let a = op.matrix();
    let m = op.dim();
    let h = g.h();
    let r: Vec<f64> = (0..m).map(|k| g.r(k)).collect();
    let norm = 4.0 * PI * h;
    let mut kappa = vec![1.0; m];
    kappa[0] = l4_origin_factor(p);

    let mass = |w: &[f64]| norm * w.iter().map(|x| x * x).sum::<f64>();
    let l4 = |w: &[f64]| {
        norm * (0..m).map(|i| kappa[i] * w[i].powi(4) / (r[i] * r[i])).sum::<f64>()
    };
    let kinetic = |w: &[f64]| {
        let aw = a.apply(w);
        norm * w.iter().zip(&aw).map(|(x, y)| x * y).sum::<f64>()
    };
    let normalize = |w: &mut [f64]| {
        let s = mass(w).sqrt();
        w.iter_mut().for_each(|x| *x /= s);
    };
    let quotient = |w: &[f64]| l4(w) / kinetic(w).powf(1.5);

    let mut w: Vec<f64> = r.iter().map(|&rr| rr * (-rr * rr / (2.0 * FLOW_SEED_VARIANCE)).exp()).collect();
    normalize(&mut w);
    let mut j = quotient(&w);
    let mut history = vec![j];
    let mut tau = FLOW_STEP;
    let mut rejections = 0;
    let mut next = vec![0.0; m];

    for _ in 0..FLOW_MAX_STEPS {
        let kk = kinetic(&w);
        let ll = l4(&w);
        for i in 0..m {
            next[i] = w[i] + tau * (4.0 * kappa[i] * w[i].powi(3) / (r[i] * r[i] * ll) - w[i]);
        }
        tridiag::solve_shifted_real(a, 3.0 * tau / kk, &mut next);
        normalize(&mut next);
        let j_new = quotient(&next);
        if j_new >= j {
            let rel = (j_new - j) / j;
            std::mem::swap(&mut w, &mut next);
            j = j_new;
            history.push(j);
            rejections = 0;
            if rel < tol && history.len() > 10 {
                break;
            }
        } else if (j - j_new) / j < 1e-14 {
            // Stalled at roundoff level: the maximum is resolved.
            break;
        } else {
            tau *= 0.5;
            rejections += 1;
            if rejections >= FLOW_MAX_REJECTIONS {
                return Err(Error::NonMonotone(rejections));
            }
        }
    }

    // Euler-Lagrange rescaling: Q(r) = g(r / lambda) / alpha.
    let mm = mass(&w);
    let kk = kinetic(&w);
    let ll = l4(&w);
    let lambda = (kk / (3.0 * mm)).sqrt();
    let alpha = (ll / (4.0 * mm)).sqrt();
    let s = p.sigma();
    let mut v: Vec<f64> = (0..m).map(|k| r[k].powf(s) * w[k] / r[k]).collect();
    v.push(0.0);
    let q: Vec<f64> = (0..g.n())
        .map(|k| {
            let x = g.r(k) / lambda;
            x.powf(-s) * lagrange4(&v, h, x) / alpha
        })
        .collect();
    let profile = RadialField::from_real(g, &q)?;
    let result = GroundStateResult::assemble(p, profile, None, tol, flavor)?;
    Ok((result, history))
}

pub fn gradient_flow_optimizer(
    p: &PotentialParam,
    g: RadialGrid,
    tol: f64,
    flavor: Flavor,
) -> Result<GroundStateResult> {
    gradient_flow_trace(p, g, tol, flavor).map(|x| x.0)
}

/// Four-point Lagrange interpolation of samples at `x_k = (k+1) h`; zero
/// beyond the last node.
fn lagrange4(y: &[f64], h: f64, x: f64) -> f64 {
    let n = y.len();
    let t = x / h - 1.0;
    if t > (n - 1) as f64 {
        return 0.0;
    }
    let i = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (t - (i + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += l * y[i + a];
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub c_constant: f64,
    pub energy_threshold: f64,
    pub k_threshold: f64,
    pub flavor: Flavor,
}

pub fn thresholds_from_constant(c: f64, flavor: Flavor) -> Result<Thresholds> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("constant must be positive, got {c}")));
    }
    Ok(Thresholds {
        c_constant: c,
        energy_threshold: 8.0 / 27.0 / (c * c),
        k_threshold: 4.0 / 3.0 / c,
        flavor,
    })
}

pub fn thresholds_from(result: &GroundStateResult) -> Thresholds {
    result.thresholds()
}

/// Ground state behind the thresholds used for coupling `a`: for the general
/// flavor and `a > 0` this is the `a = 0` ground state.
pub fn threshold_ground_state(
    a: f64,
    flavor: Flavor,
    g: RadialGrid,
    tol: f64,
) -> Result<GroundStateResult> {
    let solve_at = if flavor == Flavor::General && a > 0.0 { 0.0 } else { a };
    solve_ground_state(&PotentialParam::new(solve_at)?, g, tol, flavor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `sqrt(M) sqrt(K) < K_threshold`.
    Below,
    /// `sqrt(M) sqrt(K) > K_threshold`.
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub y: f64,
    pub me_ratio: f64,
    /// Roots of `3y^2 - 2y^3 = 1 - delta` below and above 1.
    pub y_minus: f64,
    pub y_plus: f64,
    pub delta_prime: f64,
    pub branch: Branch,
    /// `kinetic - 3/4 l4` on the datum.
    pub virial_bracket: f64,
    /// Below branch: lower bound `c kinetic` with `c = delta'`.
    pub below_virial_lower: Option<f64>,
    /// Below branch: `(1/6 + delta'/3) kinetic`, a lower bound for the energy.
    pub below_energy_lower: Option<f64>,
    /// Above branch: margin `epsilon` and the value of `(1+eps) kinetic - 3/4 l4`.
    pub above_epsilon: Option<f64>,
    pub above_bracket: Option<f64>,
    /// Above branch: the guaranteed upper bound `-c < 0` for that bracket.
    pub above_upper: Option<f64>,
}

fn cubic_root(target: f64, lo: f64, hi: f64) -> f64 {
    let f = |y: f64| 3.0 * y * y - 2.0 * y.powi(3) - target;
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (f(mid) > 0.0) == (fa > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

pub fn coercivity_windows(u0: &Functionals, th: &Thresholds, delta: f64) -> Result<CoercivityReport> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    let me_ratio = u0.mass * u0.energy_a / th.energy_threshold;
    if me_ratio > 1.0 - delta + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "M E / E_threshold = {me_ratio} exceeds 1 - delta = {}",
            1.0 - delta
        )));
    }
    let y = u0.mass.sqrt() * u0.kinetic_a.sqrt() / th.k_threshold;
    if y == 1.0 && delta > 0.0 {
        return Err(Error::InvalidArgument(
            "datum sits exactly at the kinetic threshold with mass-energy below threshold".into(),
        ));
    }
    let y_minus = cubic_root(1.0 - delta, 0.0, 1.0);
    let y_plus = cubic_root(1.0 - delta, 1.0, 1.5);
    let branch = if y <= 1.0 { Branch::Below } else { Branch::Above };
    let bracket = u0.kinetic_a - 0.75 * u0.l4;
    let mut rep = CoercivityReport {
        y,
        me_ratio,
        y_minus,
        y_plus,
        delta_prime: 0.0,
        branch,
        virial_bracket: bracket,
        below_virial_lower: None,
        below_energy_lower: None,
        above_epsilon: None,
        above_bracket: None,
        above_upper: None,
    };
    match branch {
        Branch::Below => {
            let dp = 1.0 - y_minus;
            rep.delta_prime = dp;
            rep.below_virial_lower = Some(dp * u0.kinetic_a);
            rep.below_energy_lower = Some((1.0 / 6.0 + dp / 3.0) * u0.kinetic_a);
        }
        Branch::Above => {
            let dp = y_plus - 1.0;
            rep.delta_prime = dp;
            let q = (1.0 + dp).powi(2);
            let eps = 0.5 * (q - 1.0) / (2.0 * q);
            let c = th.c_constant;
            rep.above_epsilon = Some(eps);
            rep.above_bracket = Some((1.0 + eps) * u0.kinetic_a - 0.75 * u0.l4);
            rep.above_upper = Some((-8.0 * (q - 1.0) + 16.0 * eps * q) / (9.0 * c * c * u0.mass));
        }
    }
    Ok(rep)
}
