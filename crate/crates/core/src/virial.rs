//! Virial moments `V(t; W) = ∫ |u|^2 W dx` and their time derivatives for
//! radial weights, both the full weight `|x|^2` and the truncated
//! `W_R(x) = R^2 phi(|x| / R)`.
//!
//! For radial `u` and `W`, the general identity
//!
//! ```text
//! V''(t) = ∫ -ΔΔW |u|^2 + 4 Re ū_j u_k W_jk + 4 a |u|^2 x·∇W / |x|^4 - |u|^4 ΔW
//! ```
//!
//! reduces to `Re ū_j u_k W_jk = |u_r|^2 W''` and `x·∇W/|x|^4 = W'/r^3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::functionals_of;
use crate::grid::{PotentialParam, RadialField};

/// Bridge polynomial in `t = x - 1` on `[1, BRIDGE_END]`, coefficients of `t^k`.
/// It continues `x^2` with matching value, slope, curvature and third
/// derivative, and reaches a plateau with vanishing first three derivatives.
const BRIDGE: [f64; 8] = [
    1.0,
    2.0,
    1.0,
    0.0,
    -0.377_625,
    0.140_637_5,
    -0.019_859_375,
    0.001,
];

/// Start of the plateau of `phi`.
pub const BRIDGE_END: f64 = 5.0;

/// `phi` and its first four radial derivatives at `x >= 0`.
pub fn phi_derivatives(x: f64) -> [f64; 5] {
    if x <= 1.0 {
        return [x * x, 2.0 * x, 2.0, 0.0, 0.0];
    }
    let t = x.min(BRIDGE_END) - 1.0;
    let mut out = [0.0; 5];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in (d..BRIDGE.len()).rev() {
            let falling: f64 = (0..d).map(|i| (k - i) as f64).product();
            acc = acc * t + BRIDGE[k] * falling;
        }
        *slot = acc;
        if x >= BRIDGE_END && d > 0 {
            *slot = 0.0;
        }
    }
    out
}

/// Plateau value `phi(x)` for `x >= BRIDGE_END`.
pub fn phi_plateau() -> f64 {
    phi_derivatives(BRIDGE_END)[0]
}

/// Radial weight of a virial moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VirialWeight {
    FullSquare,
    Truncated { radius: f64 },
}

/// `W`, `W'`, `W''`, `ΔW`, `ΔΔW` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightJet {
    pub w: f64,
    pub d1: f64,
    pub d2: f64,
    pub lap: f64,
    pub bilap: f64,
}

impl VirialWeight {
    pub fn truncated(radius: f64) -> Result<Self> {
        if !(radius > 1.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("truncation radius must exceed 1, got {radius}")));
        }
        Ok(Self::Truncated { radius })
    }

    pub fn jet(&self, r: f64) -> WeightJet {
        match *self {
            VirialWeight::FullSquare => WeightJet {
                w: r * r,
                d1: 2.0 * r,
                d2: 2.0,
                lap: 6.0,
                bilap: 0.0,
            },
            VirialWeight::Truncated { radius } => {
                let x = r / radius;
                let [p0, p1, p2, p3, p4] = phi_derivatives(x);
                let (d1, d2) = (radius * p1, p2);
                let lap = p2 + 2.0 * p1 / x;
                // Radial bilaplacian in 3D: f'''' + 4 f''' / r.
                let bilap = (p4 + 4.0 * p3 / x) / (radius * radius);
                WeightJet {
                    w: radius * radius * p0,
                    d1,
                    d2,
                    lap,
                    bilap,
                }
            }
        }
    }
}

/// Sup bounds of the bridge sampled finely: `(max |phi''|, max phi'/x, min phi')`.
pub fn bridge_bounds() -> (f64, f64, f64) {
    let mut hess: f64 = 0.0;
    let mut slope_ratio: f64 = 0.0;
    let mut min_slope = f64::INFINITY;
    let samples = 40_000;
    for i in 0..=samples {
        let x = 1e-6 + (BRIDGE_END + 1.0) * i as f64 / samples as f64;
        let d = phi_derivatives(x);
        hess = hess.max(d[2].abs());
        slope_ratio = slope_ratio.max(d[1] / x);
        min_slope = min_slope.min(d[1]);
    }
    (hess, slope_ratio, min_slope)
}

/// Constant of the truncated-virial remainder: `max(sup |ΔΔphi|, sup |6 - Δphi|)`.
pub fn remainder_constant() -> f64 {
    let mut c: f64 = 0.0;
    let samples = 40_000;
    for i in 0..=samples {
        let x = 1.0 + (BRIDGE_END - 1.0) * i as f64 / samples as f64;
        let d = phi_derivatives(x);
        let lap = d[2] + 2.0 * d[1] / x;
        c = c.max((d[4] + 4.0 * d[3] / x).abs()).max((6.0 - lap).abs());
    }
    c
}

pub fn moment(u: &RadialField, weight: &VirialWeight) -> f64 {
    let g = u.grid();
    let dens: Vec<f64> = (0..g.n())
        .map(|k| u.values()[k].norm_sqr() * weight.jet(g.r(k)).w)
        .collect();
    let total = g.integrate(&dens);
    if matches!(weight, VirialWeight::FullSquare) && total > 0.0 {
        let start = g.n() - (g.n() / 10).max(1);
        let outer: f64 = (start..g.n()).map(|k| g.weight(k) * dens[k]).sum();
        if outer > 1e-4 * total {
            log::warn!("outer tenth carries {:.2e} of the |x|^2 moment", outer / total);
        }
    }
    total
}

/// `∫ 2 Im(ū u_r) W' dx`, discretized as the exact time derivative of the
/// discrete moment under the discrete linear flow:
/// `(8 pi / h) Σ_m Im(w̄_m w_{m+1}) (W(r_{m+1}) - W(r_m))`.
pub fn dv_formula(u: &RadialField, weight: &VirialWeight) -> f64 {
    let g = u.grid();
    let w = u.reduced();
    let m = g.interior();
    let mut acc = 0.0;
    for k in 0..m.saturating_sub(1) {
        let dw = weight.jet(g.r(k + 1)).w - weight.jet(g.r(k)).w;
        acc += (w[k].conj() * w[k + 1]).im * dw;
    }
    8.0 * std::f64::consts::PI / g.h() * acc
}

/// `8 (kinetic - 3/4 l4)`.
pub fn d2v_full_formula(u: &RadialField, p: &PotentialParam) -> f64 {
    functionals_of(u, p).virial_bracket()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedTerms {
    pub main: f64,
    /// `∫_{r>R} 4 (W'' - 2)|u_r|^2 + 4 a |u|^2 (W'/r - 2) / r^2`.
    pub exterior_correction: f64,
    /// `∫_{r>R} -ΔΔW |u|^2 + (6 - ΔW)|u|^4`; with `main` and
    /// `exterior_correction` this reproduces `V''` exactly.
    pub remainder: f64,
    /// `C ∫_{r>=R} R^{-2}|u|^2 + |u|^4` with `C` from [`remainder_constant`].
    pub error_band: f64,
}

/// Radial derivative `u_r = (w' - w/r)/r`, with `w(0) = 0` closing the first
/// centered difference.
pub fn radial_derivative(u: &RadialField) -> Vec<num_complex::Complex64> {
    let g = u.grid();
    let n = g.n();
    let h = g.h();
    let w = u.reduced();
    (0..n)
        .map(|k| {
            let dw = if k == 0 {
                w[1] / (2.0 * h)
            } else if k + 1 == n {
                (3.0 * w[k] - 4.0 * w[k - 1] + w[k - 2]) / (2.0 * h)
            } else {
                (w[k + 1] - w[k - 1]) / (2.0 * h)
            };
            let r = g.r(k);
            (dw - w[k] / r) / r
        })
        .collect()
}

pub fn d2v_truncated_terms(u: &RadialField, p: &PotentialParam, radius: f64) -> Result<TruncatedTerms> {
    let weight = VirialWeight::truncated(radius)?;
    let g = u.grid();
    if BRIDGE_END * radius > g.r_max() {
        return Err(Error::InvalidArgument(format!(
            "truncation radius {radius} needs r_max >= {}",
            BRIDGE_END * radius
        )));
    }
    let main = d2v_full_formula(u, p);
    let ur = radial_derivative(u);
    let c = remainder_constant();
    let (mut ext, mut rem, mut band) = (0.0, 0.0, 0.0);
    for k in 0..g.n() {
        let r = g.r(k);
        if r < radius {
            continue;
        }
        let wk = g.weight(k);
        let u2 = u.values()[k].norm_sqr();
        band += wk * c * (u2 / (radius * radius) + u2 * u2);
        if r == radius {
            continue;
        }
        let j = weight.jet(r);
        ext += wk
            * (4.0 * (j.d2 - 2.0) * ur[k].norm_sqr() + 4.0 * p.a() * u2 * (j.d1 / r - 2.0) / (r * r));
        rem += wk * (-j.bilap * u2 + (6.0 - j.lap) * u2 * u2);
    }
    Ok(TruncatedTerms {
        main,
        exterior_correction: ext,
        remainder: rem,
        error_band: band,
    })
}
