//! Functional calculus of the discrete operator through its full
//! eigendecomposition: heat semigroup, heat-kernel Littlewood-Paley pieces,
//! square functions and the property battery built on them.
//!
//! Eigenvectors are orthonormal in the Euclidean product of the reduced
//! slots, which is the field `L^2` product up to the constant `4 pi h`, so
//! every ratio below is computed on reduced coefficients.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{PotentialParam, RadialField, RadialGrid};
use crate::operator::{quadratic_form, QuadMode, RadialOperator};
use crate::tridiag::{self, Eigen};

/// Eigenvalues below `-POSITIVITY_TOL` are a discretization failure.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Dyadic exponents of the partition window `2^-10 ..= 2^10`.
pub const DYADIC_MIN: i32 = -10;
pub const DYADIC_MAX: i32 = 10;

#[derive(Debug)]
pub struct SpectralData {
    param: PotentialParam,
    grid: RadialGrid,
    eigen: Eigen,
}

impl SpectralData {
    pub fn param(&self) -> &PotentialParam {
        &self.param
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        self.eigen.vector(k)
    }

    pub fn dim(&self) -> usize {
        self.eigen.n
    }

    /// Reduced eigenvector `k` as a field.
    pub fn mode(&self, k: usize) -> RadialField {
        let mut w: Vec<Complex64> = self.vector(k).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        w.push(Complex64::new(0.0, 0.0));
        RadialField::from_reduced(self.grid, &w).expect("dimension matches grid")
    }

    /// `c_k = <w, v_k>` for the reduced field.
    pub fn coefficients(&self, u: &RadialField) -> Result<Vec<Complex64>> {
        if u.grid() != &self.grid {
            return Err(Error::LengthMismatch {
                expected: self.grid.n(),
                got: u.grid().n(),
            });
        }
        let w = u.reduced();
        let m = self.dim();
        Ok((0..m)
            .map(|k| {
                self.vector(k)
                    .iter()
                    .zip(&w[..m])
                    .fold(Complex64::new(0.0, 0.0), |acc, (v, x)| acc + x * v)
            })
            .collect())
    }

    /// `Σ c_k v_k` back to a field.
    pub fn synthesize(&self, c: &[Complex64]) -> RadialField {
        let m = self.dim();
        let mut w = vec![Complex64::new(0.0, 0.0); m + 1];
        for (k, ck) in c.iter().enumerate() {
            if *ck == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (wi, vi) in w.iter_mut().zip(self.vector(k)) {
                *wi += ck * vi;
            }
        }
        RadialField::from_reduced(self.grid, &w).expect("dimension matches grid")
    }

    /// `m(L) u` for a real multiplier `m`.
    pub fn apply(&self, u: &RadialField, m: impl Fn(f64) -> f64) -> Result<RadialField> {
        let mut c = self.coefficients(u)?;
        for (ck, &lam) in c.iter_mut().zip(self.values()) {
            *ck *= m(lam);
        }
        Ok(self.synthesize(&c))
    }

    /// `||m(L) u||_{L^2}` without synthesis.
    pub fn multiplier_norm(&self, c: &[Complex64], m: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = c.iter().zip(self.values()).map(|(ck, &lam)| ck.norm_sqr() * m(lam).powi(2)).sum();
        (4.0 * PI * self.grid.h() * s).sqrt()
    }
}

type CacheKey = (u64, u64, usize);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<SpectralData>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<SpectralData>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Full eigendecomposition of the operator on `g`, cached per `(a, grid)`.
pub fn eigendecompose(p: &PotentialParam, g: RadialGrid) -> Result<Arc<SpectralData>> {
    let key = (p.a().to_bits(), g.h().to_bits(), g.n());
    if let Some(d) = cache().read().expect("spectral cache poisoned").get(&key) {
        return Ok(Arc::clone(d));
    }
    let op = RadialOperator::new(*p, g);
    let eigen = tridiag::eigendecompose(op.matrix());
    if let Some((index, &value)) = eigen.values.iter().enumerate().find(|(_, &v)| v < -POSITIVITY_TOL) {
        return Err(Error::NegativeEigenvalue { index, value });
    }
    let data = Arc::new(SpectralData {
        param: *p,
        grid: g,
        eigen,
    });
    let mut w = cache().write().expect("spectral cache poisoned");
    Ok(Arc::clone(w.entry(key).or_insert(data)))
}

fn spectral_for(u: &RadialField, p: &PotentialParam) -> Result<Arc<SpectralData>> {
    eigendecompose(p, *u.grid())
}

pub fn heat_apply(u: &RadialField, p: &PotentialParam, t: f64) -> Result<RadialField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("heat time must be non-negative, got {t}")));
    }
    spectral_for(u, p)?.apply(u, |lam| (-t * lam).exp())
}

/// `e^{-λ/N^2} - e^{-4λ/N^2}`.
pub fn lp_multiplier(n: f64, lam: f64) -> f64 {
    let x = lam / (n * n);
    (-x).exp() - (-4.0 * x).exp()
}

pub fn lp_project(u: &RadialField, p: &PotentialParam, n: f64) -> Result<RadialField> {
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency N must be positive, got {n}")));
    }
    spectral_for(u, p)?.apply(u, |lam| lp_multiplier(n, lam))
}

pub fn dyadic_window() -> Vec<f64> {
    (DYADIC_MIN..=DYADIC_MAX).map(|j| 2f64.powi(j)).collect()
}

/// `||Σ_N P_N u - u|| / ||u||` over the dyadic window.
pub fn partition_residual(u: &RadialField, p: &PotentialParam) -> Result<f64> {
    let sd = spectral_for(u, p)?;
    let c = sd.coefficients(u)?;
    let window = dyadic_window();
    let sum = |lam: f64| window.iter().map(|&n| lp_multiplier(n, lam)).sum::<f64>();
    Ok(sd.multiplier_norm(&c, |lam| sum(lam) - 1.0) / sd.multiplier_norm(&c, |_| 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub n: f64,
    /// `N ||P_N u|| / ||L^{1/2} P_N u||`.
    pub ratio: f64,
    /// `||P_N u|| / ||u||`.
    pub weight: f64,
}

/// Fraction of spectral mass left outside the Bernstein band on each side.
pub const BAND_TAIL: f64 = 5e-4;

/// `[λ_lo, λ_hi]` between the `BAND_TAIL` and `1 - BAND_TAIL` quantiles of
/// the spectral mass `|c_k|^2`.
pub fn spectral_band(sd: &SpectralData, c: &[Complex64]) -> (f64, f64) {
    let total: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    let mut acc = 0.0;
    let (mut lo, mut hi) = (None, sd.values()[sd.dim() - 1]);
    for (ck, &lam) in c.iter().zip(sd.values()) {
        acc += ck.norm_sqr();
        if lo.is_none() && acc >= BAND_TAIL * total {
            lo = Some(lam);
        }
        if acc >= (1.0 - BAND_TAIL) * total {
            hi = lam;
            break;
        }
    }
    (lo.unwrap_or(sd.values()[0]), hi)
}

/// Bernstein ratios for the dyadic `N` with `N^2` inside the spectral band of
/// `u`. The heat-kernel multiplier is not compactly supported, so for `N`
/// far above the content of `u` the piece `P_N u ≈ 3 N^{-2} L u` and the ratio
/// grows like `N`; such pieces say nothing about localization.
pub fn bernstein_rows(u: &RadialField, p: &PotentialParam) -> Result<Vec<BernsteinRow>> {
    let sd = spectral_for(u, p)?;
    let c = sd.coefficients(u)?;
    let total = sd.multiplier_norm(&c, |_| 1.0);
    if total == 0.0 {
        return Err(Error::ZeroField);
    }
    let (lo, hi) = spectral_band(&sd, &c);
    Ok(dyadic_window()
        .into_iter()
        .filter(|n| (lo..=hi).contains(&(n * n)))
        .map(|n| {
            let a = sd.multiplier_norm(&c, |l| lp_multiplier(n, l));
            let b = sd.multiplier_norm(&c, |l| l.max(0.0).sqrt() * lp_multiplier(n, l));
            BernsteinRow {
                n,
                ratio: n * a / b,
                weight: a / total,
            }
        })
        .collect())
}

/// `||(Σ_N N^{2s} |P_N u|^2)^{1/2}|| / ||L^{s/2} u||`. By Fubini the left side
/// is `(Σ_N N^{2s} ||P_N u||^2)^{1/2}`.
pub fn square_function_check(u: &RadialField, p: &PotentialParam, s: f64) -> Result<f64> {
    let sd = spectral_for(u, p)?;
    let c = sd.coefficients(u)?;
    let lhs: f64 = dyadic_window()
        .into_iter()
        .map(|n| n.powf(2.0 * s) * sd.multiplier_norm(&c, |l| lp_multiplier(n, l)).powi(2))
        .sum::<f64>()
        .sqrt();
    let rhs = sd.multiplier_norm(&c, |l| l.max(0.0).powf(0.5 * s));
    if rhs == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(lhs / rhs)
}

/// Closed form of [`square_function_check`] on a single eigenmode.
pub fn square_function_mode_ratio(lam: f64, s: f64) -> f64 {
    dyadic_window()
        .into_iter()
        .map(|n| n.powf(2.0 * s) * lp_multiplier(n, lam).powi(2))
        .sum::<f64>()
        .sqrt()
        / lam.powf(0.5 * s)
}

/// Heat semigroup applied to a unit point mass at node `source`:
/// `column[k] ≈ K_t(r_k, r_source)`.
pub fn heat_kernel_probe(p: &PotentialParam, g: RadialGrid, t: f64, source: usize) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("heat time must be positive, got {t}")));
    }
    if source + 1 >= g.n() {
        return Err(Error::InvalidArgument(format!("source node {source} is not interior")));
    }
    let mut delta = RadialField::zeros(g);
    delta.values_mut()[source] = Complex64::new(1.0 / g.weight(source), 0.0);
    Ok(heat_apply(&delta, p, t)?.real_parts())
}

/// Free radial heat kernel (spherical average of the Gaussian).
pub fn free_radial_kernel(t: f64, r: f64, s: f64) -> f64 {
    (4.0 * PI * t).powf(-1.5) * (t / (r * s)) * ((-(r - s).powi(2) / (4.0 * t)).exp() - (-(r + s).powi(2) / (4.0 * t)).exp())
}

/// Model two-sided bound shape, `(1 ∨ √t/r)^σ (1 ∨ √t/s)^σ` times the free
/// radial kernel.
pub fn kernel_model_shape(p: &PotentialParam, t: f64, r: f64, s: f64) -> f64 {
    let f = |x: f64| (t.sqrt() / x).max(1.0).powf(p.sigma());
    f(r) * f(s) * free_radial_kernel(t, r, s)
}

/// Range of `column / model shape` over nodes where the shape exceeds
/// `1e-8` of its maximum.
pub fn kernel_shape_window(p: &PotentialParam, g: RadialGrid, t: f64, column: &[f64], source: usize) -> (f64, f64) {
    let s = g.r(source);
    let shape: Vec<f64> = (0..g.n()).map(|k| kernel_model_shape(p, t, g.r(k), s)).collect();
    let top = shape.iter().cloned().fold(0.0, f64::max);
    shape
        .iter()
        .zip(column)
        .filter(|(m, _)| **m > 1e-8 * top)
        .map(|(m, c)| c / m)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Hardy constant for `||L^{1/2} u|| / ||∇u||`: the ratio lies in `[1/K, K]`.
pub fn sobolev_constant(a: f64) -> f64 {
    if a < 0.0 {
        1.0 / (1.0 - 4.0 * a.abs()).sqrt()
    } else {
        (1.0 + 4.0 * a).sqrt()
    }
}

/// `||L_a^{1/2} u|| / ||∇u||` with both forms from the assembled operators.
pub fn sobolev_ratio(u: &RadialField, p: &PotentialParam) -> Result<f64> {
    let free = PotentialParam::new(0.0)?;
    let num = quadratic_form(u, p, QuadMode::Operator);
    let den = quadratic_form(u, &free, QuadMode::Operator);
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok((num / den).sqrt())
}

/// Smooth test corpus for the battery. Every member vanishes to high order
/// at the origin, as functions in the form core of `L_a` do for every `a`.
pub fn smooth_corpus(g: RadialGrid) -> Vec<(&'static str, RadialField)> {
    vec![
        ("shell", RadialField::from_real_fn(g, |r| r * r * (-(r - 4.0).powi(2)).exp())),
        (
            "chirped_shell",
            RadialField::from_fn(g, |r| Complex64::from_polar(r * r * (-(r - 5.0).powi(2) / 2.0).exp(), 0.7 * r)),
        ),
        ("offset_gaussian", RadialField::from_real_fn(g, |r| (-(r - 6.0).powi(2)).exp())),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl PropertyCheck {
    fn new(name: impl Into<String>, value: f64, bound: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            bound: bound.into(),
            pass,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {limit:e}"), value <= limit)
    }

    fn within(name: impl Into<String>, lo_hi: (f64, f64), lo: f64, hi: f64) -> Self {
        let (a, b) = lo_hi;
        let value = if a < lo { a } else { b };
        Self::new(name, value, format!("in [{lo}, {hi}]"), a >= lo && b <= hi)
    }
}

fn rel_l2(x: &RadialField, y: &RadialField) -> f64 {
    x.l2_distance(y) / y.l2_distance(&RadialField::zeros(*y.grid())).max(f64::MIN_POSITIVE)
}

fn inner(x: &RadialField, y: &RadialField) -> Complex64 {
    let g = x.grid();
    let w = g.weights();
    x.values()
        .iter()
        .zip(y.values())
        .zip(&w)
        .fold(Complex64::new(0.0, 0.0), |acc, ((a, b), wt)| acc + a.conj() * b * wt)
}

/// The harmonic-analysis property battery at coupling `p` on grid `g`.
pub fn spectral_battery(p: &PotentialParam, g: RadialGrid) -> Result<Vec<PropertyCheck>> {
    let sd = eigendecompose(p, g)?;
    let corpus = smooth_corpus(g);
    let mut out = Vec::new();

    out.push(PropertyCheck::new(
        "positivity",
        sd.values()[0],
        format!(">= -{POSITIVITY_TOL:e}"),
        sd.values()[0] >= -POSITIVITY_TOL,
    ));

    let (mut semigroup, mut adjoint, mut commute, mut partition, mut contraction) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut bern = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sq0 = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sq1 = (f64::INFINITY, f64::NEG_INFINITY);
    let mut forms = 0.0f64;
    let mut sob = (f64::INFINITY, f64::NEG_INFINITY);
    let widen = |acc: (f64, f64), x: f64| (acc.0.min(x), acc.1.max(x));

    for (i, (_, u)) in corpus.iter().enumerate() {
        let (t1, t2) = (0.05, 0.2);
        let two = heat_apply(&heat_apply(u, p, t1)?, p, t2)?;
        semigroup = semigroup.max(rel_l2(&two, &heat_apply(u, p, t1 + t2)?));

        let v = &corpus[(i + 1) % corpus.len()].1;
        let lhs = inner(&heat_apply(u, p, t2)?, v);
        let rhs = inner(u, &heat_apply(v, p, t2)?);
        adjoint = adjoint.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));

        let pc = lp_project(&heat_apply(u, p, t1)?, p, 2.0)?;
        let cp = heat_apply(&lp_project(u, p, 2.0)?, p, t1)?;
        commute = commute.max(rel_l2(&pc, &cp));

        partition = partition.max(partition_residual(u, p)?);
        let c = sd.coefficients(u)?;
        let norm = sd.multiplier_norm(&c, |_| 1.0);
        for n in dyadic_window() {
            contraction = contraction.max(sd.multiplier_norm(&c, |l| lp_multiplier(n, l)) / norm);
        }

        for row in bernstein_rows(u, p)? {
            bern = widen(bern, row.ratio);
        }
        sq0 = widen(sq0, square_function_check(u, p, 0.0)?);
        sq1 = widen(sq1, square_function_check(u, p, 1.0)?);

        let d = quadratic_form(u, p, QuadMode::Direct);
        let s = quadratic_form(u, p, QuadMode::Shifted);
        forms = forms.max((d - s).abs() / s.abs());
        sob = widen(sob, sobolev_ratio(u, p)?);
    }

    out.push(PropertyCheck::at_most("semigroup_law", semigroup, 1e-10));
    out.push(PropertyCheck::at_most("self_adjointness", adjoint, 1e-10));
    out.push(PropertyCheck::at_most("lp_heat_commutation", commute, 1e-10));
    out.push(PropertyCheck::at_most("lp_partition_of_identity", partition, 1e-3));
    out.push(PropertyCheck::at_most("lp_contraction", contraction, 1.0));
    out.push(PropertyCheck::within("bernstein_s1", bern, 0.1, 10.0));
    out.push(PropertyCheck::within("square_function_s0", sq0, 0.1, 10.0));
    out.push(PropertyCheck::within("square_function_s1", sq1, 0.1, 10.0));
    out.push(PropertyCheck::at_most("form_direct_vs_shifted", forms, 1e-4));
    let k = sobolev_constant(p.a());
    // Small slack for the discrete forms.
    out.push(PropertyCheck::within("sobolev_equivalence", sob, 1.0 / k - 1e-6, k + 1e-6));

    let source = g.n() / 6;
    let column = heat_kernel_probe(p, g, 0.5, source)?;
    let top = column.iter().cloned().fold(0.0, f64::max);
    let low = column.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(PropertyCheck::new(
        "heat_kernel_positivity",
        low / top,
        ">= -1e-10",
        low >= -1e-10 * top,
    ));
    Ok(out)
}
