//! Radial discretization of three-dimensional fields.
//!
//! A radial function `u(|x|)` is sampled at the nodes `r_j = j h`, `j = 1..=n`,
//! so the origin is never evaluated and `r_max = n h` is the outermost node.
//! The evolution variable is the reduced field `w = r u`, which vanishes at the
//! origin and is held at zero on the outer node (homogeneous Dirichlet).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupling of the inverse-square potential together with its exponent
/// `sigma = 1/2 - sqrt(1/4 + a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParam {
    a: f64,
    sigma: f64,
}

impl PotentialParam {
    pub fn new(a: f64) -> Result<Self> {
        Ok(Self {
            a,
            sigma: sigma_of(a)?,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exponent of the reduced field near the origin: `w ~ r^gamma`, `gamma = 1 - sigma`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.sigma
    }
}

pub fn sigma_of(a: f64) -> Result<f64> {
    if !(a > -0.25) || !a.is_finite() {
        return Err(Error::CouplingOutOfRange(a));
    }
    Ok(0.5 - (0.25 + a).sqrt())
}

/// Uniform radial mesh. Nodes and weights are computed on demand, so the
/// grid itself is `Copy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n: usize,
    h: f64,
}

pub const MIN_NODES: usize = 4;

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {n}"
            )));
        }
        Ok(Self {
            n,
            h: r_max / n as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn r_max(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Radius of storage slot `k` (node `j = k + 1`).
    #[inline]
    pub fn r(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.r(k)).collect()
    }

    /// Trapezoidal weight of slot `k` for `∫_0^{r_max} f 4 pi r^2 dr`.
    /// The origin contributes nothing because of the `r^2` factor.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        let r = self.r(k);
        let w = 4.0 * PI * r * r * self.h;
        if k + 1 == self.n {
            0.5 * w
        } else {
            w
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.weight(k)).collect()
    }

    /// `∫ f dx` over the ball of radius `r_max` for radial samples `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        f.iter().enumerate().map(|(k, v)| self.weight(k) * v).sum()
    }

    /// Number of unknowns the linear algebra acts on (the last node is pinned).
    pub fn interior(&self) -> usize {
        self.n - 1
    }
}

/// Complex radial samples `u_j = u(r_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n()).map(|k| f(grid.r(k))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    pub fn from_real(grid: RadialGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Build from reduced samples `w = r u`.
    pub fn from_reduced(grid: RadialGrid, w: &[Complex64]) -> Result<Self> {
        if w.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: w.len(),
            });
        }
        let values = w.iter().enumerate().map(|(k, v)| v / grid.r(k)).collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn reduced(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.r(k))
            .collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm_sqr() == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Plain discrete L2 distance `(∫|u - v|^2)^{1/2}`.
    pub fn l2_distance(&self, other: &RadialField) -> f64 {
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .collect();
        self.grid.integrate(&d).sqrt()
    }

    /// Largest modulus on the outermost tenth of the grid relative to the peak.
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.peak();
        if peak == 0.0 {
            return 0.0;
        }
        let start = self.grid.n() - (self.grid.n() / 10).max(1);
        self.values[start..]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            / peak
    }
}
