//! Mass, kinetic energy, `L^4` norm, energy and the Gagliardo-Nirenberg quotient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PotentialParam, RadialField};
use crate::operator::{quadratic_form, QuadMode, RadialOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub mass: f64,
    pub kinetic_a: f64,
    pub l4: f64,
    pub energy_a: f64,
}

impl Functionals {
    pub fn from_parts(mass: f64, kinetic_a: f64, l4: f64) -> Self {
        Self {
            mass,
            kinetic_a,
            l4,
            energy_a: 0.5 * kinetic_a - 0.25 * l4,
        }
    }

    /// `l4 / (mass^{1/2} kinetic^{3/2})`.
    pub fn gn_quotient(&self) -> Result<f64> {
        if self.mass <= 0.0 || self.kinetic_a <= 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(self.l4 / (self.mass.sqrt() * self.kinetic_a.powf(1.5)))
    }

    /// `8 (kinetic - 3/4 l4)`, the second time derivative of the `|x|^2` moment.
    pub fn virial_bracket(&self) -> f64 {
        8.0 * (self.kinetic_a - 0.75 * self.l4)
    }
}

pub fn mass(u: &RadialField) -> f64 {
    let d: Vec<f64> = u.values().iter().map(|v| v.norm_sqr()).collect();
    u.grid().integrate(&d)
}

/// Riemann zeta function for real `s > 1` (Euler-Maclaurin with a 16-term head).
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0);
    const N: f64 = 16.0;
    // B_2k / (2k)!
    const B: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut acc: f64 = (1..16).map(|k| (k as f64).powf(-s)).sum();
    acc += N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
    let mut rising = s;
    let mut pow = N.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        acc += b * rising * pow;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        pow /= N * N;
    }
    acc
}

/// `zeta(-p)` for `p > 0` through the reflection formula.
pub fn zeta_negative(p: f64) -> f64 {
    use std::f64::consts::PI;
    2f64.powf(-p) * PI.powf(-p - 1.0) * (-0.5 * PI * p).sin() * libm::tgamma(1.0 + p) * zeta(1.0 + p)
}

/// Weight multiplier of the first node in the `l4` quadrature.
///
/// Near the origin `|u|^4 r^2 ~ r^{2 - 4 sigma}`; for `sigma > 0` the plain
/// trapezoid rule then carries an `O(h^{3 - 4 sigma})` error whose leading
/// term is `zeta(4 sigma - 2) h^{3 - 4 sigma}`. Scaling the first weight by
/// `1 - zeta(4 sigma - 2)` removes it. The factor is exactly 1 at `a = 0`.
pub fn l4_origin_factor(p: &PotentialParam) -> f64 {
    1.0 - zeta_negative(2.0 - 4.0 * p.sigma())
}

pub fn l4(u: &RadialField, p: &PotentialParam) -> f64 {
    let d: Vec<f64> = u.values().iter().map(|v| v.norm_sqr().powi(2)).collect();
    u.grid().integrate(&d) + (l4_origin_factor(p) - 1.0) * u.grid().weight(0) * d[0]
}

/// All static functionals. The kinetic term uses the assembled operator so
/// that the energy is exactly the Hamiltonian of the discrete flow.
pub fn functionals_of(u: &RadialField, p: &PotentialParam) -> Functionals {
    Functionals::from_parts(mass(u), quadratic_form(u, p, QuadMode::Operator), l4(u, p))
}

/// Same as [`functionals_of`] with a prebuilt operator (avoids reassembly in
/// time loops).
pub fn functionals_with(u: &RadialField, op: &RadialOperator) -> Functionals {
    Functionals::from_parts(mass(u), op.energy_form(&u.reduced()), l4(u, op.param()))
}

pub fn gn_quotient(u: &RadialField, p: &PotentialParam) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    functionals_of(u, p).gn_quotient()
}
