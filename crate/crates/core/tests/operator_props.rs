use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use invsq_core::operator::operator_for;
use invsq_core::{functionals_of, gn_quotient, quadratic_form, PotentialParam, QuadMode, RadialField, RadialGrid};

const R_MAX: f64 = 20.0;
const N: usize = 800;

/// Sum of Gaussian bumps `amp * exp(-(r - c)^2 / w^2)` with a linear chirp.
#[derive(Debug, Clone)]
struct Bumps(Vec<(f64, f64, f64, f64, f64)>);

impl Bumps {
    fn eval(&self, r: f64) -> Complex64 {
        self.0
            .iter()
            .map(|&(re, im, c, w, k)| Complex64::new(re, im) * (-((r - c) / w).powi(2)).exp() * Complex64::from_polar(1.0, k * r))
            .sum()
    }
}

fn bumps(min_center: f64) -> impl Strategy<Value = Bumps> {
    prop::collection::vec(
        (-2.0..2.0f64, -2.0..2.0f64, min_center..8.0f64, 0.8..2.5f64, -1.0..1.0f64),
        1..4,
    )
    .prop_filter("non-trivial amplitude", |v| v.iter().any(|b| b.0.abs() + b.1.abs() > 0.1))
    .prop_map(Bumps)
}

fn coupling() -> impl Strategy<Value = f64> {
    prop_oneof![-0.249..0.0f64, 0.0..3.0f64]
}

fn field(b: &Bumps) -> RadialField {
    RadialField::from_fn(RadialGrid::new(R_MAX, N).unwrap(), |r| b.eval(r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadratic_form_is_nonnegative(b in bumps(0.0), a in coupling()) {
        let u = field(&b);
        let p = PotentialParam::new(a).unwrap();
        let m = functionals_of(&u, &p).mass;
        for mode in [QuadMode::Direct, QuadMode::Shifted, QuadMode::Operator] {
            prop_assert!(quadratic_form(&u, &p, mode) >= -1e-8 * m);
        }
    }

    #[test]
    fn operator_is_symmetric(a in coupling(), seed in prop::collection::vec(-1.0..1.0f64, 2 * N)) {
        let op = operator_for(a, RadialGrid::new(R_MAX, N).unwrap()).unwrap();
        let m = op.dim();
        let (w, v) = (&seed[..m], &seed[N..N + m]);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let lhs = dot(&op.apply_real(w), v);
        let rhs = dot(w, &op.apply_real(v));
        let scale = dot(&op.apply_real(w), &op.apply_real(w)).sqrt() * dot(v, v).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn operator_and_direct_form_agree(b in bumps(2.5), a in coupling()) {
        let u = field(&b);
        let p = PotentialParam::new(a).unwrap();
        let direct = quadratic_form(&u, &p, QuadMode::Direct);
        let op = quadratic_form(&u, &p, QuadMode::Operator);
        prop_assert!((direct - op).abs() <= 2e-3 * direct, "direct {direct}, operator {op}");
    }

    #[test]
    fn direct_and_shifted_forms_agree_away_from_origin(b in bumps(3.0), a in coupling()) {
        let u = field(&b);
        let p = PotentialParam::new(a).unwrap();
        let direct = quadratic_form(&u, &p, QuadMode::Direct);
        let shifted = quadratic_form(&u, &p, QuadMode::Shifted);
        prop_assert!((direct - shifted).abs() <= 5e-3 * direct, "direct {direct}, shifted {shifted}");
    }

    #[test]
    fn energy_is_half_kinetic_minus_quarter_l4(b in bumps(0.0), a in coupling()) {
        let f = functionals_of(&field(&b), &PotentialParam::new(a).unwrap());
        prop_assert!((f.energy_a - (0.5 * f.kinetic_a - 0.25 * f.l4)).abs() <= 1e-12 * (f.kinetic_a + f.l4));
        prop_assert!(f.kinetic_a >= 0.0 && f.mass > 0.0 && f.l4 > 0.0);
    }

    #[test]
    fn quotient_is_amplitude_invariant(b in bumps(0.0), a in coupling(), alpha in 0.1..10.0f64) {
        let u = field(&b);
        let p = PotentialParam::new(a).unwrap();
        let j = gn_quotient(&u, &p).unwrap();
        let j_alpha = gn_quotient(&u.scaled(alpha), &p).unwrap();
        prop_assert!((j - j_alpha).abs() <= 1e-12 * j);
    }

    #[test]
    fn free_quotient_is_dilation_invariant(b in bumps(0.0), lambda in 0.5..2.0f64) {
        // u^λ(r) = λ u(λ r), sampled exactly.
        let g = RadialGrid::new(2.0 * R_MAX, 4 * N).unwrap();
        let u = RadialField::from_fn(g, |r| b.eval(r));
        let ul = RadialField::from_fn(g, |r| lambda * b.eval(lambda * r));
        let p = PotentialParam::new(0.0).unwrap();
        let (f, fl) = (functionals_of(&u, &p), functionals_of(&ul, &p));
        prop_assert!((fl.mass * lambda / f.mass - 1.0).abs() < 1e-6);
        prop_assert!((fl.kinetic_a / (lambda * f.kinetic_a) - 1.0).abs() < 1e-3);
        let (j, jl) = (gn_quotient(&u, &p).unwrap(), gn_quotient(&ul, &p).unwrap());
        prop_assert!((j - jl).abs() < 2e-3 * j, "J {j} vs {jl}");
    }
}

#[test]
fn gaussian_quotient_is_dilation_invariant() {
    let g = RadialGrid::new(12.0, 6000).unwrap();
    let p = PotentialParam::new(0.0).unwrap();
    let u = RadialField::from_real_fn(g, |r| (-r * r / 2.0).exp());
    let u2 = RadialField::from_real_fn(g, |r| 2.0 * (-2.0 * r * r).exp());
    let (f, f2) = (functionals_of(&u, &p), functionals_of(&u2, &p));
    assert_relative_eq!(f2.mass, f.mass / 2.0, max_relative = 1e-6);
    assert_relative_eq!(f2.kinetic_a, 2.0 * f.kinetic_a, max_relative = 1e-5);
    assert_relative_eq!(gn_quotient(&u2, &p).unwrap(), gn_quotient(&u, &p).unwrap(), max_relative = 1e-5);
    // Closed forms: mass π^{3/2}, kinetic (3/2) π^{3/2}, l4 (π/2)^{3/2}.
    let pi32 = std::f64::consts::PI.powf(1.5);
    assert_relative_eq!(f.mass, pi32, max_relative = 1e-6);
    assert_relative_eq!(f.kinetic_a, 1.5 * pi32, max_relative = 1e-5);
    assert_relative_eq!(f.l4, pi32 / 8f64.sqrt(), max_relative = 1e-6);
}

#[test]
fn inadmissible_couplings_are_rejected() {
    for a in [-0.25, -0.3, -1.0, f64::NAN] {
        assert!(PotentialParam::new(a).is_err(), "a = {a}");
    }
}
