use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use invsq_core::evolution::{
    detect_scattering, evolve, linear_step, rescale, strang_step, EvolveConfig, Outcome,
};
use invsq_core::functionals::mass;
use invsq_core::ground_state::{solve_ground_state, Flavor, GroundStateResult};
use invsq_core::virial::{d2v_truncated_terms, VirialWeight};
use invsq_core::{functionals_of, PotentialParam, RadialField, RadialGrid};

fn bump_field(g: RadialGrid, amp: f64, center: f64, width: f64, chirp: f64) -> RadialField {
    RadialField::from_fn(g, |r| Complex64::from_polar(amp * (-((r - center) / width).powi(2)).exp(), chirp * r))
}

fn soliton(a: f64, g: RadialGrid) -> GroundStateResult {
    solve_ground_state(&PotentialParam::new(a).unwrap(), g, 1e-6, Flavor::General).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_step_is_unitary_and_reversible(
        a in -0.24..2.0f64,
        dt in 1e-4..0.1f64,
        center in 0.0..6.0f64,
        width in 0.5..3.0f64,
        chirp in -2.0..2.0f64,
    ) {
        let g = RadialGrid::new(20.0, 1000).unwrap();
        let p = PotentialParam::new(a).unwrap();
        let u = bump_field(g, 1.0, center, width, chirp);
        let v = linear_step(&u, &p, dt).unwrap();
        prop_assert!((mass(&v) / mass(&u) - 1.0).abs() < 1e-12);
        let back = linear_step(&v, &p, -dt).unwrap();
        prop_assert!(back.l2_distance(&u) < 1e-11 * mass(&u).sqrt());
    }

    #[test]
    fn strang_step_conserves_mass(
        a in -0.24..2.0f64,
        dt in 1e-4..0.05f64,
        amp in 0.1..4.0f64,
        center in 0.0..6.0f64,
    ) {
        let g = RadialGrid::new(20.0, 1000).unwrap();
        let p = PotentialParam::new(a).unwrap();
        let u = bump_field(g, amp, center, 1.0, 0.5);
        let mut v = u.clone();
        for _ in 0..5 {
            v = strang_step(&v, &p, dt).unwrap();
        }
        prop_assert!((mass(&v) / mass(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_scales_mass_and_kinetic(lambda in 0.6..1.8f64, width in 0.8..2.0f64) {
        let g = RadialGrid::new(30.0, 6000).unwrap();
        let p = PotentialParam::new(0.0).unwrap();
        let u = bump_field(g, 1.0, 0.0, width, 0.0);
        let v = rescale(&u, lambda).unwrap();
        let (f, fv) = (functionals_of(&u, &p), functionals_of(&v, &p));
        prop_assert!((fv.mass * lambda / f.mass - 1.0).abs() < 1e-4);
        prop_assert!((fv.kinetic_a / (lambda * f.kinetic_a) - 1.0).abs() < 1e-3);
        prop_assert!((fv.l4 / (lambda * f.l4) - 1.0).abs() < 1e-3);
    }
}

#[test]
fn zero_field_is_a_fixed_point() {
    let g = RadialGrid::new(10.0, 200).unwrap();
    let p = PotentialParam::new(-0.1).unwrap();
    let z = RadialField::zeros(g);
    let mut v = z.clone();
    for _ in 0..10 {
        v = strang_step(&v, &p, 0.01).unwrap();
    }
    assert!(v.is_zero());
    let traj = evolve(&z, &p, &EvolveConfig::new(0.01, 0.1)).unwrap();
    assert_eq!(traj.outcome, Outcome::RanToHorizon);
    assert!(traj.final_state.is_zero());
}

#[test]
fn scattering_probe_vanishes_for_linear_flow() {
    let g = RadialGrid::new(30.0, 3000).unwrap();
    let p = PotentialParam::new(-0.1).unwrap();
    let u0 = bump_field(g, 1.0, 3.0, 1.0, 0.4);
    let dt = 1e-2;
    let mut u = u0.clone();
    let mut u1 = None;
    for step in 1..=100 {
        u = linear_step(&u, &p, dt).unwrap();
        if step == 40 {
            u1 = Some(u.clone());
        }
    }
    let rep = detect_scattering(&u1.unwrap(), &u, 0.4, 1.0, &p, dt, &u0, 1e-2).unwrap();
    assert!(rep.distance < 1e-12, "distance {}", rep.distance);
    assert!(rep.scattered);
}

#[test]
fn scattering_probe_sees_the_soliton() {
    let g = RadialGrid::new(30.0, 3000).unwrap();
    let p = PotentialParam::new(0.0).unwrap();
    let q = soliton(0.0, g).profile;
    let at = |t: f64| {
        let phase = Complex64::from_polar(1.0, t);
        RadialField::new(g, q.values().iter().map(|v| v * phase).collect()).unwrap()
    };
    let rep = detect_scattering(&at(1.0), &at(3.0), 1.0, 3.0, &p, 1e-3, &q, 1e-2).unwrap();
    assert!(rep.distance > 0.1, "distance {}", rep.distance);
    assert!(!rep.scattered);
    assert!(detect_scattering(&q, &q, 2.0, 1.0, &p, 1e-3, &q, 1e-2).is_err());
}

fn scaled_soliton_run(lambda: f64, dt: f64, t_final: f64, stride: usize) -> invsq_core::evolution::Trajectory {
    let g = RadialGrid::new(30.0, 3000).unwrap();
    let p = PotentialParam::new(-0.1).unwrap();
    let u0 = soliton(-0.1, g).profile.scaled(lambda);
    let mut cfg = EvolveConfig::new(dt, t_final);
    cfg.monitor_stride = stride;
    evolve(&u0, &p, &cfg).unwrap()
}

#[test]
fn subthreshold_run_conserves_mass_and_energy() {
    let traj = scaled_soliton_run(0.9, 1e-3, 0.5, 50);
    assert_eq!(traj.outcome, Outcome::RanToHorizon);
    assert_eq!(traj.refinements, 0);
    assert!(traj.max_drift(|s| s.f.mass) < 1e-11);
    let coarse = traj.max_drift(|s| s.f.energy_a);
    let fine = scaled_soliton_run(0.9, 5e-4, 0.5, 100).max_drift(|s| s.f.energy_a);
    assert!(coarse < 1e-4, "drift {coarse}");
    let ratio = coarse / fine;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn moment_derivatives_are_consistent() {
    let dt = 1e-3;
    let traj = scaled_soliton_run(0.9, dt, 0.2, 1);
    let s = &traj.samples;
    for k in (1..s.len() - 1).step_by(17) {
        let dv_fd = (s[k + 1].v - s[k - 1].v) / (2.0 * dt);
        let d2v_fd = (s[k + 1].dv - s[k - 1].dv) / (2.0 * dt);
        let scale = s[k].d2v.abs().max(1.0);
        assert!((dv_fd - s[k].dv).abs() < 1e-3 * scale, "t = {}: {dv_fd} vs {}", s[k].t, s[k].dv);
        assert!((d2v_fd - s[k].d2v).abs() < 2e-2 * scale, "t = {}: {d2v_fd} vs {}", s[k].t, s[k].d2v);
    }
}

#[test]
fn superthreshold_datum_collapses() {
    let g = RadialGrid::new(30.0, 6000).unwrap();
    let p = PotentialParam::new(0.0).unwrap();
    let u0 = soliton(0.0, g).profile.scaled(1.1);
    let traj = evolve(&u0, &p, &EvolveConfig::new(1e-3, 2.0)).unwrap();
    assert!(traj.initial().d2v < 0.0);
    match traj.outcome {
        Outcome::BlowupDetected { t, .. } => assert!(t < 1.0, "t = {t}"),
        other => panic!("expected collapse, got {other:?}"),
    }
    assert!(traj.final_dt < 1e-3);
}

#[test]
fn truncated_virial_matches_full_inside_radius() {
    let g = RadialGrid::new(40.0, 4000).unwrap();
    let p = PotentialParam::new(-0.1).unwrap();
    let u = bump_field(g, 1.0, 2.0, 0.5, 0.3);
    let t = d2v_truncated_terms(&u, &p, 7.0).unwrap();
    assert!(t.exterior_correction.abs() < 1e-12 * t.main.abs());
    assert!(t.remainder.abs() <= t.error_band);
    assert_relative_eq!(t.main, functionals_of(&u, &p).virial_bracket(), max_relative = 1e-14);
    assert!(d2v_truncated_terms(&u, &p, 10.0).is_err());
    assert!(VirialWeight::truncated(0.5).is_err());
}

#[test]
fn truncated_remainder_is_inside_its_band_on_the_soliton() {
    let g = RadialGrid::new(30.0, 6000).unwrap();
    let p = PotentialParam::new(0.0).unwrap();
    let q = soliton(0.0, g).profile;
    for radius in [1.5, 2.0, 3.0, 5.0] {
        let t = d2v_truncated_terms(&q, &p, radius).unwrap();
        assert!(t.remainder.abs() <= t.error_band, "R = {radius}");
    }
}
