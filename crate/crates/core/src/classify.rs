//! Scattering/blowup decision rule on initial data, its empirical check by
//! evolution, and parameter sweeps over `(a, lambda)` for data `lambda Q_a`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveConfig, Outcome};
use crate::functionals::{functionals_of, Functionals};
use crate::grid::{PotentialParam, RadialField, RadialGrid};
use crate::ground_state::{solve_ground_state, threshold_ground_state, Flavor, GroundStateResult, Thresholds};

/// Relative band around each threshold treated as equality.
pub const THRESHOLD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicted {
    Scatter,
    Blowup,
    NotApplicableAboveEnergyThreshold,
    InconsistentAtK,
}

impl Predicted {
    pub fn as_str(&self) -> &'static str {
        match self {
            Predicted::Scatter => "scatter",
            Predicted::Blowup => "blowup",
            Predicted::NotApplicableAboveEnergyThreshold => "not_applicable_above_energy_threshold",
            Predicted::InconsistentAtK => "inconsistent_at_K",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    Scattered,
    BlewUp,
    Undecided,
}

impl Observed {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observed::Scattered => "scattered",
            Observed::BlewUp => "blew_up",
            Observed::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantities {
    /// `M E_a`.
    pub me_product: f64,
    /// `sqrt(M) sqrt(kinetic_a)`.
    pub mk_product: f64,
    pub me_ratio: f64,
    pub mk_ratio: f64,
    pub thresholds: Thresholds,
    pub flavor: Flavor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub predicted: Predicted,
    pub observed: Option<Observed>,
    pub quantities: Quantities,
    /// Present once an experiment ran a prediction that admits one.
    pub agreement: Option<bool>,
    pub t_blowup: Option<f64>,
    pub scatter_distance: Option<f64>,
}

pub fn classify_functionals(f: &Functionals, th: &Thresholds) -> Classification {
    let me_product = f.mass * f.energy_a;
    let mk_product = f.mass.sqrt() * f.kinetic_a.sqrt();
    let me_ratio = me_product / th.energy_threshold;
    let mk_ratio = mk_product / th.k_threshold;
    let predicted = if me_ratio > 1.0 - THRESHOLD_TOL {
        Predicted::NotApplicableAboveEnergyThreshold
    } else if (mk_ratio - 1.0).abs() <= THRESHOLD_TOL {
        Predicted::InconsistentAtK
    } else if mk_ratio < 1.0 {
        Predicted::Scatter
    } else {
        Predicted::Blowup
    };
    Classification {
        predicted,
        observed: None,
        quantities: Quantities {
            me_product,
            mk_product,
            me_ratio,
            mk_ratio,
            thresholds: *th,
            flavor: th.flavor,
        },
        agreement: None,
        t_blowup: None,
        scatter_distance: None,
    }
}

pub fn classify(u0: &RadialField, p: &PotentialParam, th: &Thresholds) -> Classification {
    classify_functionals(&functionals_of(u0, p), th)
}

/// General-flavor (`C_0`) and radial-flavor classifications of one datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlavorComparison {
    pub general: Classification,
    pub radial: Classification,
    /// The two rules contradict each other, which no exact radial datum can
    /// do; on a grid it marks a discretization artifact.
    pub discretization_artifact: bool,
}

pub fn compare_flavors(u0: &RadialField, p: &PotentialParam, general: &Thresholds, radial: &Thresholds) -> FlavorComparison {
    let f = functionals_of(u0, p);
    let g = classify_functionals(&f, general);
    let r = classify_functionals(&f, radial);
    let decisive = |c: &Classification| matches!(c.predicted, Predicted::Scatter | Predicted::Blowup);
    let artifact = decisive(&g) && decisive(&r) && g.predicted != r.predicted;
    FlavorComparison {
        general: g,
        radial: r,
        discretization_artifact: artifact,
    }
}

/// Classify, then evolve when the rule makes a prediction.
pub fn run_experiment(u0: &RadialField, p: &PotentialParam, th: &Thresholds, cfg: &EvolveConfig) -> Result<Classification> {
    let mut c = classify(u0, p, th);
    if !matches!(c.predicted, Predicted::Scatter | Predicted::Blowup) {
        c.observed = Some(Observed::Undecided);
        return Ok(c);
    }
    let traj = evolve(u0, p, cfg)?;
    let observed = match traj.outcome {
        Outcome::BlowupDetected { t, .. } => {
            c.t_blowup = Some(t);
            Observed::BlewUp
        }
        Outcome::ScatteringDetected { .. } => Observed::Scattered,
        Outcome::RanToHorizon => Observed::Undecided,
    };
    c.scatter_distance = traj.scatter.map(|s| s.distance);
    c.agreement = Some(matches!(
        (c.predicted, observed),
        (Predicted::Scatter, Observed::Scattered) | (Predicted::Blowup, Observed::BlewUp)
    ));
    c.observed = Some(observed);
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n)
    }
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub a_values: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub grid: GridSpec,
    pub evolve: EvolveConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// `None`: general for `a <= 0`, radial for `a > 0`.
    #[serde(default)]
    pub flavor: Option<Flavor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub lambda: f64,
    pub me_ratio: Option<f64>,
    pub mk_ratio: Option<f64>,
    pub predicted: Option<Predicted>,
    pub observed: Option<Observed>,
    pub agreement: Option<bool>,
    pub t_blowup: Option<f64>,
    pub scatter_distance: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(a: f64, lambda: f64, e: &Error) -> Self {
        Self {
            a,
            lambda,
            me_ratio: None,
            mk_ratio: None,
            predicted: None,
            observed: None,
            agreement: None,
            t_blowup: None,
            scatter_distance: None,
            error: Some(e.to_string()),
        }
    }
}

fn flavor_for(a: f64, choice: Option<Flavor>) -> Flavor {
    choice.unwrap_or(if a > 0.0 { Flavor::Radial } else { Flavor::General })
}

/// Profile and thresholds for one coupling.
fn base_for(a: f64, cfg: &SweepConfig, g: RadialGrid) -> Result<(GroundStateResult, Thresholds)> {
    let p = PotentialParam::new(a)?;
    let flavor = flavor_for(a, cfg.flavor);
    let profile_flavor = if a > 0.0 { Flavor::Radial } else { flavor };
    let gs = solve_ground_state(&p, g, cfg.tol, profile_flavor)?;
    let th = if profile_flavor == flavor {
        gs.thresholds()
    } else {
        threshold_ground_state(a, flavor, g, cfg.tol)?.thresholds()
    };
    Ok((gs, th))
}

/// Runs every `(a, lambda)` cell on data `lambda Q_a`. Cells are independent
/// and run on the current rayon pool; rows come back in input order, with
/// per-cell errors recorded in the row.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.evolve.validate()?;
    if cfg.a_values.is_empty() || cfg.lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let g = cfg.grid.build()?;
    let bases: Vec<Result<(GroundStateResult, Thresholds)>> =
        cfg.a_values.par_iter().map(|&a| base_for(a, cfg, g)).collect();
    let cells: Vec<(usize, f64)> = (0..cfg.a_values.len())
        .flat_map(|i| cfg.lambdas.iter().map(move |&l| (i, l)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(i, lambda)| {
            let a = cfg.a_values[i];
            let (gs, th) = match &bases[i] {
                Ok(b) => b,
                Err(e) => return SweepRow::failed(a, lambda, e),
            };
            let cell = || -> Result<Classification> {
                if !(lambda > 0.0) {
                    return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
                }
                let p = PotentialParam::new(a)?;
                run_experiment(&gs.profile.scaled(lambda), &p, th, &cfg.evolve)
            };
            match cell() {
                Ok(c) => SweepRow {
                    a,
                    lambda,
                    me_ratio: Some(c.quantities.me_ratio),
                    mk_ratio: Some(c.quantities.mk_ratio),
                    predicted: Some(c.predicted),
                    observed: c.observed,
                    agreement: c.agreement,
                    t_blowup: c.t_blowup,
                    scatter_distance: c.scatter_distance,
                    error: None,
                },
                Err(e) => SweepRow::failed(a, lambda, &e),
            }
        })
        .collect())
}

/// Runs [`sweep`] on a dedicated pool of `jobs` threads.
pub fn sweep_with_jobs(cfg: &SweepConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    pool.install(|| sweep(cfg))
}
