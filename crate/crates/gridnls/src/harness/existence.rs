//! Sign of the level, the threshold mass, phase tables and concavity.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::par_map;
use crate::energy::{ElResidual, EnergyParams, GridEnergy};
use crate::error::HarnessError;
use crate::field::GridField;
use crate::flow::{
    minimize, sign_of_level, LevelSign, SignCertificate, SignOptions, SolveConfig, SolveResult,
};
use crate::grid::{Grid, GridSpec};
use crate::periodic::{materialize, VertexSetSpec};

/// A grid energy with the mass left free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub grid: GridSpec,
    pub vset: VertexSetSpec,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

struct Prepared {
    grid: Arc<Grid>,
    nonlinear: Vec<usize>,
}

impl GridModel {
    fn prepare(&self) -> Result<Prepared, HarnessError> {
        self.vset.validate()?;
        let grid = Arc::new(Grid::build(self.grid)?);
        let nonlinear = materialize(&self.vset, &grid);
        Ok(Prepared { grid, nonlinear })
    }

    fn params(&self, mu: f64) -> Result<EnergyParams, HarnessError> {
        Ok(EnergyParams::new(
            self.p, self.q, self.alpha, self.beta, mu,
        )?)
    }

    /// The energy at mass `mu` on a freshly built grid.
    pub fn instantiate(&self, mu: f64) -> Result<GridEnergy, HarnessError> {
        let params = self.params(mu)?;
        let prep = self.prepare()?;
        Ok(GridEnergy::new(prep.grid, params, prep.nonlinear))
    }
}

impl Prepared {
    fn energy(&self, params: EnergyParams) -> GridEnergy {
        GridEnergy::new(self.grid.clone(), params, self.nonlinear.clone())
    }
}

/// Gaussian initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSettings {
    pub count: usize,
    /// Physical standard deviation; one sixth of the window radius if unset.
    pub width: Option<f64>,
    /// Relative amplitude of seeded uniform noise added to every start but
    /// the first.
    pub noise: f64,
    pub seed: u64,
}

impl Default for StartSettings {
    fn default() -> Self {
        StartSettings {
            count: 3,
            width: None,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Everything a sign probe needs besides the model and the mass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub starts: StartSettings,
    pub sign: SignOptions,
    pub solver: SolveConfig,
}

/// Gaussian bumps. The first two sit on the point of `V` nearest the origin
/// (the origin itself when `V` misses the window), the second four times
/// narrower; the others have the full width and are displaced by a quarter
/// of the window radius in turn east, north, west and south.
pub fn gaussian_starts(
    grid: &Arc<Grid>,
    vset: &VertexSetSpec,
    settings: &StartSettings,
) -> Vec<Vec<f64>> {
    let radius = grid.spec().half_width();
    let width = settings.width.unwrap_or(radius / 6.0);
    let c0 = materialize(vset, grid)
        .into_iter()
        .map(|v| grid.vertex_position(v))
        .min_by(|a, b| (a.0 * a.0 + a.1 * a.1).total_cmp(&(b.0 * b.0 + b.1 * b.1)))
        .unwrap_or((0.0, 0.0));
    let d = radius / 4.0;
    let shifts = [(d, 0.0), (0.0, d), (-d, 0.0), (0.0, -d)];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    (0..settings.count.max(1))
        .map(|k| {
            let (c, width) = match k {
                0 => (c0, width),
                1 => (c0, width / 4.0),
                _ => {
                    let (dx, dy) = shifts[(k - 2) % 4];
                    let scale = 1.0 + ((k - 2) / 4) as f64 * 0.5;
                    ((c0.0 + scale * dx, c0.1 + scale * dy), width)
                }
            };
            let bump = GridField::restrict(grid, |x, y| {
                let r2 = (x - c.0).powi(2) + (y - c.1).powi(2);
                (-r2 / (2.0 * width * width)).exp()
            });
            let mut values = bump.into_values();
            if k > 0 && settings.noise > 0.0 {
                for x in &mut values {
                    *x += settings.noise * rng.gen_range(-1.0..1.0);
                }
            }
            values
        })
        .collect()
}

fn best_of(
    energy: &GridEnergy,
    mu: f64,
    starts: Vec<Vec<f64>>,
    config: &SolveConfig,
) -> Result<SolveResult<GridField, ElResidual>, HarnessError> {
    let mut best: Option<SolveResult<Vec<f64>, ()>> = None;
    for init in starts {
        let out = minimize(energy, mu, init, config)?;
        if best.as_ref().is_none_or(|b| out.energy < b.energy) {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| HarnessError::Setup("no initial states".into()))?;
    let grid = energy.grid().clone();
    Ok(best.map(
        |s| GridField::from_values(&grid, s).expect("solver keeps states finite"),
        |f, _| energy.el_residual(f),
    ))
}

/// Lowest-energy state over the Gaussian starts, with its Euler-Lagrange
/// residuals.
pub fn grid_ground_state(
    model: &GridModel,
    mu: f64,
    starts: &StartSettings,
    config: &SolveConfig,
) -> Result<SolveResult<GridField, ElResidual>, HarnessError> {
    let energy = model.instantiate(mu)?;
    let inits = gaussian_starts(energy.grid(), &model.vset, starts);
    best_of(&energy, mu, inits, config)
}

pub fn grid_sign(
    model: &GridModel,
    mu: f64,
    probe: &ProbeSettings,
) -> Result<SignCertificate, HarnessError> {
    let prep = model.prepare()?;
    sign_with(&prep, model, mu, probe)
}

fn sign_with(
    prep: &Prepared,
    model: &GridModel,
    mu: f64,
    probe: &ProbeSettings,
) -> Result<SignCertificate, HarnessError> {
    let energy = prep.energy(model.params(mu)?);
    let starts = gaussian_starts(&prep.grid, &model.vset, &probe.starts);
    Ok(sign_of_level(
        &energy,
        mu,
        starts,
        &probe.solver,
        &probe.sign,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub mu: f64,
    pub sign: LevelSign,
    pub energy: f64,
}

/// Bracket `[mu_lo, mu_hi]` on the threshold mass: every probe at or below
/// `mu_lo` came out zero, every probe at or above `mu_hi` negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub p: f64,
    pub q: f64,
    pub vset_kind: String,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub probes: Vec<Probe>,
    /// The lower endpoint was already negative, so the threshold is zero.
    pub zero_threshold: bool,
}

/// Bisects `[mu_lo, mu_hi]` `iters` times on the sign of the level.
///
/// A negative lower endpoint means the level is negative down to `mu_lo`;
/// the report then carries the bracket `[0, mu_lo]`. A zero upper endpoint
/// is an error and no bisection runs.
pub fn find_threshold(
    model: &GridModel,
    mu_lo: f64,
    mu_hi: f64,
    iters: usize,
    probe: &ProbeSettings,
) -> Result<ThresholdReport, HarnessError> {
    if !(mu_lo > 0.0 && mu_lo < mu_hi && mu_hi.is_finite()) {
        return Err(HarnessError::Setup(format!(
            "invalid mass bracket [{mu_lo}, {mu_hi}]"
        )));
    }
    let prep = model.prepare()?;
    let mut probes = Vec::new();
    let mut run = |mu: f64| -> Result<LevelSign, HarnessError> {
        let cert = sign_with(&prep, model, mu, probe)?;
        probes.push(Probe {
            mu,
            sign: cert.sign,
            energy: cert.energy,
        });
        Ok(cert.sign)
    };
    let mut report = ThresholdReport {
        p: model.p,
        q: model.q,
        vset_kind: model.vset.kind_name().to_string(),
        mu_lo,
        mu_hi,
        probes: Vec::new(),
        zero_threshold: false,
    };
    let lo_sign = run(mu_lo)?;
    if lo_sign == LevelSign::Negative {
        report.mu_lo = 0.0;
        report.mu_hi = mu_lo;
        report.zero_threshold = true;
        report.probes = probes;
        return Ok(report);
    }
    let hi_sign = run(mu_hi)?;
    if hi_sign == LevelSign::Zero {
        return Err(HarnessError::NoStraddle {
            lo: mu_lo,
            hi: mu_hi,
            lo_sign: lo_sign.to_string(),
            hi_sign: hi_sign.to_string(),
        });
    }
    let (mut lo, mut hi) = (mu_lo, mu_hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        match run(mid)? {
            LevelSign::Zero => lo = mid,
            LevelSign::Negative => hi = mid,
        }
    }
    report.mu_lo = lo;
    report.mu_hi = hi;
    report.probes = probes;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexFamily {
    Finite,
    Z,
    Z2,
}

impl From<&VertexSetSpec> for VertexFamily {
    fn from(v: &VertexSetSpec) -> Self {
        match v {
            VertexSetSpec::Finite { .. } => VertexFamily::Finite,
            VertexSetSpec::ZPeriodic { .. } => VertexFamily::Z,
            VertexSetSpec::Z2Periodic { .. } => VertexFamily::Z2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Negative,
    Zero,
    Undetermined,
}

/// Masses treated as "tiny" and "large" where the theory only says the
/// level vanishes below some unknown threshold and is negative above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticCutoffs {
    pub zero_below: f64,
    pub negative_above: f64,
}

impl Default for AnalyticCutoffs {
    fn default() -> Self {
        AnalyticCutoffs {
            zero_below: 1e-3,
            negative_above: 1e2,
        }
    }
}

/// Expected sign of the level. Finite sets: negative for `p < 4`; periodic
/// lines: negative for `p < 4` or `q < 3`; doubly periodic sets: always
/// negative. Otherwise the level vanishes for small masses and is negative
/// for large ones.
pub fn analytic_sign(
    family: VertexFamily,
    p: f64,
    q: f64,
    mu: f64,
    cutoffs: &AnalyticCutoffs,
) -> Expected {
    let always = match family {
        VertexFamily::Finite => p < 4.0,
        VertexFamily::Z => p < 4.0 || q < 3.0,
        VertexFamily::Z2 => true,
    };
    if always || mu >= cutoffs.negative_above {
        Expected::Negative
    } else if mu <= cutoffs.zero_below {
        Expected::Zero
    } else {
        Expected::Undetermined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub numeric: LevelSign,
    pub energy: f64,
    pub analytic: Expected,
    pub mismatch: bool,
}

/// Numeric and expected sign for every `(p, q, μ)`; `model.p` and `model.q`
/// are overridden per cell.
pub fn phase_table(
    model: &GridModel,
    p_list: &[f64],
    q_list: &[f64],
    mu_list: &[f64],
    cutoffs: &AnalyticCutoffs,
    probe: &ProbeSettings,
    workers: usize,
) -> Result<Vec<PhaseCell>, HarnessError> {
    let mut cells = Vec::new();
    for &p in p_list {
        for &q in q_list {
            for &mu in mu_list {
                EnergyParams::new(p, q, model.alpha, model.beta, mu)?;
                cells.push((p, q, mu));
            }
        }
    }
    let prep = model.prepare()?;
    let family = VertexFamily::from(&model.vset);
    par_map(&cells, workers, |_, &(p, q, mu)| {
        let m = GridModel {
            p,
            q,
            ..model.clone()
        };
        let cert = sign_with(&prep, &m, mu, probe)?;
        let analytic = analytic_sign(family, p, q, mu, cutoffs);
        let mismatch = match analytic {
            Expected::Negative => cert.sign != LevelSign::Negative,
            Expected::Zero => cert.sign != LevelSign::Zero,
            Expected::Undetermined => false,
        };
        Ok(PhaseCell {
            p,
            q,
            mu,
            numeric: cert.sign,
            energy: cert.energy,
            analytic,
            mismatch,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub mus: Vec<f64>,
    pub levels: Vec<f64>,
    pub converged: Vec<bool>,
    pub max_level: f64,
    /// Largest amount by which a level falls below the chord of its
    /// neighbours.
    pub worst_violation: f64,
    pub nonpositive: bool,
    pub concave: bool,
}

/// Computes the level at each mass and checks it is `≤ level_tol` and
/// concave along the sampled masses within `concavity_tol`.
pub fn concavity_check(
    model: &GridModel,
    mus: &[f64],
    level_tol: f64,
    concavity_tol: f64,
    starts: &StartSettings,
    config: &SolveConfig,
) -> Result<ConcavityReport, HarnessError> {
    if mus.is_empty() || mus.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(HarnessError::Setup(
            "masses must be non-empty and strictly increasing".into(),
        ));
    }
    let prep = model.prepare()?;
    let mut levels = Vec::with_capacity(mus.len());
    let mut converged = Vec::with_capacity(mus.len());
    for &mu in mus {
        let energy = prep.energy(model.params(mu)?);
        let inits = gaussian_starts(&prep.grid, &model.vset, starts);
        let out = best_of(&energy, mu, inits, config)?;
        levels.push(out.energy);
        converged.push(out.converged);
    }
    let mut worst = f64::NEG_INFINITY;
    for i in 1..mus.len().saturating_sub(1) {
        let t = (mus[i] - mus[i - 1]) / (mus[i + 1] - mus[i - 1]);
        let chord = (1.0 - t) * levels[i - 1] + t * levels[i + 1];
        worst = worst.max(chord - levels[i]);
    }
    let max_level = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConcavityReport {
        mus: mus.to_vec(),
        nonpositive: max_level <= level_tol,
        concave: worst <= concavity_tol,
        worst_violation: worst.max(0.0),
        max_level,
        levels,
        converged,
    })
}
