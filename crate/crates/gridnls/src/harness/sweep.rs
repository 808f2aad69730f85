//! Epsilon sweeps of grid ground states against a planar limit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::existence::{gaussian_starts, StartSettings};
use super::par_map;
use crate::energy::{EnergyParams, GridEnergy};
use crate::error::HarnessError;
use crate::extension::AffineExtension;
use crate::field::GridField;
use crate::flow::{minimize, SolveConfig, SolveResult, StopReason};
use crate::grid::{Grid, GridSpec};
use crate::periodic::{
    beta_for_theorem, build_cell, build_strip_set, materialize, TheoremCase, VertexSetSpec,
};
use crate::planar::{
    planar_ground_state, LimitCase, LimitKind, PlanarDiagnostics, PlanarField, PlanarSettings,
};

/// Which limit is probed, with the vertex set it starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepFamily {
    /// Doubly periodic `V`, limit on the whole plane.
    Plane { vset: VertexSetSpec },
    /// Singly periodic `V`, limit with a concentrated term on a line.
    Line { vset: VertexSetSpec },
    /// `V` thickened to the strip of half-width `r`.
    Strip { vset: VertexSetSpec, r: f64 },
}

impl SweepFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::Plane { .. } => "plane",
            SweepFamily::Line { .. } => "line",
            SweepFamily::Strip { .. } => "strip",
        }
    }

    fn base(&self) -> &VertexSetSpec {
        match self {
            SweepFamily::Plane { vset }
            | SweepFamily::Line { vset }
            | SweepFamily::Strip { vset, .. } => vset,
        }
    }

    fn limit(&self) -> Result<LimitCase, HarnessError> {
        let (kind, theta) = match self {
            SweepFamily::Plane { vset } => {
                if !matches!(vset, VertexSetSpec::Z2Periodic { .. }) {
                    return Err(HarnessError::Setup(
                        "the plane limit needs a doubly periodic vertex set".into(),
                    ));
                }
                (LimitKind::Plane, 0.0)
            }
            SweepFamily::Line { vset } => (LimitKind::Line, LimitCase::theta_of(period(vset)?)),
            SweepFamily::Strip { vset, r } => (
                LimitKind::Strip { r: *r },
                LimitCase::theta_of(period(vset)?),
            ),
        };
        Ok(LimitCase::new(kind, theta)?)
    }

    /// Vertex set and `(α, β)` on the grid of edge length `eps`.
    fn at(&self, eps: f64) -> Result<(VertexSetSpec, f64, f64), HarnessError> {
        let base = self.base();
        base.validate()?;
        let cell = build_cell(base)?;
        Ok(match self {
            SweepFamily::Plane { .. } => {
                let (a, b) = beta_for_theorem(TheoremCase::Z2, &cell, (0, 0), eps);
                (base.clone(), a, b)
            }
            SweepFamily::Line { .. } => {
                let (a, b) = beta_for_theorem(TheoremCase::ZLine, &cell, period(base)?, eps);
                (base.clone(), a, b)
            }
            SweepFamily::Strip { r, .. } => {
                let (a, b) = beta_for_theorem(TheoremCase::ZStrip, &cell, period(base)?, eps);
                (build_strip_set(base, *r, eps)?, a, b)
            }
        })
    }
}

fn period(vset: &VertexSetSpec) -> Result<(i64, i64), HarnessError> {
    match vset {
        VertexSetSpec::ZPeriodic { v, .. } => Ok(*v),
        _ => Err(HarnessError::Setup(
            "line and strip limits need a singly periodic vertex set".into(),
        )),
    }
}

/// Raster of the planar reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub h: f64,
    /// Half-width of the square box.
    pub box_radius: f64,
    /// Also solve at spacing `2h` and compare against the extrapolation
    /// `E_h + (E_h − E_{2h})/(2^k − 1)`, with `k = 2` for the plane and the
    /// line and `k = 1` for the strip, whose closed raster rows make the
    /// concentrated term first order in `h`.
    pub richardson: bool,
    pub planar: PlanarSettings,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings {
            h: 0.1,
            box_radius: 24.0,
            richardson: true,
            planar: PlanarSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub epsilons: Vec<f64>,
    /// Samples per edge, one entry per epsilon or a single entry for all.
    #[serde(default = "one_sample")]
    pub samples: Vec<usize>,
    /// Physical radius `W·ε` of the grid window, held fixed along the sweep.
    #[serde(default = "default_radius")]
    pub window_radius: f64,
    #[serde(default)]
    pub reference: ReferenceSettings,
    #[serde(default)]
    pub starts: StartSettings,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "one_worker")]
    pub workers: usize,
}

fn one_sample() -> Vec<usize> {
    vec![1]
}

fn default_radius() -> f64 {
    12.0
}

fn one_worker() -> usize {
    1
}

/// One epsilon of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub window: usize,
    pub samples: usize,
    /// `2μ/ε`
    pub grid_mass: f64,
    pub alpha: f64,
    pub beta_used: f64,
    /// `ε·E(u_ε)`
    pub scaled_energy: f64,
    pub planar_energy_ref: f64,
    /// `|scaled_energy − planar_energy_ref|`
    pub energy_gap: f64,
    pub h1_distance_aligned: f64,
    pub translation_x: f64,
    pub translation_y: f64,
    /// `ε‖u′‖²`
    pub scaled_kinetic: f64,
    /// `ε‖u‖_p^p`
    pub scaled_power: f64,
    /// `εβ Σ_V |u|^q`
    pub scaled_vertex_sum: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub kind: &'static str,
    pub theta: f64,
    /// Extrapolated when `richardson` is set, otherwise the energy at `h`.
    pub energy: f64,
    pub energy_h: f64,
    pub energy_2h: Option<f64>,
    pub lambda: f64,
    pub h: f64,
    pub half: usize,
    pub iterations: usize,
    pub converged: bool,
    pub boundary_ratio: f64,
    pub pde_residual: f64,
}

/// Trend test over the converged rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub rows_used: usize,
    pub gaps_strictly_decreasing: bool,
    /// Last energy gap relative to `|planar_energy_ref|`.
    pub final_relative_gap: f64,
    pub distances_decreasing: bool,
    /// Last H¹ distance over the one before it.
    pub last_distance_ratio: f64,
    pub pass: bool,
}

/// Largest admissible final relative energy gap.
pub const MAX_FINAL_GAP: f64 = 0.1;
/// Largest admissible ratio of the last two distances.
pub const MAX_LAST_RATIO: f64 = 0.8;

/// Rows that did not converge are skipped.
pub fn trend_verdict(rows: &[SweepRow]) -> TrendVerdict {
    let used: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
    let gaps_strictly_decreasing = used.windows(2).all(|w| w[1].energy_gap < w[0].energy_gap);
    let distances_decreasing = used
        .windows(2)
        .all(|w| w[1].h1_distance_aligned < w[0].h1_distance_aligned);
    let final_relative_gap = used
        .last()
        .map_or(f64::NAN, |r| r.energy_gap / r.planar_energy_ref.abs());
    let last_distance_ratio = match used.as_slice() {
        [.., a, b] => b.h1_distance_aligned / a.h1_distance_aligned,
        _ => f64::NAN,
    };
    TrendVerdict {
        rows_used: used.len(),
        gaps_strictly_decreasing,
        final_relative_gap,
        distances_decreasing,
        last_distance_ratio,
        pass: used.len() >= 2
            && gaps_strictly_decreasing
            && final_relative_gap <= MAX_FINAL_GAP
            && distances_decreasing
            && last_distance_ratio <= MAX_LAST_RATIO,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub family: &'static str,
    pub reference: ReferenceSummary,
    pub rows: Vec<SweepRow>,
    pub trend: TrendVerdict,
}

/// A report together with the states it was computed from.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub report: SweepReport,
    pub states: Vec<GridField>,
    /// The reference, rotated to the direction of `V`.
    pub reference: PlanarField,
}

/// Solves the planar reference once, then the grid problem at every
/// epsilon with mass `2μ/ε`, and compares `ε·E` and the aligned extension
/// with the reference.
pub fn sweep_epsilon(config: &SweepConfig) -> Result<SweepOutput, HarnessError> {
    if config.epsilons.is_empty() {
        return Err(HarnessError::EmptySweep);
    }
    if config.samples.len() != 1 && config.samples.len() != config.epsilons.len() {
        return Err(HarnessError::Setup(format!(
            "{} sample counts for {} epsilons",
            config.samples.len(),
            config.epsilons.len()
        )));
    }
    if !(config.window_radius > 0.0 && config.window_radius.is_finite()) {
        return Err(HarnessError::Setup(format!(
            "window radius {} must be positive",
            config.window_radius
        )));
    }
    config.solver.validate()?;
    let case = config.family.limit()?;
    let rs = &config.reference;
    let half = (rs.box_radius / rs.h).round().max(1.0) as usize;
    let planar = planar_ground_state(
        case.kind,
        config.p,
        config.q,
        config.mu,
        half,
        rs.h,
        &rs.planar,
        &config.solver,
    )?;
    let reference = planar.state.rotated(case.theta);
    let mut summary = reference_summary(&planar, case);
    if rs.richardson {
        let coarse_half = (planar.diagnostics.half / 2).max(1);
        let coarse = planar_ground_state(
            case.kind,
            config.p,
            config.q,
            config.mu,
            coarse_half,
            2.0 * rs.h,
            &PlanarSettings {
                max_doublings: 0,
                ..rs.planar
            },
            &config.solver,
        )?;
        summary.energy_2h = Some(coarse.energy);
        let order = if matches!(case.kind, LimitKind::Strip { .. }) {
            1
        } else {
            2
        };
        summary.energy =
            planar.energy + (planar.energy - coarse.energy) / ((1 << order) - 1) as f64;
    }

    let jobs: Vec<(f64, usize)> = config
        .epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            (
                eps,
                config.samples[if config.samples.len() == 1 { 0 } else { k }],
            )
        })
        .collect();
    let solved = par_map(&jobs, config.workers, |_, &(eps, m)| {
        sweep_row(config, eps, m, &reference, summary.energy)
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut states = Vec::with_capacity(jobs.len());
    for r in solved {
        let (row, state) = r?;
        rows.push(row);
        states.push(state);
    }
    let trend = trend_verdict(&rows);
    Ok(SweepOutput {
        report: SweepReport {
            family: config.family.name(),
            reference: summary,
            rows,
            trend,
        },
        states,
        reference,
    })
}

fn reference_summary(
    planar: &SolveResult<PlanarField, PlanarDiagnostics>,
    case: LimitCase,
) -> ReferenceSummary {
    ReferenceSummary {
        kind: case.kind.name(),
        theta: case.theta,
        energy: planar.energy,
        energy_h: planar.energy,
        energy_2h: None,
        lambda: planar.lambda,
        h: planar.state.h(),
        half: planar.diagnostics.half,
        iterations: planar.iterations,
        converged: planar.converged,
        boundary_ratio: planar.diagnostics.boundary_ratio,
        pde_residual: planar.diagnostics.pde_residual,
    }
}

fn sweep_row(
    config: &SweepConfig,
    eps: f64,
    samples: usize,
    reference: &PlanarField,
    reference_energy: f64,
) -> Result<(SweepRow, GridField), HarnessError> {
    let window = (config.window_radius / eps).round().max(1.0) as usize;
    let grid = Arc::new(Grid::build(GridSpec::new(eps, window, samples)?)?);
    let (vset, alpha, beta) = config.family.at(eps)?;
    let grid_mass = 2.0 * config.mu / eps;
    let params = EnergyParams::new(config.p, config.q, alpha, beta, grid_mass)?;
    let energy = GridEnergy::new(grid.clone(), params, materialize(&vset, &grid));
    let starts = gaussian_starts(
        &grid,
        &vset,
        &StartSettings {
            count: 1,
            ..config.starts
        },
    );
    let init = starts.into_iter().next().expect("one start");
    let out = minimize(&energy, grid_mass, init, &config.solver)?;
    let mut state = GridField::from_values(&grid, out.state).expect("solver keeps states finite");
    if state.vertex_values().iter().sum::<f64>() < 0.0 {
        state.scale(-1.0);
    }
    let parts = energy.parts(state.values());
    let ext = AffineExtension::new(&state);
    let x = ext.argmax_vertex();
    let raster = ext.rasterize(reference.half(), reference.h(), x);
    let diff: Vec<f64> = raster
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| a - b)
        .collect();
    let diff = PlanarField::from_values(reference.half(), reference.h(), diff);
    let h1 = (diff.mass() + diff.gradient_sq()).sqrt();
    let scaled_energy = eps * out.energy;
    let row = SweepRow {
        epsilon: eps,
        window,
        samples,
        grid_mass,
        alpha,
        beta_used: beta,
        scaled_energy,
        planar_energy_ref: reference_energy,
        energy_gap: (scaled_energy - reference_energy).abs(),
        h1_distance_aligned: h1,
        translation_x: x.0,
        translation_y: x.1,
        scaled_kinetic: eps * parts.kinetic,
        scaled_power: eps * parts.power,
        scaled_vertex_sum: eps * beta * parts.point,
        lambda: out.lambda,
        iterations: out.iterations,
        stop: out.stop,
        converged: out.converged,
    };
    Ok((row, state))
}
