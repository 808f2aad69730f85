//! The run configuration and its validation.

use std::path::PathBuf;

use gridnls::energy::EnergyParams;
use gridnls::flow::{SignOptions, SolveConfig};
use gridnls::harness::{AnalyticCutoffs, PropertySettings, ReferenceSettings, StartSettings};
use gridnls::periodic::{Point, VertexSetSpec};
use gridnls::planar::{LimitKind, PlanarProblem, PlanarSettings};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveGrid,
    SolvePlanar,
    SweepEpsilon,
    FindThreshold,
    PhaseTable,
    CheckProperties,
}

/// How `α` and `β` are chosen for grid problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// Take `energy.alpha` and `energy.beta` as given.
    #[default]
    Explicit,
    /// `α = ½`, `β = ε·#Q₀/#V₀` for a doubly periodic set.
    Thm15,
    /// `α = ½`, `β = |v|/#V₀` for a singly periodic set.
    Thm16,
    /// As `thm15` with the cell of the base line; the vertex set is
    /// thickened to the strip of half-width `energy.strip_radius`.
    Thm17,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub epsilon: f64,
    pub window: usize,
    pub samples: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            epsilon: 1.0,
            window: 16,
            samples: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub beta_mode: BetaMode,
    pub strip_radius: Option<f64>,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            p: 2.5,
            q: 2.5,
            alpha: 1.0,
            beta: 1.0,
            mu: 1.0,
            beta_mode: BetaMode::Explicit,
            strip_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarSection {
    pub kind: LimitKind,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_box")]
    pub box_radius: f64,
    #[serde(default)]
    pub settings: PlanarSettings,
}

fn default_h() -> f64 {
    0.1
}

fn default_box() -> f64 {
    24.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Plane,
    Line,
    Strip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub family: FamilyKind,
    /// Strip half-width.
    #[serde(default)]
    pub r: Option<f64>,
    pub epsilons: Vec<f64>,
    #[serde(default = "one")]
    pub samples: Vec<usize>,
    #[serde(default = "default_radius")]
    pub window_radius: f64,
    #[serde(default)]
    pub reference: ReferenceSettings,
}

fn one() -> Vec<usize> {
    vec![1]
}

fn default_radius() -> f64 {
    12.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub mu_lo: f64,
    pub mu_hi: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
}

fn default_iters() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub p_list: Vec<f64>,
    pub q_list: Vec<f64>,
    pub mu_list: Vec<f64>,
    #[serde(default)]
    pub cutoffs: AnalyticCutoffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcavitySection {
    pub mus: Vec<f64>,
    #[serde(default = "default_level_tol")]
    pub level_tol: f64,
    #[serde(default = "default_concavity_tol")]
    pub concavity_tol: f64,
}

fn default_level_tol() -> f64 {
    1e-10
}

fn default_concavity_tol() -> f64 {
    1e-6
}

fn default_vset() -> VertexSetSpec {
    VertexSetSpec::finite(vec![(0, 0)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Overrides `starts.seed` and `properties.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "one_worker")]
    pub workers: usize,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_vset")]
    pub vertex_set: VertexSetSpec,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub starts: StartSettings,
    #[serde(default)]
    pub sign: SignOptions,
    #[serde(default)]
    pub planar: Option<PlanarSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub threshold: Option<ThresholdSection>,
    #[serde(default)]
    pub phase: Option<PhaseSection>,
    #[serde(default)]
    pub concavity: Option<ConcavitySection>,
    #[serde(default)]
    pub properties: Option<PropertySettings>,
}

fn one_worker() -> usize {
    1
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub value: String,
    pub allowed: String,
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, value: impl ToString, allowed: &str) {
        if !ok {
            self.0.push(Violation {
                field: field.into(),
                value: value.to_string(),
                allowed: allowed.into(),
            });
        }
    }

    fn positive(&mut self, field: &str, x: f64) {
        self.check(x > 0.0 && x.is_finite(), field, x, "(0, inf)");
    }

    fn positives(&mut self, field: &str, xs: &[f64]) {
        self.check(!xs.is_empty(), field, "[]", "non-empty list");
        for (k, &x) in xs.iter().enumerate() {
            self.positive(&format!("{field}[{k}]"), x);
        }
    }

    fn attainment(&mut self, kind: LimitKind, p: f64, q: f64, settings: &PlanarSettings) {
        if let Err(e) = PlanarProblem::check_attainment(kind, p, q, settings.alpha, settings.beta) {
            self.check(false, "energy", format!("p={p}, q={q}"), &e.to_string());
        }
    }
}

fn period(v: &VertexSetSpec) -> Option<Point> {
    match v {
        VertexSetSpec::ZPeriodic { v, .. } => Some(*v),
        _ => None,
    }
}

impl RunConfig {
    /// Checks every numeric field against the preconditions of the module
    /// that will consume it, collecting all violations.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut c = Checker(Vec::new());
        let g = &self.grid;
        c.positive("grid.epsilon", g.epsilon);
        c.check(g.window >= 1, "grid.window", g.window, "[1, inf)");
        c.check(g.samples >= 1, "grid.samples", g.samples, "[1, inf)");
        c.check(self.workers >= 1, "workers", self.workers, "[1, inf)");
        let e = &self.energy;
        if let Err(err) = EnergyParams::new(e.p, e.q, e.alpha, e.beta, e.mu) {
            for v in err.0 {
                c.check(false, v.field, v.value, v.range);
            }
        }
        if let Err(err) = self.solver.validate() {
            for v in err.0 {
                c.check(false, v.field, v.value, v.range);
            }
        }
        if let Err(err) = self.vertex_set.validate() {
            c.check(
                false,
                "vertex_set",
                self.vertex_set.kind_name(),
                &err.to_string(),
            );
        }
        c.check(
            self.starts.count >= 1,
            "starts.count",
            self.starts.count,
            "[1, inf)",
        );
        if let Some(w) = self.starts.width {
            c.positive("starts.width", w);
        }
        c.check(
            self.starts.noise >= 0.0 && self.starts.noise.is_finite(),
            "starts.noise",
            self.starts.noise,
            "[0, inf)",
        );
        if let Some(t) = self.sign.neg_tol {
            c.positive("sign.neg_tol", t);
        }
        let kind = self.vertex_set.kind_name();
        match e.beta_mode {
            BetaMode::Explicit => {}
            BetaMode::Thm15 => c.check(
                matches!(self.vertex_set, VertexSetSpec::Z2Periodic { .. }),
                "energy.beta_mode",
                "thm15",
                "needs a z2_periodic vertex set",
            ),
            BetaMode::Thm16 | BetaMode::Thm17 => c.check(
                period(&self.vertex_set).is_some(),
                "energy.beta_mode",
                kind,
                "needs a z_periodic vertex set",
            ),
        }
        if e.beta_mode == BetaMode::Thm17 {
            match e.strip_radius {
                Some(r) => c.positive("energy.strip_radius", r),
                None => c.check(
                    false,
                    "energy.strip_radius",
                    "missing",
                    "(0, inf) when beta_mode = thm17",
                ),
            }
        }
        let section = |c: &mut Checker, present: bool, name: &str| {
            c.check(present, name, "missing", "required by this command");
        };
        match self.command {
            Command::SolveGrid | Command::CheckProperties => {}
            Command::SolvePlanar => section(&mut c, self.planar.is_some(), "planar"),
            Command::SweepEpsilon => section(&mut c, self.sweep.is_some(), "sweep"),
            Command::FindThreshold => section(&mut c, self.threshold.is_some(), "threshold"),
            Command::PhaseTable => section(&mut c, self.phase.is_some(), "phase"),
        }
        if let Some(pl) = &self.planar {
            c.positive("planar.h", pl.h);
            c.positive("planar.box_radius", pl.box_radius);
            if let LimitKind::Strip { r } = pl.kind {
                c.positive("planar.kind.r", r);
            }
            if self.command == Command::SolvePlanar {
                c.attainment(pl.kind, e.p, e.q, &pl.settings);
            }
        }
        if let Some(sw) = &self.sweep {
            c.positives("sweep.epsilons", &sw.epsilons);
            c.check(
                sw.samples.len() == 1 || sw.samples.len() == sw.epsilons.len(),
                "sweep.samples",
                format!("{} entries", sw.samples.len()),
                "one entry or one per epsilon",
            );
            for (k, &m) in sw.samples.iter().enumerate() {
                c.check(m >= 1, &format!("sweep.samples[{k}]"), m, "[1, inf)");
            }
            c.positive("sweep.window_radius", sw.window_radius);
            c.positive("sweep.reference.h", sw.reference.h);
            c.positive("sweep.reference.box_radius", sw.reference.box_radius);
            let limit = match sw.family {
                FamilyKind::Plane => {
                    c.check(
                        matches!(self.vertex_set, VertexSetSpec::Z2Periodic { .. }),
                        "sweep.family",
                        "plane",
                        "needs a z2_periodic vertex set",
                    );
                    LimitKind::Plane
                }
                FamilyKind::Line => {
                    c.check(
                        period(&self.vertex_set).is_some(),
                        "sweep.family",
                        "line",
                        "needs a z_periodic vertex set",
                    );
                    LimitKind::Line
                }
                FamilyKind::Strip => {
                    c.check(
                        period(&self.vertex_set).is_some(),
                        "sweep.family",
                        "strip",
                        "needs a z_periodic vertex set",
                    );
                    let r = sw.r.unwrap_or(f64::NAN);
                    c.positive("sweep.r", r);
                    LimitKind::Strip { r }
                }
            };
            if self.command == Command::SweepEpsilon {
                c.attainment(limit, e.p, e.q, &sw.reference.planar);
            }
        }
        if let Some(t) = &self.threshold {
            c.positive("threshold.mu_lo", t.mu_lo);
            c.check(
                t.mu_hi > t.mu_lo && t.mu_hi.is_finite(),
                "threshold.mu_hi",
                t.mu_hi,
                "(mu_lo, inf)",
            );
        }
        if let Some(ph) = &self.phase {
            c.check(
                !ph.p_list.is_empty(),
                "phase.p_list",
                "[]",
                "non-empty list",
            );
            c.check(
                !ph.q_list.is_empty(),
                "phase.q_list",
                "[]",
                "non-empty list",
            );
            for (k, &p) in ph.p_list.iter().enumerate() {
                c.check(
                    p > 2.0 && p < 6.0,
                    &format!("phase.p_list[{k}]"),
                    p,
                    "(2, 6)",
                );
            }
            for (k, &q) in ph.q_list.iter().enumerate() {
                c.check(
                    q > 2.0 && q < 4.0,
                    &format!("phase.q_list[{k}]"),
                    q,
                    "(2, 4)",
                );
            }
            c.positives("phase.mu_list", &ph.mu_list);
        }
        if let Some(cv) = &self.concavity {
            c.positives("concavity.mus", &cv.mus);
            c.check(
                cv.mus.windows(2).all(|w| w[0] < w[1]),
                "concavity.mus",
                format!("{:?}", cv.mus),
                "strictly increasing",
            );
        }
        if let Some(pr) = &self.properties {
            c.check(
                pr.samples >= 1,
                "properties.samples",
                pr.samples,
                "[1, inf)",
            );
            c.positives("properties.epsilons", &pr.epsilons);
            c.positives("properties.discrepancy_epsilons", &pr.discrepancy_epsilons);
            c.positive("properties.radius", pr.radius);
            c.check(pr.p >= 1.0, "properties.p", pr.p, "[1, inf)");
            c.check(pr.q >= 1.0, "properties.q", pr.q, "[1, inf)");
        }
        if c.0.is_empty() {
            Ok(())
        } else {
            Err(c.0)
        }
    }
}
