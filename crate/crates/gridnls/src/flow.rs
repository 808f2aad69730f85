//! Mass-constrained minimization by a normalized gradient flow.
//!
//! Each step moves against the projected gradient (the gradient minus its
//! component along the current state) and rescales back onto the sphere
//! `‖u‖₂² = μ`. The step length is proposed by a Barzilai-Borwein rule and
//! then backtracked until the energy strictly decreases, so the accepted
//! energies form a strictly decreasing sequence.
//!
//! ```
//! use gridnls::flow::{minimize, project_mass, ConstrainedEnergy, SolveConfig};
//!
//! // E(u) = ½ Σ k·u_k² on the unit sphere: the minimizer sits on k = 1.
//! struct Diag(Vec<f64>);
//! impl ConstrainedEnergy for Diag {
//!     fn weights(&self) -> &[f64] { &self.0 }
//!     fn energy(&self, u: &[f64]) -> f64 {
//!         u.iter().enumerate().map(|(k, x)| 0.5 * (k + 1) as f64 * x * x).sum()
//!     }
//!     fn gradient(&self, u: &[f64], g: &mut [f64]) {
//!         for (k, (gk, x)) in g.iter_mut().zip(u).enumerate() {
//!             *gk = (k + 1) as f64 * x;
//!         }
//!     }
//! }
//!
//! let problem = Diag(vec![1.0; 4]);
//! let out = minimize(&problem, 1.0, vec![1.0; 4], &SolveConfig::default()).unwrap();
//! assert!(out.converged);
//! assert!((out.lambda + 1.0).abs() < 1e-8);
//! assert!((out.energy - 0.5).abs() < 1e-8);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ParamError, ParamViolation, SolveError};

/// An energy on a weighted `ℝⁿ`, with the gradient taken in the weighted
/// inner product `⟨a, b⟩ = Σ w_k a_k b_k`.
///
/// Dofs with zero gradient and zero initial value stay at zero, which is how
/// Dirichlet conditions are imposed.
pub trait ConstrainedEnergy {
    fn weights(&self) -> &[f64];
    fn energy(&self, u: &[f64]) -> f64;
    /// Writes the weighted gradient into `g`.
    fn gradient(&self, u: &[f64], g: &mut [f64]);
    /// Zeroes constrained dofs.
    fn constrain(&self, _u: &mut [f64]) {}

    fn dim(&self) -> usize {
        self.weights().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Previous step times `grow`.
    Grow,
    /// Barzilai-Borwein proposal, safeguarded by backtracking.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub step0: f64,
    pub shrink: f64,
    pub grow: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub energy_flat_tol: f64,
    /// Iterations over which the energy change is compared with `energy_flat_tol`.
    pub patience: usize,
    pub step_rule: StepRule,
    /// Keep the per-iteration energy and mass record.
    pub record_trace: bool,
    /// Stop as soon as the energy drops below this value.
    pub target_energy: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            step0: 1e-2,
            shrink: 0.5,
            grow: 1.5,
            grad_tol: 1e-9,
            max_iters: 200_000,
            energy_flat_tol: 1e-15,
            patience: 200,
            step_rule: StepRule::BarzilaiBorwein,
            record_trace: false,
            target_energy: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &'static str, value: f64, range: &'static str| {
            if !ok {
                v.push(ParamViolation {
                    field,
                    value,
                    range,
                });
            }
        };
        check(
            self.step0 > 0.0 && self.step0.is_finite(),
            "solver.step0",
            self.step0,
            "(0, inf)",
        );
        check(
            self.shrink > 0.0 && self.shrink < 1.0,
            "solver.shrink",
            self.shrink,
            "(0, 1)",
        );
        check(
            self.grow > 1.0 && self.grow.is_finite(),
            "solver.grow",
            self.grow,
            "(1, inf)",
        );
        check(
            self.grad_tol > 0.0,
            "solver.grad_tol",
            self.grad_tol,
            "(0, inf)",
        );
        check(
            self.max_iters > 0,
            "solver.max_iters",
            self.max_iters as f64,
            "[1, inf)",
        );
        check(
            self.energy_flat_tol > 0.0,
            "solver.energy_flat_tol",
            self.energy_flat_tol,
            "(0, inf)",
        );
        check(
            self.patience > 0,
            "solver.patience",
            self.patience as f64,
            "[1, inf)",
        );
        if v.is_empty() {
            Ok(())
        } else {
            Err(ParamError(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EnergyFlat,
    /// No step length down to roundoff decreases the energy.
    LineSearchStalled,
    /// The energy dropped below `target_energy`.
    TargetReached,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub energy: f64,
    pub mass_error: f64,
    pub step: f64,
}

/// Outcome of a constrained minimization. `D` carries problem-specific
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult<S, D> {
    pub state: S,
    pub energy: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub projected_grad_norm: f64,
    pub diagnostics: D,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

impl<S, D> SolveResult<S, D> {
    pub fn map<T, E>(
        self,
        state: impl FnOnce(S) -> T,
        diagnostics: impl FnOnce(&T, D) -> E,
    ) -> SolveResult<T, E> {
        let state = state(self.state);
        let diagnostics = diagnostics(&state, self.diagnostics);
        SolveResult {
            state,
            energy: self.energy,
            lambda: self.lambda,
            iterations: self.iterations,
            converged: self.converged,
            stop: self.stop,
            projected_grad_norm: self.projected_grad_norm,
            diagnostics,
            trace: self.trace,
        }
    }
}

pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Rescales `u` in place to weighted mass `mu`.
pub fn project_mass(weights: &[f64], u: &mut [f64], mu: f64) -> Result<(), SolveError> {
    let m = weighted_dot(weights, u, u);
    if !(m > 0.0) {
        return Err(SolveError::ZeroMass);
    }
    let c = (mu / m).sqrt();
    u.iter_mut().for_each(|x| *x *= c);
    Ok(())
}

/// `λ = −⟨∇E(u), u⟩ / ‖u‖²`.
pub fn lagrange_multiplier(weights: &[f64], u: &[f64], g: &[f64]) -> f64 {
    -weighted_dot(weights, g, u) / weighted_dot(weights, u, u)
}

const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e30;

/// Minimizes `problem.energy` on the sphere of weighted mass `mu`, starting
/// from `init`.
pub fn minimize<P: ConstrainedEnergy + ?Sized>(
    problem: &P,
    mu: f64,
    init: Vec<f64>,
    config: &SolveConfig,
) -> Result<SolveResult<Vec<f64>, ()>, SolveError> {
    config.validate()?;
    let w = problem.weights();
    let n = w.len();
    if init.len() != n {
        return Err(SolveError::Dimension {
            expected: n,
            got: init.len(),
        });
    }
    let mut u = init;
    problem.constrain(&mut u);
    project_mass(w, &mut u, mu)?;

    let mut g = vec![0.0; n];
    let mut pg = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut prev_u = vec![0.0; n];
    let mut prev_pg = vec![0.0; n];

    let project_gradient = |u: &[f64], g: &[f64], pg: &mut [f64]| {
        let c = weighted_dot(w, g, u) / weighted_dot(w, u, u);
        for ((p, gi), ui) in pg.iter_mut().zip(g).zip(u) {
            *p = gi - c * ui;
        }
        weighted_dot(w, pg, pg).sqrt()
    };

    let mut energy = problem.energy(&u);
    problem.gradient(&u, &mut g);
    let mut pg_norm = project_gradient(&u, &g, &mut pg);
    let mut step = config.step0;
    let mut history: Vec<f64> = vec![energy];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut have_prev = false;

    let below_target = |e: f64| config.target_energy.is_some_and(|t| e < t);
    let stop = loop {
        if below_target(energy) {
            break StopReason::TargetReached;
        }
        if pg_norm < config.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= config.max_iters {
            break StopReason::MaxIterations;
        }
        if have_prev && config.step_rule == StepRule::BarzilaiBorwein {
            let mut ss = 0.0;
            let mut sy = 0.0;
            let mut yy = 0.0;
            for k in 0..n {
                let s = u[k] - prev_u[k];
                let y = pg[k] - prev_pg[k];
                ss += w[k] * s * s;
                sy += w[k] * s * y;
                yy += w[k] * y * y;
            }
            step = if sy > 0.0 {
                // alternate the long and short proposals
                if iterations % 2 == 0 {
                    ss / sy
                } else {
                    sy / yy
                }
            } else {
                step * config.grow
            };
        }
        step = step.clamp(MIN_STEP, MAX_STEP);

        let accepted = loop {
            for k in 0..n {
                trial[k] = u[k] - step * pg[k];
            }
            project_mass(w, &mut trial, mu)?;
            let e = problem.energy(&trial);
            if e < energy {
                break Some(e);
            }
            step *= config.shrink;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(e) = accepted else {
            break StopReason::LineSearchStalled;
        };

        std::mem::swap(&mut prev_u, &mut u);
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut prev_pg, &mut pg);
        have_prev = true;
        energy = e;
        iterations += 1;
        problem.gradient(&u, &mut g);
        pg_norm = project_gradient(&u, &g, &mut pg);
        if config.record_trace {
            let m = weighted_dot(w, &u, &u);
            trace.push(TraceEntry {
                energy,
                mass_error: (m - mu).abs() / mu,
                step,
            });
        }
        if config.step_rule == StepRule::Grow {
            step *= config.grow;
        }
        history.push(energy);
        if history.len() > config.patience {
            let old = history[history.len() - 1 - config.patience];
            if old - energy < config.energy_flat_tol * energy.abs().max(1.0) {
                break StopReason::EnergyFlat;
            }
        }
    };

    let lambda = lagrange_multiplier(w, &u, &g);
    Ok(SolveResult {
        state: u,
        energy,
        lambda,
        iterations,
        converged: stop != StopReason::MaxIterations,
        stop,
        projected_grad_norm: pg_norm,
        diagnostics: (),
        trace,
    })
}

/// Outcome of probing the sign of the ground-state level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSign {
    Negative,
    Zero,
}

impl std::fmt::Display for LevelSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LevelSign::Negative => "negative",
            LevelSign::Zero => "zero",
        })
    }
}

/// A sign classification with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCertificate {
    pub sign: LevelSign,
    /// Lowest energy reached over all starts.
    pub energy: f64,
    pub neg_tol: f64,
    pub best_start: usize,
    pub start_energies: Vec<f64>,
    pub all_converged: bool,
}

/// How [`sign_of_level`] decides.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignOptions {
    /// Defaults to `1e-8·μ`.
    pub neg_tol: Option<f64>,
    /// End the probe once some start reaches an energy below `−neg_tol`;
    /// any such state already proves the level negative. Later starts are
    /// skipped.
    pub stop_at_certificate: bool,
}

/// Classifies the level as negative when some start reaches an energy below
/// `−neg_tol`.
pub fn sign_of_level<P: ConstrainedEnergy + ?Sized>(
    problem: &P,
    mu: f64,
    starts: Vec<Vec<f64>>,
    config: &SolveConfig,
    options: &SignOptions,
) -> Result<SignCertificate, SolveError> {
    let neg_tol = options.neg_tol.unwrap_or(1e-8 * mu);
    let mut config = *config;
    if options.stop_at_certificate {
        config.target_energy = Some(-neg_tol);
    }
    let mut start_energies = Vec::with_capacity(starts.len());
    let mut all_converged = true;
    for init in starts {
        let out = minimize(problem, mu, init, &config)?;
        all_converged &= out.converged;
        start_energies.push(out.energy);
        if options.stop_at_certificate && out.energy < -neg_tol {
            break;
        }
    }
    let (best_start, energy) = start_energies
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(SolveError::ZeroMass)?;
    let sign = if energy < -neg_tol {
        LevelSign::Negative
    } else {
        LevelSign::Zero
    };
    Ok(SignCertificate {
        sign,
        energy,
        neg_tol,
        best_start,
        start_energies,
        all_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        w: Vec<f64>,
        k: Vec<f64>,
    }

    impl ConstrainedEnergy for Quadratic {
        fn weights(&self) -> &[f64] {
            &self.w
        }
        fn energy(&self, u: &[f64]) -> f64 {
            0.5 * u.iter().zip(&self.k).map(|(x, k)| k * x * x).sum::<f64>()
        }
        fn gradient(&self, u: &[f64], g: &mut [f64]) {
            for ((g, x), (k, w)) in g.iter_mut().zip(u).zip(self.k.iter().zip(&self.w)) {
                *g = k * x / w;
            }
        }
    }

    #[test]
    fn projection_examples() {
        let w = [1.0, 2.0, 0.5];
        let mut u = vec![1.0, 0.5, 2.0];
        let mu = weighted_dot(&w, &u, &u);
        let before = u.clone();
        project_mass(&w, &mut u, mu).unwrap();
        assert_eq!(u, before);
        project_mass(&w, &mut u, mu / 4.0).unwrap();
        for (a, b) in u.iter().zip(&before) {
            assert!((a - b / 2.0).abs() < 1e-15);
        }
        assert_eq!(
            project_mass(&w, &mut [0.0; 3], 1.0),
            Err(SolveError::ZeroMass)
        );
    }

    #[test]
    fn finds_lowest_weighted_eigenpair() {
        let p = Quadratic {
            w: vec![1.0, 0.5, 2.0, 1.0],
            k: vec![3.0, 0.9, 5.0, 2.0],
        };
        let out = minimize(&p, 2.0, vec![1.0; 4], &SolveConfig::default()).unwrap();
        assert!(out.converged);
        // eigenvalues k/w: 3, 1.8, 2.5, 2
        assert!((out.lambda + 1.8).abs() < 1e-8);
        assert!((out.energy - 1.8).abs() < 1e-8);
    }

    #[test]
    fn trace_is_monotone_and_on_sphere() {
        let p = Quadratic {
            w: vec![1.0; 6],
            k: vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.5],
        };
        for rule in [StepRule::Grow, StepRule::BarzilaiBorwein] {
            let cfg = SolveConfig {
                record_trace: true,
                step_rule: rule,
                ..SolveConfig::default()
            };
            let out = minimize(&p, 3.0, vec![1.0; 6], &cfg).unwrap();
            assert!(out.converged);
            assert!(!out.trace.is_empty());
            let mut prev = f64::INFINITY;
            for t in &out.trace {
                assert!(t.energy < prev);
                assert!(t.mass_error < 1e-12);
                prev = t.energy;
            }
        }
    }

    #[test]
    fn critical_start_stays_put() {
        let p = Quadratic {
            w: vec![1.0; 3],
            k: vec![1.0, 2.0, 3.0],
        };
        let cfg = SolveConfig::default();
        let out = minimize(&p, 1.0, vec![1.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.stop, StopReason::GradientTolerance);
        assert_eq!(out.energy, 0.5);
    }

    #[test]
    fn max_iterations_is_reported() {
        let p = Quadratic {
            w: vec![1.0; 3],
            k: vec![1.0, 1.0 + 1e-3, 3.0],
        };
        let cfg = SolveConfig {
            max_iters: 2,
            step_rule: StepRule::Grow,
            ..SolveConfig::default()
        };
        let out = minimize(&p, 1.0, vec![1.0, 1.0, 1.0], &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.stop, StopReason::MaxIterations);
    }

    #[test]
    fn config_lists_every_violation() {
        let cfg = SolveConfig {
            shrink: 1.5,
            grow: 0.5,
            ..SolveConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.0.len(), 2);
    }

    #[test]
    fn kinetic_only_energy_is_never_negative() {
        let p = Quadratic {
            w: vec![1.0; 3],
            k: vec![1.0, 2.0, 3.0],
        };
        let starts = vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        let cert = sign_of_level(
            &p,
            1.0,
            starts,
            &SolveConfig::default(),
            &SignOptions::default(),
        )
        .unwrap();
        assert_eq!(cert.sign, LevelSign::Zero);
    }

    #[test]
    fn target_energy_stops_early() {
        let p = Quadratic {
            w: vec![1.0; 3],
            k: vec![1.0, 2.0, 3.0],
        };
        let cfg = SolveConfig {
            target_energy: Some(1.2),
            ..SolveConfig::default()
        };
        let out = minimize(&p, 1.0, vec![1.0, 1.0, 1.0], &cfg).unwrap();
        assert_eq!(out.stop, StopReason::TargetReached);
        assert!(out.energy < 1.2 && out.energy > 0.5);
    }
}
