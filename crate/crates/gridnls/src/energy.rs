//! The grid energy
//!
//! ```text
//! E(u) = ½‖u′‖² − (α/p)‖u‖_p^p − (β/q) Σ_{v ∈ V} |u(v)|^q
//! ```
//!
//! with its gradient in the lumped inner product and the residuals of the
//! Euler-Lagrange system: `−u″ + λu = α|u|^{p−2}u` along edges, Kirchhoff
//! conditions at ordinary vertices and flux jumps `Σ u′_e(v) = −β|u(v)|^{q−2}u(v)`
//! at the vertices of `V`.
//!
//! ```
//! use std::sync::Arc;
//! use gridnls::energy::{EnergyParams, GridEnergy};
//! use gridnls::field::GridField;
//! use gridnls::grid::{Grid, GridSpec};
//!
//! let grid = Arc::new(Grid::new(GridSpec::new(1.0, 2, 1).unwrap()));
//! let params = EnergyParams::new(3.0, 3.0, 0.0, 1.0, 1.0).unwrap();
//! let origin = grid.vertex_index(0, 0).unwrap();
//! let energy = GridEnergy::new(grid.clone(), params, vec![origin]);
//! let mut u = GridField::zeros(&grid);
//! u.values_mut()[origin] = 2.0;
//! let parts = energy.parts(u.values());
//! assert!((parts.point_term(&params) + 8.0 / 3.0).abs() < 1e-15);
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ParamError, ParamViolation};
use crate::field::{lumped_weights, GridField};
use crate::flow::ConstrainedEnergy;
use crate::grid::{Direction, Grid};
use crate::periodic::{materialize, VertexSetSpec};
use crate::power::Power;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

impl EnergyParams {
    pub fn new(p: f64, q: f64, alpha: f64, beta: f64, mu: f64) -> Result<Self, ParamError> {
        let params = EnergyParams {
            p,
            q,
            alpha,
            beta,
            mu,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks `p ∈ (2, 6)`, `q ∈ (2, 4)`, `α, β ≥ 0`, `μ > 0`, reporting every
    /// violation.
    pub fn validate(&self) -> Result<(), ParamError> {
        let mut v = Vec::new();
        if !(self.p > 2.0 && self.p < 6.0) {
            v.push(ParamViolation {
                field: "energy.p",
                value: self.p,
                range: "(2, 6)",
            });
        }
        if !(self.q > 2.0 && self.q < 4.0) {
            v.push(ParamViolation {
                field: "energy.q",
                value: self.q,
                range: "(2, 4)",
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            v.push(ParamViolation {
                field: "energy.alpha",
                value: self.alpha,
                range: "[0, inf)",
            });
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            v.push(ParamViolation {
                field: "energy.beta",
                value: self.beta,
                range: "[0, inf)",
            });
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            v.push(ParamViolation {
                field: "energy.mu",
                value: self.mu,
                range: "(0, inf)",
            });
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ParamError(v))
        }
    }
}

/// Unweighted pieces of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    /// `‖u′‖²`
    pub kinetic: f64,
    /// `‖u‖_p^p`
    pub power: f64,
    /// `Σ_V |u(v)|^q`
    pub point: f64,
}

impl EnergyParts {
    pub fn point_term(&self, params: &EnergyParams) -> f64 {
        -params.beta / params.q * self.point
    }

    pub fn total(&self, params: &EnergyParams) -> f64 {
        0.5 * self.kinetic - params.alpha / params.p * self.power + self.point_term(params)
    }
}

/// Residuals of the Euler-Lagrange system at a state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElResidual {
    /// `max |−u″ + λu − α|u|^{p−2}u|` over edge samples, divided by `‖u‖∞`.
    pub pde_residual: f64,
    /// `max |Σ u′_e(v)|` over interior vertices outside `V`.
    pub kirchhoff_residual: f64,
    /// `max |Σ u′_e(v) + β|u(v)|^{q−2}u(v)|` over interior vertices of `V`.
    pub delta_residual: f64,
}

/// The energy on a fixed grid with a materialized vertex set.
#[derive(Debug, Clone)]
pub struct GridEnergy {
    grid: Arc<Grid>,
    params: EnergyParams,
    nonlinear: Vec<usize>,
    in_v: Vec<bool>,
    weights: Vec<f64>,
    boundary: Vec<usize>,
}

/// `|x|^e·sgn(x)`.
pub(crate) fn signed_pow(x: f64, e: f64) -> f64 {
    Power::new(e).signed(x)
}

impl GridEnergy {
    /// `nonlinear` lists vertex indices of `V` inside the window.
    pub fn new(grid: Arc<Grid>, params: EnergyParams, mut nonlinear: Vec<usize>) -> Self {
        nonlinear.sort_unstable();
        nonlinear.dedup();
        let mut in_v = vec![false; grid.n_vertices()];
        for &v in &nonlinear {
            in_v[v] = true;
        }
        let weights = lumped_weights(&grid);
        let boundary = (0..grid.n_vertices())
            .filter(|&v| grid.is_boundary(v))
            .collect();
        GridEnergy {
            grid,
            params,
            nonlinear,
            in_v,
            weights,
            boundary,
        }
    }

    pub fn from_spec(grid: Arc<Grid>, params: EnergyParams, vset: &VertexSetSpec) -> Self {
        let nonlinear = materialize(vset, &grid);
        Self::new(grid, params, nonlinear)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn nonlinear_vertices(&self) -> &[usize] {
        &self.nonlinear
    }

    pub fn parts(&self, u: &[f64]) -> EnergyParts {
        let kinetic = crate::field::derivative_sq(&self.grid, u);
        let (p, q) = (Power::new(self.params.p), Power::new(self.params.q));
        let power = if self.params.alpha == 0.0 {
            0.0
        } else {
            u.iter()
                .zip(&self.weights)
                .map(|(&x, w)| w * p.abs(x))
                .sum()
        };
        let point = self.nonlinear.iter().map(|&v| q.abs(u[v])).sum();
        EnergyParts {
            kinetic,
            power,
            point,
        }
    }

    pub fn energy_of(&self, u: &GridField) -> f64 {
        self.energy(u.values())
    }

    pub fn gradient_of(&self, u: &GridField) -> GridField {
        let mut g = vec![0.0; u.values().len()];
        self.gradient(u.values(), &mut g);
        GridField::from_values(u.grid(), g).expect("gradient of a finite field")
    }

    /// `λ = −⟨∇E(u), u⟩ / ‖u‖²`.
    pub fn lagrange_multiplier(&self, u: &GridField) -> Result<f64, FieldError> {
        let mass = u.mass();
        if !(mass > 0.0) {
            return Err(FieldError::ZeroMass);
        }
        let g = self.gradient_of(u);
        Ok(-u.inner(&g) / mass)
    }

    pub fn el_residual(&self, u: &GridField) -> ElResidual {
        let Ok(lambda) = self.lagrange_multiplier(u) else {
            return ElResidual::default();
        };
        let grid = &self.grid;
        let (p, q) = (self.params.p, self.params.q);
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let h = grid.spec().step();
        let vals = u.values();
        let scale = u.max_abs();
        let mut pde: f64 = 0.0;
        for (e, edge) in grid.edges().iter().enumerate() {
            let s = u.edge_samples(e);
            let m = s.len();
            for k in 0..m {
                let left = if k == 0 { vals[edge.tail] } else { s[k - 1] };
                let right = if k + 1 == m {
                    vals[edge.head]
                } else {
                    s[k + 1]
                };
                let upp = (left - 2.0 * s[k] + right) / (h * h);
                pde = pde.max((-upp + lambda * s[k] - alpha * signed_pow(s[k], p - 1.0)).abs());
            }
        }
        let mut kirchhoff: f64 = 0.0;
        let mut delta: f64 = 0.0;
        for (v, &uv) in vals.iter().enumerate().take(grid.n_vertices()) {
            if grid.is_boundary(v) {
                continue;
            }
            let mut flux = 0.0;
            for dir in Direction::ALL {
                let Some(e) = grid.edge_at(v, dir) else {
                    continue;
                };
                let s = u.edge_samples(e);
                let next = if dir.outgoing_from_tail() {
                    s[0]
                } else {
                    s[s.len() - 1]
                };
                flux += (next - uv) / h;
            }
            if self.in_v[v] {
                delta = delta.max((flux + beta * signed_pow(uv, q - 1.0)).abs());
            } else {
                kirchhoff = kirchhoff.max(flux.abs());
            }
        }
        ElResidual {
            pde_residual: if scale > 0.0 { pde / scale } else { 0.0 },
            kirchhoff_residual: kirchhoff,
            delta_residual: delta,
        }
    }
}

impl ConstrainedEnergy for GridEnergy {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.parts(u).total(&self.params)
    }

    fn gradient(&self, u: &[f64], g: &mut [f64]) {
        let grid = &self.grid;
        let h = grid.spec().step();
        let nv = grid.n_vertices();
        let m = grid.samples();
        let inv_h = 1.0 / h;
        g.iter_mut().for_each(|x| *x = 0.0);
        // stiffness action, one chain of m + 1 intervals per edge
        for (e, edge) in grid.edges().iter().enumerate() {
            let base = nv + e * m;
            let mut prev_idx = edge.tail;
            for k in 0..=m {
                let idx = if k == m { edge.head } else { base + k };
                let d = (u[idx] - u[prev_idx]) * inv_h;
                g[idx] += d;
                g[prev_idx] -= d;
                prev_idx = idx;
            }
        }
        let p1 = Power::new(self.params.p - 1.0);
        let q1 = Power::new(self.params.q - 1.0);
        let alpha = self.params.alpha;
        for ((gk, &x), &w) in g.iter_mut().zip(u).zip(&self.weights) {
            *gk /= w;
            if alpha != 0.0 {
                *gk -= alpha * p1.signed(x);
            }
        }
        for &v in &self.nonlinear {
            g[v] -= self.params.beta * q1.signed(u[v]) / self.weights[v];
        }
        for &v in &self.boundary {
            g[v] = 0.0;
        }
    }

    fn constrain(&self, u: &mut [f64]) {
        for &v in &self.boundary {
            u[v] = 0.0;
        }
    }
}
