//! Planar limit problems on a square raster.
//!
//! The energy
//!
//! ```text
//! E(u) = ½‖∇u‖² − (α/p)‖u‖_p^p − (β/q)·T(u)
//! ```
//!
//! is discretised with forward differences on the `(2N+1)²` raster of
//! spacing `h`, with zero values outside. The concentrated term `T` is
//!
//! - `Σ h²|u|^q` over the raster for the plane problem,
//! - `Σ_x h|u(x, 0)|^q` over the row `y = 0` for the line problem,
//! - `Σ_{|y| ≤ R} h²|u|^q` for the strip problem.
//!
//! All problems are solved with the line or strip horizontal; the angle of a
//! [`LimitCase`] only matters when comparing with a rotated grid.
//!
//! ```
//! use gridnls::planar::{planar_energy, LimitKind, PlanarField};
//!
//! let h = 0.1;
//! let mut u = PlanarField::zeros(3, h);
//! let c = u.index(0, 0);
//! u.values_mut()[c] = 1.0;
//! let e = planar_energy(&u, LimitKind::Plane, 3.0, 3.0);
//! assert!((e - (2.0 - 2.0 / 3.0 * h * h)).abs() < 1e-14);
//! ```

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::energy::signed_pow;
use crate::error::{ParamError, ParamViolation, PlanarError};
use crate::flow::{minimize, ConstrainedEnergy, SolveConfig, SolveResult};
use crate::power::Power;

/// Reflection residuals of a planar field; see [`PlanarField::asymmetry`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Asymmetry {
    pub diagonal: f64,
    pub mirror_x: f64,
    pub mirror_y: f64,
}

/// Values on the raster `center + h·(i, j)`, `|i|, |j| ≤ N`, stored row by
/// row from the bottom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarField {
    half: usize,
    h: f64,
    center: (f64, f64),
    #[serde(skip)]
    values: Vec<f64>,
}

impl PlanarField {
    pub fn zeros(half: usize, h: f64) -> Self {
        let side = 2 * half + 1;
        PlanarField {
            half,
            h,
            center: (0.0, 0.0),
            values: vec![0.0; side * side],
        }
    }

    pub fn from_values(half: usize, h: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (2 * half + 1).pow(2), "raster size mismatch");
        PlanarField {
            half,
            h,
            center: (0.0, 0.0),
            values,
        }
    }

    pub fn with_center(mut self, center: (f64, f64)) -> Self {
        self.center = center;
        self
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn side(&self) -> usize {
        2 * self.half + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Storage index of raster point `(i, j)`.
    pub fn index(&self, i: i64, j: i64) -> usize {
        let n = self.half as i64;
        (j + n) as usize * self.side() + (i + n) as usize
    }

    /// Value at `(i, j)`, zero outside the raster.
    pub fn get(&self, i: i64, j: i64) -> f64 {
        let n = self.half as i64;
        if i.abs() > n || j.abs() > n {
            0.0
        } else {
            self.values[self.index(i, j)]
        }
    }

    /// Position of the point stored at `k`.
    pub fn position(&self, k: usize) -> (f64, f64) {
        let n = self.half as i64;
        let side = self.side();
        let (i, j) = ((k % side) as i64 - n, (k / side) as i64 - n);
        (
            self.center.0 + i as f64 * self.h,
            self.center.1 + j as f64 * self.h,
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Σ h²u²`.
    pub fn mass(&self) -> f64 {
        self.h * self.h * self.values.iter().map(|x| x * x).sum::<f64>()
    }

    /// `Σ h²u`.
    pub fn integral(&self) -> f64 {
        self.h * self.h * self.values.iter().sum::<f64>()
    }

    /// `Σ |D⁺u|²` over all forward differences, including those to the
    /// zero exterior. This is `‖∇_h u‖²` (the `h²` weight cancels).
    pub fn gradient_sq(&self) -> f64 {
        let n = self.half as i64;
        let mut s = 0.0;
        for j in -n - 1..=n {
            for i in -n - 1..=n {
                let u = self.get(i, j);
                let dx = self.get(i + 1, j) - u;
                let dy = self.get(i, j + 1) - u;
                s += dx * dx + dy * dy;
            }
        }
        s
    }

    /// Largest `|u|` on the outermost ring relative to `‖u‖∞`.
    pub fn boundary_ratio(&self) -> f64 {
        let n = self.half as i64;
        let mut b: f64 = 0.0;
        for k in -n..=n {
            for (i, j) in [(k, -n), (k, n), (-n, k), (n, k)] {
                b = b.max(self.get(i, j).abs());
            }
        }
        let m = self.max_abs();
        if m > 0.0 {
            b / m
        } else {
            0.0
        }
    }

    /// Largest differences under the reflections `(i, j) ↦ (j, i)`,
    /// `(−i, j)` and `(i, −j)` about the raster point of largest `|u|`,
    /// relative to `‖u‖∞`.
    pub fn asymmetry(&self) -> Asymmetry {
        let m = self.max_abs();
        if m == 0.0 {
            return Asymmetry::default();
        }
        let n = self.half as i64;
        let k = self.values.iter().position(|x| x.abs() == m).unwrap_or(0);
        let side = self.side() as i64;
        let (ci, cj) = (k as i64 % side - n, k as i64 / side - n);
        let mut a = Asymmetry::default();
        for j in -n..=n {
            for i in -n..=n {
                let u = self.get(i, j);
                let (di, dj) = (i - ci, j - cj);
                a.diagonal = a.diagonal.max((u - self.get(ci + dj, cj + di)).abs());
                a.mirror_x = a.mirror_x.max((u - self.get(ci - di, j)).abs());
                a.mirror_y = a.mirror_y.max((u - self.get(i, cj - dj)).abs());
            }
        }
        a.diagonal /= m;
        a.mirror_x /= m;
        a.mirror_y /= m;
        a
    }

    /// Bilinear interpolation at a physical point, zero outside.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = (x - self.center.0) / self.h;
        let fy = (y - self.center.1) / self.h;
        let (i, j) = (fx.floor(), fy.floor());
        let (s, t) = (fx - i, fy - j);
        let (i, j) = (i as i64, j as i64);
        (1.0 - s) * (1.0 - t) * self.get(i, j)
            + s * (1.0 - t) * self.get(i + 1, j)
            + (1.0 - s) * t * self.get(i, j + 1)
            + s * t * self.get(i + 1, j + 1)
    }

    /// The field rotated counterclockwise by `theta` about its center and
    /// resampled bilinearly on the same raster.
    pub fn rotated(&self, theta: f64) -> PlanarField {
        let (c, s) = (theta.cos(), theta.sin());
        let mut out = PlanarField::zeros(self.half, self.h).with_center(self.center);
        for k in 0..out.values.len() {
            let (x, y) = out.position(k);
            let (dx, dy) = (x - self.center.0, y - self.center.1);
            out.values[k] = self.sample(
                self.center.0 + c * dx + s * dy,
                self.center.1 - s * dx + c * dy,
            );
        }
        out
    }

    /// Writes the header `planar h=.. nx=.. ny=.. x0=.. y0=..` and the
    /// values as little-endian doubles, row by row.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        let side = self.side();
        let (x0, y0) = self.position(0);
        writeln!(
            out,
            "planar h={} nx={} ny={} x0={} y0={}",
            self.h, side, side, x0, y0
        )?;
        for x in &self.values {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitKind {
    Plane,
    Line,
    Strip { r: f64 },
}

impl LimitKind {
    pub fn name(&self) -> &'static str {
        match self {
            LimitKind::Plane => "plane",
            LimitKind::Line => "line",
            LimitKind::Strip { .. } => "strip",
        }
    }
}

/// A limit problem with the angle of its line or strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCase {
    pub kind: LimitKind,
    /// Angle in `(−π/2, π/2]`.
    pub theta: f64,
}

impl LimitCase {
    pub fn new(kind: LimitKind, theta: f64) -> Result<Self, ParamError> {
        let mut v = Vec::new();
        if let LimitKind::Strip { r } = kind {
            if !(r > 0.0 && r.is_finite()) {
                v.push(ParamViolation {
                    field: "limit.r",
                    value: r,
                    range: "(0, inf)",
                });
            }
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(theta > -half_pi && theta <= half_pi) {
            v.push(ParamViolation {
                field: "limit.theta",
                value: theta,
                range: "(-pi/2, pi/2]",
            });
        }
        if v.is_empty() {
            Ok(LimitCase { kind, theta })
        } else {
            Err(ParamError(v))
        }
    }

    /// Angle of the lattice direction `v`.
    pub fn theta_of(v: (i64, i64)) -> f64 {
        let t = (v.1 as f64).atan2(v.0 as f64);
        let pi = std::f64::consts::PI;
        if t > pi / 2.0 {
            t - pi
        } else if t <= -pi / 2.0 {
            t + pi
        } else {
            t
        }
    }
}

/// Energy of a planar field with unit coefficients.
pub fn planar_energy(u: &PlanarField, kind: LimitKind, p: f64, q: f64) -> f64 {
    PlanarProblem::new(kind, p, q, 1.0, 1.0, u.half, u.h).energy(&u.values)
}

/// `max_x |D⁺_y u(x,0) − D⁻_y u(x,0) + |u(x,0)|^{q−2}u(x,0)|`.
pub fn jump_residual(u: &PlanarField, q: f64) -> f64 {
    let n = u.half as i64;
    let h = u.h;
    (-n..=n)
        .map(|i| {
            let (a, b, c) = (u.get(i, -1), u.get(i, 0), u.get(i, 1));
            ((c - b) / h - (b - a) / h + signed_pow(b, q - 1.0)).abs()
        })
        .fold(0.0, f64::max)
}

/// Forward-difference energy on a fixed raster.
#[derive(Debug, Clone)]
pub struct PlanarProblem {
    pub kind: LimitKind,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    half: usize,
    h: f64,
    weights: Vec<f64>,
    /// Per-row weight of the concentrated term relative to `h²`.
    row_weight: Vec<f64>,
}

impl PlanarProblem {
    pub fn new(
        kind: LimitKind,
        p: f64,
        q: f64,
        alpha: f64,
        beta: f64,
        half: usize,
        h: f64,
    ) -> Self {
        let side = 2 * half + 1;
        let n = half as i64;
        let row_weight = (-n..=n)
            .map(|j| match kind {
                LimitKind::Plane => 1.0,
                LimitKind::Line => {
                    if j == 0 {
                        1.0 / h
                    } else {
                        0.0
                    }
                }
                LimitKind::Strip { r } => {
                    if (j as f64 * h).abs() <= r * (1.0 + 1e-12) {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        PlanarProblem {
            kind,
            p,
            q,
            alpha,
            beta,
            half,
            h,
            weights: vec![h * h; side * side],
            row_weight,
        }
    }

    /// Refuses exponents for which the level is `−∞` or not attained.
    pub fn check_attainment(
        kind: LimitKind,
        p: f64,
        q: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<(), PlanarError> {
        let in_range = |x: f64, hi: f64| x > 2.0 && x < hi;
        let (q_hi, reason) = match kind {
            LimitKind::Line => (3.0, "line problems need p in (2,4) and q in (2,3)"),
            _ => (4.0, "need p and q in (2,4)"),
        };
        let ok = (alpha == 0.0 || in_range(p, 4.0)) && (beta == 0.0 || in_range(q, q_hi));
        if ok {
            Ok(())
        } else {
            Err(PlanarError::Unattained {
                case: kind.name(),
                p,
                q,
                reason,
            })
        }
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn concentrated(&self, u: &[f64]) -> f64 {
        let side = 2 * self.half + 1;
        let mut s = 0.0;
        for (row, &rw) in u.chunks_exact(side).zip(&self.row_weight) {
            if rw != 0.0 {
                s += rw * {
                    let q = Power::new(self.q);
                    row.iter().map(|&x| q.abs(x)).sum::<f64>()
                };
            }
        }
        s * self.h * self.h
    }

    /// Largest EL residual `|−Δ_h u + λu − α|u|^{p−2}u − β·(concentrated)|`
    /// over rows carrying no concentrated term, divided by `‖u‖∞`.
    pub fn pde_residual(&self, u: &[f64], lambda: f64) -> f64 {
        let mut g = vec![0.0; u.len()];
        self.gradient(u, &mut g);
        let side = 2 * self.half + 1;
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut r: f64 = 0.0;
        for (j, (grow, urow)) in g.chunks_exact(side).zip(u.chunks_exact(side)).enumerate() {
            if self.row_weight[j] != 0.0 && self.kind == LimitKind::Line {
                continue;
            }
            for (a, b) in grow.iter().zip(urow) {
                r = r.max((a + lambda * b).abs());
            }
        }
        r / scale
    }
}

impl ConstrainedEnergy for PlanarProblem {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let side = 2 * self.half + 1;
        let mut kin = 0.0;
        for j in 0..side {
            let row = &u[j * side..(j + 1) * side];
            // horizontal differences including both ghost ends
            let mut prev = 0.0;
            for &x in row {
                kin += (x - prev) * (x - prev);
                prev = x;
            }
            kin += prev * prev;
            // vertical differences to the row above (ghost row after the last)
            if j + 1 < side {
                let up = &u[(j + 1) * side..(j + 2) * side];
                kin += row
                    .iter()
                    .zip(up)
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>();
            } else {
                kin += row.iter().map(|a| a * a).sum::<f64>();
            }
            if j == 0 {
                kin += row.iter().map(|a| a * a).sum::<f64>();
            }
        }
        let h2 = self.h * self.h;
        let power = if self.alpha == 0.0 {
            0.0
        } else {
            {
                let p = Power::new(self.p);
                h2 * u.iter().map(|&x| p.abs(x)).sum::<f64>()
            }
        };
        let conc = if self.beta == 0.0 {
            0.0
        } else {
            self.concentrated(u)
        };
        0.5 * kin - self.alpha / self.p * power - self.beta / self.q * conc
    }

    fn gradient(&self, u: &[f64], g: &mut [f64]) {
        let side = 2 * self.half + 1;
        let inv_h2 = 1.0 / (self.h * self.h);
        let p1 = Power::new(self.p - 1.0);
        let q1 = Power::new(self.q - 1.0);
        for j in 0..side {
            for i in 0..side {
                let k = j * side + i;
                let mut nb = 0.0;
                if i > 0 {
                    nb += u[k - 1];
                }
                if i + 1 < side {
                    nb += u[k + 1];
                }
                if j > 0 {
                    nb += u[k - side];
                }
                if j + 1 < side {
                    nb += u[k + side];
                }
                let x = u[k];
                let mut val = (4.0 * x - nb) * inv_h2;
                if self.alpha != 0.0 {
                    val -= self.alpha * p1.signed(x);
                }
                let rw = self.row_weight[j];
                if rw != 0.0 && self.beta != 0.0 {
                    val -= self.beta * rw * q1.signed(x);
                }
                g[k] = val;
            }
        }
    }
}

/// Diagnostics of a planar solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarDiagnostics {
    pub pde_residual: f64,
    /// Only for line problems.
    pub jump_residual: Option<f64>,
    pub boundary_ratio: f64,
    /// Times the box was doubled because the state had not decayed.
    pub box_doublings: usize,
    pub half: usize,
}

/// Resolution and box control for [`planar_ground_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarSettings {
    pub alpha: f64,
    pub beta: f64,
    /// Largest accepted `|u|` on the box boundary relative to `‖u‖∞`.
    pub boundary_tol: f64,
    pub max_doublings: usize,
    /// Width of the Gaussian start as a fraction of the box half-width.
    pub init_width: f64,
}

impl Default for PlanarSettings {
    fn default() -> Self {
        PlanarSettings {
            alpha: 1.0,
            beta: 1.0,
            boundary_tol: 1e-8,
            max_doublings: 3,
            init_width: 1.0 / 6.0,
        }
    }
}

/// Ground state at mass `mu` on the raster of half-size `half` and spacing
/// `h`, doubling the box while the state has not decayed at its edge.
#[allow(clippy::too_many_arguments)]
pub fn planar_ground_state(
    kind: LimitKind,
    p: f64,
    q: f64,
    mu: f64,
    half: usize,
    h: f64,
    settings: &PlanarSettings,
    config: &SolveConfig,
) -> Result<SolveResult<PlanarField, PlanarDiagnostics>, PlanarError> {
    PlanarProblem::check_attainment(kind, p, q, settings.alpha, settings.beta)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(PlanarError::Spacing(h));
    }
    if half == 0 {
        return Err(PlanarError::EmptyRaster);
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(ParamError(vec![ParamViolation {
            field: "energy.mu",
            value: mu,
            range: "(0, inf)",
        }])
        .into());
    }
    let mut half = half;
    let mut doublings = 0;
    loop {
        let problem = PlanarProblem::new(kind, p, q, settings.alpha, settings.beta, half, h);
        let width = settings.init_width * half as f64 * h;
        let n = half as i64;
        let mut init = Vec::with_capacity((2 * half + 1).pow(2));
        for j in -n..=n {
            for i in -n..=n {
                let r2 = ((i * i + j * j) as f64) * h * h;
                init.push((-r2 / (2.0 * width * width)).exp());
            }
        }
        let out = minimize(&problem, mu, init, config)?;
        let field = PlanarField::from_values(half, h, out.state.clone());
        let ratio = field.boundary_ratio();
        if ratio <= settings.boundary_tol || doublings >= settings.max_doublings {
            let lambda = out.lambda;
            let pde = problem.pde_residual(&out.state, lambda);
            return Ok(out.map(
                |s| PlanarField::from_values(half, h, s),
                |f, _| PlanarDiagnostics {
                    pde_residual: pde,
                    jump_residual: (kind == LimitKind::Line).then(|| jump_residual(f, q)),
                    boundary_ratio: ratio,
                    box_doublings: doublings,
                    half,
                },
            ));
        }
        half *= 2;
        doublings += 1;
    }
}
