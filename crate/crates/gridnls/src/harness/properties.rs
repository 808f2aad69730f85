//! Randomized and refinement checks of the norm inequalities and quadrature
//! comparisons that the limit arguments rely on.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::extension::AffineExtension;
use crate::field::GridField;
use crate::grid::{Grid, GridSpec};
use crate::periodic::{build_cell, materialize, Point, VertexSetSpec};

fn grid(eps: f64, radius: f64, samples: usize) -> Result<Arc<Grid>, HarnessError> {
    let window = (radius / eps).round().max(1.0) as usize;
    Ok(Arc::new(Grid::build(GridSpec::new(eps, window, samples)?)?))
}

/// Independent uniform values on `[−1, 1]`, zero on the window boundary.
fn rough_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridField {
    let mut u = GridField::zeros(grid);
    let nv = grid.n_vertices();
    for (k, x) in u.values_mut().iter_mut().enumerate() {
        if k >= nv || !grid.is_boundary(k) {
            *x = rng.gen_range(-1.0..1.0);
        }
    }
    u
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    a: f64,
    c: (f64, f64),
    s: f64,
}

/// Sum of one to four Gaussians with random signs, centres and widths.
fn smooth_profile(radius: f64, rng: &mut ChaCha8Rng) -> Vec<Bump> {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| Bump {
            a: rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            c: (
                rng.gen_range(-0.3..0.3) * radius,
                rng.gen_range(-0.3..0.3) * radius,
            ),
            s: rng.gen_range(0.05..0.15) * radius,
        })
        .collect()
}

fn eval_profile(bumps: &[Bump], x: f64, y: f64) -> f64 {
    bumps
        .iter()
        .map(|b| b.a * (-((x - b.c.0).powi(2) + (y - b.c.1).powi(2)) / (2.0 * b.s * b.s)).exp())
        .sum()
}

fn gn_ratio(u: &GridField, p: f64) -> Result<f64, HarnessError> {
    let lp = u.norm_r(p)?;
    let l2 = u.mass().sqrt();
    let d = u.derivative_sq().sqrt();
    Ok(lp / (l2.powf(0.5 + 1.0 / p) * d.powf(0.5 - 1.0 / p)))
}

/// `‖u‖_p / (‖u‖₂^{1/2+1/p} ‖u′‖₂^{1/2−1/p})` for `samples` random fields:
/// each rough field, each smooth profile, the profile scaled by 0.1 and 10,
/// and the profile dilated by ½ and 2.
pub fn gn_ratios(
    seed: u64,
    samples: usize,
    eps: f64,
    radius: f64,
    p: f64,
) -> Result<Vec<f64>, HarnessError> {
    let g = grid(eps, radius, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(6 * samples);
    for _ in 0..samples {
        out.push(gn_ratio(&rough_field(&g, &mut rng), p)?);
        let bumps = smooth_profile(radius, &mut rng);
        let base = GridField::restrict(&g, |x, y| eval_profile(&bumps, x, y));
        out.push(gn_ratio(&base, p)?);
        for c in [0.1, 10.0] {
            let mut v = base.clone();
            v.scale(c);
            out.push(gn_ratio(&v, p)?);
        }
        for lambda in [0.5, 2.0] {
            let v = GridField::restrict(&g, |x, y| eval_profile(&bumps, lambda * x, lambda * y));
            out.push(gn_ratio(&v, p)?);
        }
    }
    Ok(out)
}

/// `‖∇𝒜u‖² / (ε‖u′‖²)` over rough random fields.
pub fn extension_ratios(
    seed: u64,
    samples: usize,
    eps: f64,
    radius: f64,
) -> Result<Vec<f64>, HarnessError> {
    let g = grid(eps, radius, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples)
        .map(|_| {
            let u = rough_field(&g, &mut rng);
            let norms = AffineExtension::new(&u).planar_norms(&[]);
            norms.grad_l2_sq / (eps * u.derivative_sq())
        })
        .collect())
}

/// `‖(τ𝒜u)′‖² / (ε‖u′‖²)` along the line spanned by `v`, over rough random
/// fields.
pub fn trace_ratios(
    seed: u64,
    samples: usize,
    eps: f64,
    radius: f64,
    v: Point,
) -> Result<Vec<f64>, HarnessError> {
    let g = grid(eps, radius, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples)
        .map(|_| {
            let u = rough_field(&g, &mut rng);
            AffineExtension::new(&u).trace_derivative_sq(v) / (eps * u.derivative_sq())
        })
        .collect())
}

/// `|ε·(2·#Q₀/#V₀)·Σ_V |u|^q − ‖u‖_q^q|` for the Gaussian `e^{−|x|²}`
/// restricted to each grid.
pub fn discrepancy_sequence(
    vset: &VertexSetSpec,
    q: f64,
    epsilons: &[f64],
    radius: f64,
    samples: usize,
) -> Result<Vec<f64>, HarnessError> {
    let ratio = build_cell(vset)?.ratio();
    epsilons
        .iter()
        .map(|&eps| {
            let g = grid(eps, radius, samples)?;
            let u = GridField::restrict(&g, |x, y| (-(x * x + y * y)).exp());
            let vsum: f64 = materialize(vset, &g)
                .into_iter()
                .map(|v| u.vertex(v).abs().powf(q))
                .sum();
            Ok((eps * 2.0 * ratio * vsum - u.norm_r_pow(q)?).abs())
        })
        .collect()
}

/// `|‖𝒜u‖_r^r − (ε/2)‖u‖_{r,ε}^r|` for the Gaussian `e^{−|x|²}`, one entry
/// per epsilon.
pub fn norm_gaps(
    r: f64,
    epsilons: &[f64],
    radius: f64,
    samples: usize,
) -> Result<Vec<f64>, HarnessError> {
    epsilons
        .iter()
        .map(|&eps| {
            let g = grid(eps, radius, samples)?;
            let u = GridField::restrict(&g, |x, y| (-(x * x + y * y)).exp());
            let norms = AffineExtension::new(&u).planar_norms(&[r]);
            let planar = if r == 2.0 { norms.l2_sq } else { norms.lr[0].1 };
            Ok((planar - 0.5 * eps * u.norm_r_pow(r)?).abs())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertySettings {
    pub seed: u64,
    pub samples: usize,
    pub epsilons: Vec<f64>,
    /// Physical window radius of the random fields.
    pub radius: f64,
    pub p: f64,
    pub q: f64,
    pub directions: Vec<Point>,
    pub discrepancy_epsilons: Vec<f64>,
}

impl Default for PropertySettings {
    fn default() -> Self {
        PropertySettings {
            seed: 0,
            samples: 1000,
            epsilons: vec![1.0, 0.5, 0.25],
            radius: 4.0,
            p: 3.0,
            q: 2.5,
            directions: vec![(1, 0), (1, 1), (2, 1)],
            discrepancy_epsilons: vec![0.4, 0.2, 0.1],
        }
    }
}

/// One line of a property report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRow {
    pub check: String,
    pub parameter: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl PropertyRow {
    fn of(check: &str, parameter: String, xs: &[f64]) -> Self {
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        PropertyRow {
            check: check.to_string(),
            parameter,
            count: xs.len(),
            min,
            max,
            mean,
        }
    }
}

/// Runs every check and summarises each sample set by its range and mean.
/// Sequence-valued checks list one row per epsilon.
pub fn check_properties(settings: &PropertySettings) -> Result<Vec<PropertyRow>, HarnessError> {
    let s = settings;
    let mut rows = Vec::new();
    for (k, &eps) in s.epsilons.iter().enumerate() {
        let seed = s.seed.wrapping_add(k as u64);
        let gn = gn_ratios(seed, s.samples, eps, s.radius, s.p)?;
        rows.push(PropertyRow::of(
            "gagliardo_nirenberg_ratio",
            format!("eps={eps} p={}", s.p),
            &gn,
        ));
        let ext = extension_ratios(seed, s.samples, eps, s.radius)?;
        rows.push(PropertyRow::of(
            "extension_gradient_ratio",
            format!("eps={eps}"),
            &ext,
        ));
        for &v in &s.directions {
            let tr = trace_ratios(seed, s.samples, eps, s.radius, v)?;
            rows.push(PropertyRow::of(
                "trace_derivative_ratio",
                format!("eps={eps} v=({},{})", v.0, v.1),
                &tr,
            ));
        }
    }
    let disc = discrepancy_sequence(
        &VertexSetSpec::full_lattice(),
        s.q,
        &s.discrepancy_epsilons,
        6.0,
        3,
    )?;
    for (&eps, d) in s.discrepancy_epsilons.iter().zip(&disc) {
        rows.push(PropertyRow::of(
            "vertex_sum_discrepancy",
            format!("eps={eps} q={}", s.q),
            &[*d],
        ));
    }
    for r in [2.0, s.p] {
        let gaps = norm_gaps(r, &s.epsilons, 6.0, 1)?;
        for (&eps, d) in s.epsilons.iter().zip(&gaps) {
            rows.push(PropertyRow::of(
                "extension_norm_gap",
                format!("eps={eps} r={r}"),
                &[*d],
            ));
        }
    }
    Ok(rows)
}
