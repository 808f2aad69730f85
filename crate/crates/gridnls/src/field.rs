//! Discrete functions on a grid.
//!
//! A [`GridField`] stores one value per vertex followed by the `m` interior
//! samples of every edge, so edge endpoints are shared and continuity at
//! vertices holds by construction. Integrals use the trapezoid rule along
//! each edge, which puts weight `h` on interior samples and `deg·h/2` on a
//! vertex of degree `deg`.
//!
//! ```
//! use std::sync::Arc;
//! use gridnls::field::GridField;
//! use gridnls::grid::{Grid, GridSpec};
//!
//! let grid = Arc::new(Grid::new(GridSpec::new(0.5, 2, 3).unwrap()));
//! let u = GridField::restrict(&grid, |x, _| x);
//! let v = grid.vertex_index(2, 1).unwrap();
//! assert_eq!(u.vertex(v), 1.0);
//! ```

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use crate::error::FieldError;
use crate::grid::{Grid, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Trapezoid weight of every degree of freedom.
pub fn lumped_weights(grid: &Grid) -> Vec<f64> {
    let h = grid.spec().step();
    let mut w = Vec::with_capacity(grid.spec().n_dofs());
    w.extend((0..grid.n_vertices()).map(|v| grid.degree(v) as f64 * h / 2.0));
    w.resize(grid.spec().n_dofs(), h);
    w
}

/// Index of interior sample `k` of edge `e`.
pub fn sample_index(grid: &Grid, e: usize, k: usize) -> usize {
    grid.n_vertices() + e * grid.samples() + k
}

impl GridField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridField {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.spec().n_dofs()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.spec().n_dofs();
        if values.len() != expected {
            return Err(FieldError::Length {
                expected,
                got: values.len(),
            });
        }
        if let Some(d) = values.iter().position(|x| !x.is_finite()) {
            return Err(FieldError::NonFinite(d));
        }
        Ok(GridField {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every vertex and edge sample point.
    pub fn restrict(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.spec().n_dofs());
        values.extend((0..grid.n_vertices()).map(|v| {
            let (x, y) = grid.vertex_position(v);
            f(x, y)
        }));
        for e in 0..grid.n_edges() {
            for k in 0..grid.samples() {
                let (x, y) = grid.sample_position(e, k);
                values.push(f(x, y));
            }
        }
        GridField {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
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

    pub fn vertex_values(&self) -> &[f64] {
        &self.values[..self.grid.n_vertices()]
    }

    pub fn vertex(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn edge_samples(&self, e: usize) -> &[f64] {
        let m = self.grid.samples();
        let start = self.grid.n_vertices() + e * m;
        &self.values[start..start + m]
    }

    /// `‖u‖_r^r` by the trapezoid rule.
    pub fn norm_r_pow(&self, r: f64) -> Result<f64, FieldError> {
        if !(r >= 1.0) {
            return Err(FieldError::Exponent(r));
        }
        Ok(weighted_power_sum(&self.grid, &self.values, r))
    }

    pub fn norm_r(&self, r: f64) -> Result<f64, FieldError> {
        Ok(self.norm_r_pow(r)?.powf(1.0 / r))
    }

    /// `‖u‖₂²`.
    pub fn mass(&self) -> f64 {
        weighted_power_sum(&self.grid, &self.values, 2.0)
    }

    /// `‖u′‖₂²`, summing `(Δu)²/h` over consecutive samples.
    pub fn derivative_sq(&self) -> f64 {
        derivative_sq(&self.grid, &self.values)
    }

    /// Lumped inner product.
    pub fn inner(&self, other: &GridField) -> f64 {
        let h = self.grid.spec().step();
        let nv = self.grid.n_vertices();
        let mut s = 0.0;
        for v in 0..nv {
            s += self.grid.degree(v) as f64 * h / 2.0 * self.values[v] * other.values[v];
        }
        s + h * self.values[nv..]
            .iter()
            .zip(&other.values[nv..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|x| *x *= c);
    }

    /// Sum of the values weighted by the trapezoid rule, `∫u`.
    pub fn integral(&self) -> f64 {
        let h = self.grid.spec().step();
        let nv = self.grid.n_vertices();
        (0..nv)
            .map(|v| self.grid.degree(v) as f64 * h / 2.0 * self.values[v])
            .sum::<f64>()
            + h * self.values[nv..].iter().sum::<f64>()
    }

    /// Writes the text header `grid eps=.. W=.. m=..` and the values as
    /// little-endian doubles: vertices row by row, then edge samples.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        let s = self.spec();
        writeln!(out, "grid eps={} W={} m={}", s.epsilon, s.window, s.samples)?;
        for x in &self.values {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump written by [`GridField::write_dump`].
    pub fn read_dump<R: BufRead>(mut input: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut header = String::new();
        input.read_line(&mut header)?;
        let mut words = header.split_whitespace();
        if words.next() != Some("grid") {
            return Err(bad("missing grid header"));
        }
        let mut get = |key: &str| -> io::Result<String> {
            words
                .next()
                .and_then(|w| w.strip_prefix(key))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("missing {key}")))
        };
        let eps: f64 = get("eps=")?.parse().map_err(|_| bad("eps"))?;
        let w: usize = get("W=")?.parse().map_err(|_| bad("W"))?;
        let m: usize = get("m=")?.parse().map_err(|_| bad("m"))?;
        let spec = GridSpec::new(eps, w, m).map_err(|e| bad(&e.to_string()))?;
        let mut buf = vec![0u8; 8 * spec.n_dofs()];
        input.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridField::from_values(&Arc::new(Grid::new(spec)), values).map_err(|e| bad(&e.to_string()))
    }
}

pub(crate) fn weighted_power_sum(grid: &Grid, values: &[f64], r: f64) -> f64 {
    let h = grid.spec().step();
    let nv = grid.n_vertices();
    let power = crate::power::Power::new(r);
    let pow = |x: f64| power.abs(x);
    let mut s = 0.0;
    for (v, &x) in values[..nv].iter().enumerate() {
        if x != 0.0 {
            s += grid.degree(v) as f64 * 0.5 * pow(x);
        }
    }
    s += values[nv..].iter().map(|&x| pow(x)).sum::<f64>();
    s * h
}

pub(crate) fn derivative_sq(grid: &Grid, values: &[f64]) -> f64 {
    let h = grid.spec().step();
    let nv = grid.n_vertices();
    let m = grid.samples();
    let mut s = 0.0;
    for (e, edge) in grid.edges().iter().enumerate() {
        let samples = &values[nv + e * m..nv + (e + 1) * m];
        let mut prev = values[edge.tail];
        for &x in samples {
            s += (x - prev) * (x - prev);
            prev = x;
        }
        let d = values[edge.head] - prev;
        s += d * d;
    }
    s / h
}
