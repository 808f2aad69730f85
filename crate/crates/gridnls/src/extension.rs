//! Piecewise-affine extension of grid fields to the plane.
//!
//! Every grid square `ε[i, i+1] × ε[j, j+1]` is cut along its diagonal into
//! the down triangle `D_{i,j}` with corners `(i,j), (i+1,j), (i+1,j+1)` and
//! the up triangle `U_{i,j}` with corners `(i,j), (i+1,j+1), (i,j+1)`. The
//! extension `𝒜u` interpolates the vertex values affinely on each triangle;
//! edge samples are not used. Outside the window it is zero.
//!
//! ```
//! use std::sync::Arc;
//! use gridnls::extension::AffineExtension;
//! use gridnls::field::GridField;
//! use gridnls::grid::{Grid, GridSpec};
//!
//! let grid = Arc::new(Grid::new(GridSpec::new(0.5, 4, 1).unwrap()));
//! let u = GridField::restrict(&grid, |x, y| 1.0 + 2.0 * x - y);
//! let ext = AffineExtension::new(&u);
//! assert!((ext.eval(0.3, -0.71) - (1.0 + 0.6 + 0.71)).abs() < 1e-14);
//! ```

use serde::Serialize;

use crate::field::GridField;
use crate::grid::Grid;
use crate::planar::PlanarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Triangle {
    /// Corners `(i,j), (i+1,j), (i+1,j+1)`.
    Down,
    /// Corners `(i,j), (i+1,j+1), (i,j+1)`.
    Up,
}

impl Triangle {
    /// Lattice corners of the triangle in square `(i, j)`.
    pub fn corners(self, i: i64, j: i64) -> [(i64, i64); 3] {
        match self {
            Triangle::Down => [(i, j), (i + 1, j), (i + 1, j + 1)],
            Triangle::Up => [(i, j), (i + 1, j + 1), (i, j + 1)],
        }
    }
}

/// Norms of `𝒜u` over the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarNorms {
    pub l2_sq: f64,
    pub grad_l2_sq: f64,
    /// `(r, ‖𝒜u‖_r^r)` for each requested exponent.
    pub lr: Vec<(f64, f64)>,
}

/// Barycentric nodes and weights of a degree-5 seven-point triangle rule.
fn seven_point_rule() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let (a1, b1, w1) = (
        (9.0 - 2.0 * s) / 21.0,
        (6.0 + s) / 21.0,
        (155.0 + s) / 1200.0,
    );
    let (a2, b2, w2) = (
        (9.0 + 2.0 * s) / 21.0,
        (6.0 - s) / 21.0,
        (155.0 - s) / 1200.0,
    );
    [
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// `∫|f|^r` over a triangle of area `area` on which `f` is affine with
/// corner values `v`. Triangles where `f` changes sign are split along the
/// zero line so the rule only sees smooth integrands.
fn abs_pow_integral(pts: [(f64, f64); 3], v: [f64; 3], r: f64, rule: &[([f64; 3], f64); 7]) -> f64 {
    let area = 0.5
        * ((pts[1].0 - pts[0].0) * (pts[2].1 - pts[0].1)
            - (pts[2].0 - pts[0].0) * (pts[1].1 - pts[0].1))
            .abs();
    if area == 0.0 {
        return 0.0;
    }
    let pos = v.iter().filter(|&&x| x > 0.0).count();
    let neg = v.iter().filter(|&&x| x < 0.0).count();
    if pos == 0 || neg == 0 {
        let s: f64 = rule
            .iter()
            .map(|(b, w)| w * (b[0] * v[0] + b[1] * v[1] + b[2] * v[2]).abs().powf(r))
            .sum();
        return area * s;
    }
    // the lone corner on one side of the zero line
    let lone = (0..3)
        .find(|&k| {
            let s = v[k].signum();
            s != 0.0 && (0..3).filter(|&l| l != k).all(|l| v[l].signum() != s)
        })
        .unwrap_or_else(|| (0..3).find(|&k| v[k] != 0.0).unwrap());
    let (b, c) = ((lone + 1) % 3, (lone + 2) % 3);
    let cut = |k: usize| {
        if v[k] == 0.0 || v[k].signum() == v[lone].signum() {
            return pts[k];
        }
        let t = v[lone] / (v[lone] - v[k]);
        (
            pts[lone].0 + t * (pts[k].0 - pts[lone].0),
            pts[lone].1 + t * (pts[k].1 - pts[lone].1),
        )
    };
    let (pb, pc) = (cut(b), cut(c));
    let tip = abs_pow_integral([pts[lone], pb, pc], [v[lone], 0.0, 0.0], r, rule);
    let quad1 = abs_pow_integral([pb, pts[b], pts[c]], [0.0, v[b], v[c]], r, rule);
    let quad2 = abs_pow_integral([pb, pts[c], pc], [0.0, v[c], 0.0], r, rule);
    tip + quad1 + quad2
}

/// `𝒜u` for a grid field `u`.
#[derive(Debug, Clone, Copy)]
pub struct AffineExtension<'a> {
    source: &'a GridField,
}

impl<'a> AffineExtension<'a> {
    pub fn new(source: &'a GridField) -> Self {
        AffineExtension { source }
    }

    pub fn source(&self) -> &'a GridField {
        self.source
    }

    fn grid(&self) -> &Grid {
        self.source.grid()
    }

    /// Vertex value at lattice point `(i, j)`, zero outside the window.
    pub fn vertex_value(&self, i: i64, j: i64) -> f64 {
        self.grid()
            .vertex_index(i, j)
            .map_or(0.0, |v| self.source.vertex(v))
    }

    /// Corner values of a triangle.
    pub fn corner_values(&self, i: i64, j: i64, tri: Triangle) -> [f64; 3] {
        tri.corners(i, j).map(|(a, b)| self.vertex_value(a, b))
    }

    /// Evaluates the affine piece of triangle `(i, j, tri)` at `(x, y)`,
    /// whether or not the point lies in that triangle. Local coordinates
    /// within `1e-12` of an integer are snapped, so vertices return their
    /// value exactly.
    pub fn eval_in(&self, i: i64, j: i64, tri: Triangle, x: f64, y: f64) -> f64 {
        let eps = self.grid().epsilon();
        let snap = |z: f64| {
            let r = z.round();
            if (z - r).abs() <= 1e-12 {
                r
            } else {
                z
            }
        };
        let (s, t) = (snap(x / eps - i as f64), snap(y / eps - j as f64));
        let c = self.corner_values(i, j, tri);
        match tri {
            Triangle::Down => (1.0 - s) * c[0] + (s - t) * c[1] + t * c[2],
            Triangle::Up => (1.0 - t) * c[0] + s * c[1] + (t - s) * c[2],
        }
    }

    /// Square and triangle containing `(x, y)`, or `None` outside the window.
    pub fn locate(&self, x: f64, y: f64) -> Option<(i64, i64, Triangle)> {
        let eps = self.grid().epsilon();
        let w = self.grid().window();
        let (fx, fy) = (x / eps, y / eps);
        let lim = w as f64;
        if !(fx.abs() <= lim && fy.abs() <= lim) {
            return None;
        }
        let i = (fx.floor() as i64).min(w - 1);
        let j = (fy.floor() as i64).min(w - 1);
        let tri = if fx - i as f64 >= fy - j as f64 {
            Triangle::Down
        } else {
            Triangle::Up
        };
        Some((i, j, tri))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.locate(x, y) {
            Some((i, j, tri)) => self.eval_in(i, j, tri, x, y),
            None => 0.0,
        }
    }

    /// Calls `f(i, j, tri, corner values)` for every triangle of the window.
    fn for_each_triangle(&self, mut f: impl FnMut(i64, i64, Triangle, [f64; 3])) {
        let w = self.grid().window();
        for j in -w..w {
            for i in -w..w {
                for tri in [Triangle::Down, Triangle::Up] {
                    f(i, j, tri, self.corner_values(i, j, tri));
                }
            }
        }
    }

    /// `‖𝒜u‖₂²` and `‖∇𝒜u‖₂²` in closed form, plus `‖𝒜u‖_r^r` for each `r`
    /// by the seven-point rule.
    pub fn planar_norms(&self, rs: &[f64]) -> PlanarNorms {
        let eps = self.grid().epsilon();
        let area = 0.5 * eps * eps;
        let rule = seven_point_rule();
        let mut l2 = 0.0;
        let mut grad = 0.0;
        let mut lr = vec![0.0; rs.len()];
        self.for_each_triangle(|i, j, tri, c| {
            l2 += area / 6.0
                * (c[0] * c[0]
                    + c[1] * c[1]
                    + c[2] * c[2]
                    + c[0] * c[1]
                    + c[1] * c[2]
                    + c[2] * c[0]);
            // squared gradient times area; the ε² of the gradient cancels the area
            grad += match tri {
                Triangle::Down => 0.5 * ((c[1] - c[0]).powi(2) + (c[2] - c[1]).powi(2)),
                Triangle::Up => 0.5 * ((c[1] - c[2]).powi(2) + (c[2] - c[0]).powi(2)),
            };
            if c.iter().all(|&x| x == 0.0) || rs.is_empty() {
                return;
            }
            let pts = tri
                .corners(i, j)
                .map(|(a, b)| (a as f64 * eps, b as f64 * eps));
            for (acc, &r) in lr.iter_mut().zip(rs) {
                *acc += abs_pow_integral(pts, c, r, &rule);
            }
        });
        PlanarNorms {
            l2_sq: l2,
            grad_l2_sq: grad,
            lr: rs.iter().copied().zip(lr).collect(),
        }
    }

    /// `‖(τ𝒜u)′‖²` along the line `{t·v/|v|}` through the origin, computed
    /// exactly by cutting the line at every triangle boundary.
    pub fn trace_derivative_sq(&self, v: (i64, i64)) -> f64 {
        let eps = self.grid().epsilon();
        let w = self.grid().window() as f64;
        let norm = ((v.0 * v.0 + v.1 * v.1) as f64).sqrt();
        let (dx, dy) = (v.0 as f64 / norm, v.1 as f64 / norm);
        let t_max = w * eps / dx.abs().max(dy.abs());
        let mut cuts = vec![-t_max, t_max];
        let mut add_family = |slope: f64| {
            if slope.abs() < 1e-15 {
                return;
            }
            let step = eps / slope.abs();
            let n = (t_max / step).floor() as i64;
            cuts.extend((-n..=n).map(|k| k as f64 * step));
        };
        add_family(dx);
        add_family(dy);
        add_family(dy - dx);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * eps);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let (t0, t1) = (seg[0], seg[1]);
            let tm = 0.5 * (t0 + t1);
            let Some((i, j, tri)) = self.locate(tm * dx, tm * dy) else {
                continue;
            };
            let f0 = self.eval_in(i, j, tri, t0 * dx, t0 * dy);
            let f1 = self.eval_in(i, j, tri, t1 * dx, t1 * dy);
            total += (f1 - f0) * (f1 - f0) / (t1 - t0);
        }
        total
    }

    /// Samples `𝒜u` on the raster of half-size `half` and spacing `h`
    /// centred at `center`.
    pub fn rasterize(&self, half: usize, h: f64, center: (f64, f64)) -> PlanarField {
        let mut f = PlanarField::zeros(half, h).with_center(center);
        let n = half as i64;
        let side = 2 * half + 1;
        let vals = f.values_mut();
        for j in -n..=n {
            for i in -n..=n {
                let (x, y) = (center.0 + i as f64 * h, center.1 + j as f64 * h);
                vals[(j + n) as usize * side + (i + n) as usize] = self.eval(x, y);
            }
        }
        f
    }

    /// Vertex with the largest `|u|`, ties resolved by the lower index.
    pub fn argmax_vertex(&self) -> (f64, f64) {
        let vals = self.source.vertex_values();
        let mut best = 0;
        for (k, x) in vals.iter().enumerate() {
            if x.abs() > vals[best].abs() {
                best = k;
            }
        }
        self.grid().vertex_position(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(eps: f64, w: usize) -> Arc<Grid> {
        Arc::new(Grid::new(GridSpec::new(eps, w, 1).unwrap()))
    }

    fn random(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridField {
        let v = (0..g.spec().n_dofs())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        GridField::from_values(g, v).unwrap()
    }

    #[test]
    fn interpolates_vertices() {
        let g = grid(0.3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random(&g, &mut rng);
        let ext = AffineExtension::new(&u);
        for v in 0..g.n_vertices() {
            let (x, y) = g.vertex_position(v);
            assert_eq!(ext.eval(x, y), u.vertex(v));
        }
        assert_eq!(ext.eval(10.0, 0.0), 0.0);
    }

    #[test]
    fn shared_edges_agree() {
        let g = grid(0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random(&g, &mut rng);
        let ext = AffineExtension::new(&u);
        for j in -3..2 {
            for i in -3..2 {
                let (x0, y0) = (i as f64 * 0.5, j as f64 * 0.5);
                // diagonal midpoint, shared by D and U of the same square
                let (x, y) = (x0 + 0.25, y0 + 0.25);
                let d =
                    ext.eval_in(i, j, Triangle::Down, x, y) - ext.eval_in(i, j, Triangle::Up, x, y);
                assert!(d.abs() < 1e-14);
                // east side midpoint, shared with the next square's up triangle
                let (x, y) = (x0 + 0.5, y0 + 0.25);
                let d = ext.eval_in(i, j, Triangle::Down, x, y)
                    - ext.eval_in(i + 1, j, Triangle::Up, x, y);
                assert!(d.abs() < 1e-14);
                // north side midpoint, shared with the next square's down triangle
                let (x, y) = (x0 + 0.25, y0 + 0.5);
                let d = ext.eval_in(i, j, Triangle::Up, x, y)
                    - ext.eval_in(i, j + 1, Triangle::Down, x, y);
                assert!(d.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_field_norms() {
        let g = grid(0.25, 4);
        let u = GridField::restrict(&g, |_, _| 1.0);
        let n = AffineExtension::new(&u).planar_norms(&[3.0]);
        assert!((n.l2_sq - 4.0).abs() < 1e-13);
        assert_eq!(n.grad_l2_sq, 0.0);
        assert!((n.lr[0].1 - 4.0).abs() < 1e-13);
    }

    #[test]
    fn hat_function_norms() {
        for eps in [1.0, 0.5] {
            let g = grid(eps, 3);
            let mut u = GridField::zeros(&g);
            u.values_mut()[g.vertex_index(0, 0).unwrap()] = 1.0;
            let n = AffineExtension::new(&u).planar_norms(&[2.0, 3.0]);
            // six triangles, each ∫λ² = area/6
            assert!((n.l2_sq - eps * eps / 2.0).abs() < 1e-15);
            assert!((n.lr[0].1 - n.l2_sq).abs() < 1e-15);
            // ∫λ³ = area/10 on each of the six triangles
            assert!((n.lr[1].1 - 6.0 * eps * eps / 20.0).abs() < 1e-15);
            assert!((n.grad_l2_sq - 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_changes_are_split() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        let rule = seven_point_rule();
        // f = x − y changes sign along the diagonal; ∫|x−y| over the triangle = 1/6
        let got = abs_pow_integral(pts, [0.0, 1.0, -1.0], 1.0, &rule);
        assert!((got - 1.0 / 6.0).abs() < 1e-15);
        // for r = 2 the split must reproduce the closed form of ∫f²
        let v = [1.0, -1.0, -1.0];
        let exact = 0.5 / 6.0
            * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[2] * v[0]);
        assert!((abs_pow_integral(pts, v, 2.0, &rule) - exact).abs() < 1e-15);
    }

    #[test]
    fn gradient_bounded_by_edge_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for eps in [1.0, 0.5, 0.25] {
            let g = Arc::new(Grid::new(GridSpec::new(eps, 3, 2).unwrap()));
            for _ in 0..50 {
                let u = random(&g, &mut rng);
                let n = AffineExtension::new(&u).planar_norms(&[]);
                assert!(n.grad_l2_sq <= eps * u.derivative_sq() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn trace_of_affine_function() {
        let g = grid(0.5, 4);
        let u = GridField::restrict(&g, |x, y| 3.0 * x - 2.0 * y);
        let ext = AffineExtension::new(&u);
        for (v, slope) in [
            ((1, 0), 3.0f64),
            ((0, 1), -2.0),
            ((1, 1), 1.0 / 2f64.sqrt()),
            ((2, 1), 4.0 / 5f64.sqrt()),
        ] {
            // the line leaves the window where max(|x|, |y|) = 2
            let norm = ((v.0 * v.0 + v.1 * v.1) as f64).sqrt();
            let (dx, dy) = (v.0 as f64 / norm, v.1 as f64 / norm);
            let length = 2.0 * 2.0 / dx.abs().max(dy.abs());
            let got = ext.trace_derivative_sq(v);
            assert!((got - slope * slope * length).abs() < 1e-12, "{v:?}: {got}");
        }
    }

    #[test]
    fn raster_reproduces_vertices_and_affine() {
        let g = grid(0.5, 4);
        let u = GridField::restrict(&g, |x, y| 0.5 - x + 0.25 * y);
        let ext = AffineExtension::new(&u);
        let r = ext.rasterize(8, 0.25, (0.0, 0.0));
        for (k, &val) in r.values().iter().enumerate() {
            let (x, y) = r.position(k);
            assert!((val - (0.5 - x + 0.25 * y)).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random(&g, &mut rng);
        let ext = AffineExtension::new(&u);
        let r = ext.rasterize(4, 0.5, (0.0, 0.0));
        for (k, &val) in r.values().iter().enumerate() {
            let (x, y) = r.position(k);
            let v = g
                .vertex_index((x / 0.5).round() as i64, (y / 0.5).round() as i64)
                .unwrap();
            assert_eq!(val, u.vertex(v));
        }
    }

    #[test]
    fn raster_sum_approaches_exact_l2() {
        let g = grid(0.5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random(&g, &mut rng);
        let ext = AffineExtension::new(&u);
        let exact = ext.planar_norms(&[]).l2_sq;
        let mut errs = Vec::new();
        for (half, h) in [(16usize, 0.125), (32, 0.0625), (64, 0.03125)] {
            let r = ext.rasterize(half, h, (0.0, 0.0));
            errs.push((r.values().iter().map(|x| x * x).sum::<f64>() * h * h - exact).abs());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }
}
