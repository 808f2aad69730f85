//! Nonlinear vertex sets and their periodicity cells.
//!
//! A vertex set is described in lattice coordinates; on a grid of edge
//! length `ε` the set `V` sits at the points `εV`. Periodic sets are given
//! by a finite base list and one or two generating vectors.
//!
//! ```
//! use gridnls::periodic::{build_cell, VertexSetSpec};
//!
//! let v = VertexSetSpec::z2_periodic(vec![(0, 0)], (2, 0), (0, 1)).unwrap();
//! let cell = build_cell(&v).unwrap();
//! assert_eq!(cell.n_vertices_q0, 2);
//! assert_eq!(cell.v0, vec![(0, 0)]);
//! ```

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::VertexSetError;
use crate::grid::{Grid, LCell};

pub type Point = (i64, i64);

/// Finite, ℤ-periodic or ℤ²-periodic set of nonlinear vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexSetSpec {
    Finite {
        points: Vec<Point>,
    },
    ZPeriodic {
        base: Vec<Point>,
        v: Point,
    },
    Z2Periodic {
        base: Vec<Point>,
        v1: Point,
        v2: Point,
    },
}

/// Tight transverse bound of a ℤ-periodic set: every member `w` satisfies
/// `|(w − p0)·v⊥| ≤ r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseBound {
    pub p0: (f64, f64),
    pub r: f64,
}

fn cross(a: Point, b: Point) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: Point, b: Point) -> i64 {
    a.0 * b.0 + a.1 * b.1
}

fn sub(a: Point, b: Point) -> Point {
    (a.0 - b.0, a.1 - b.1)
}

/// `v⊥ = (−v₂, v₁)`.
pub fn perp(v: Point) -> Point {
    (-v.1, v.0)
}

/// Residue of `w` modulo the lattice spanned by `v1, v2`, as the pair of
/// Cramer numerators reduced mod `|det|`.
fn lattice_key(w: Point, v1: Point, v2: Point) -> (i64, i64) {
    let det = cross(v1, v2);
    let k = det.abs();
    (cross(w, v2).rem_euclid(k), cross(v1, w).rem_euclid(k))
}

fn in_lattice(d: Point, v1: Point, v2: Point) -> bool {
    lattice_key(d, v1, v2) == (0, 0)
}

fn on_line(d: Point, v: Point) -> bool {
    cross(d, v) == 0 && dot(d, v).rem_euclid(dot(v, v)) == 0
}

impl VertexSetSpec {
    pub fn finite(points: Vec<Point>) -> Self {
        VertexSetSpec::Finite { points }
    }

    pub fn z_periodic(base: Vec<Point>, v: Point) -> Result<Self, VertexSetError> {
        let s = VertexSetSpec::ZPeriodic { base, v };
        s.validate()?;
        Ok(s)
    }

    pub fn z2_periodic(base: Vec<Point>, v1: Point, v2: Point) -> Result<Self, VertexSetError> {
        let s = VertexSetSpec::Z2Periodic { base, v1, v2 };
        s.validate()?;
        Ok(s)
    }

    /// The whole lattice ℤ².
    pub fn full_lattice() -> Self {
        VertexSetSpec::Z2Periodic {
            base: vec![(0, 0)],
            v1: (1, 0),
            v2: (0, 1),
        }
    }

    /// The line `ℤ·v` through the origin.
    pub fn line(v: Point) -> Result<Self, VertexSetError> {
        Self::z_periodic(vec![(0, 0)], v)
    }

    pub fn validate(&self) -> Result<(), VertexSetError> {
        let (base, equiv): (&[Point], Box<dyn Fn(Point) -> bool>) = match self {
            VertexSetSpec::Finite { .. } => return Ok(()),
            VertexSetSpec::ZPeriodic { base, v } => {
                if *v == (0, 0) {
                    return Err(VertexSetError::ZeroVector);
                }
                let v = *v;
                (base, Box::new(move |d| on_line(d, v)))
            }
            VertexSetSpec::Z2Periodic { base, v1, v2 } => {
                if *v1 == (0, 0) || *v2 == (0, 0) {
                    return Err(VertexSetError::ZeroVector);
                }
                if cross(*v1, *v2) == 0 {
                    return Err(VertexSetError::Dependent(*v1, *v2));
                }
                let (v1, v2) = (*v1, *v2);
                (base, Box::new(move |d| in_lattice(d, v1, v2)))
            }
        };
        if base.is_empty() {
            return Err(VertexSetError::EmptyBase);
        }
        for (a, &p) in base.iter().enumerate() {
            for &q in &base[a + 1..] {
                if equiv(sub(p, q)) {
                    return Err(VertexSetError::RedundantBase(p, q));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, w: Point) -> bool {
        match self {
            VertexSetSpec::Finite { points } => points.contains(&w),
            VertexSetSpec::ZPeriodic { base, v } => base.iter().any(|&b| on_line(sub(w, b), *v)),
            VertexSetSpec::Z2Periodic { base, v1, v2 } => {
                base.iter().any(|&b| in_lattice(sub(w, b), *v1, *v2))
            }
        }
    }

    /// Tight `(P₀, r)` for a ℤ-periodic set.
    pub fn transverse_bound(&self) -> Option<TransverseBound> {
        let VertexSetSpec::ZPeriodic { base, v } = self else {
            return None;
        };
        let vp = perp(*v);
        let c: Vec<i64> = base.iter().map(|&b| dot(b, vp)).collect();
        let (lo, hi) = (*c.iter().min()?, *c.iter().max()?);
        let n2 = dot(vp, vp) as f64;
        let mid = 0.5 * (lo + hi) as f64;
        let r = 0.5 * (hi - lo) as f64 / n2.sqrt();
        Some(TransverseBound {
            p0: (mid * vp.0 as f64 / n2, mid * vp.1 as f64 / n2),
            r,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            VertexSetSpec::Finite { .. } => "finite",
            VertexSetSpec::ZPeriodic { .. } => "z_periodic",
            VertexSetSpec::Z2Periodic { .. } => "z2_periodic",
        }
    }
}

/// Indices of the vertices of `εV` inside the window, in vertex order.
pub fn materialize(spec: &VertexSetSpec, grid: &Grid) -> Vec<usize> {
    if let VertexSetSpec::Finite { points } = spec {
        let mut out: Vec<usize> = points
            .iter()
            .filter_map(|&(i, j)| grid.vertex_index(i, j))
            .collect();
        out.sort_unstable();
        out.dedup();
        return out;
    }
    (0..grid.n_vertices())
        .filter(|&v| spec.contains(grid.vertex_coords(v)))
        .collect()
}

/// The set `⋃_{|iε| ≤ R} (V + i·v⊥)` for a ℤ-periodic `V`, in lattice
/// coordinates of the grid with edge length `epsilon`.
pub fn build_strip_set(
    base: &VertexSetSpec,
    r: f64,
    epsilon: f64,
) -> Result<VertexSetSpec, VertexSetError> {
    let VertexSetSpec::ZPeriodic { base: pts, v } = base else {
        return Err(VertexSetError::NotPeriodic);
    };
    if !(r.is_finite() && r > 0.0) {
        return Err(VertexSetError::StripRadius(r));
    }
    let n = (r / epsilon * (1.0 + 1e-12)).floor() as i64;
    let vp = perp(*v);
    let mut out = Vec::with_capacity(pts.len() * (2 * n as usize + 1));
    for i in -n..=n {
        for &b in pts {
            out.push((b.0 + i * vp.0, b.1 + i * vp.1));
        }
    }
    VertexSetSpec::z_periodic(out, *v)
}

/// `Q₀` as a union of L-cells together with `V₀ = Q₀ ∩ V`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicityCell {
    pub q0_cells: Vec<LCell>,
    pub v0: Vec<Point>,
    pub n_vertices_q0: usize,
    pub n_v0: usize,
}

impl PeriodicityCell {
    /// `#(vertices of Q₀) / #V₀`.
    pub fn ratio(&self) -> f64 {
        self.n_vertices_q0 as f64 / self.n_v0 as f64
    }
}

fn closer(a: Point, b: Point) -> bool {
    (a.0 * a.0 + a.1 * a.1, a) < (b.0 * b.0 + b.1 * b.1, b)
}

fn cell_from_classes<K: Ord>(classes: BTreeMap<K, Point>, spec: &VertexSetSpec) -> PeriodicityCell {
    let mut reps: Vec<Point> = classes.into_values().collect();
    reps.sort_unstable();
    let v0: Vec<Point> = reps.iter().copied().filter(|&w| spec.contains(w)).collect();
    PeriodicityCell {
        q0_cells: reps.iter().map(|&(i, j)| LCell { i, j }).collect(),
        n_vertices_q0: reps.len(),
        n_v0: v0.len(),
        v0,
    }
}

/// Builds the periodicity cell: each equivalence class of vertices (modulo
/// the generating vectors) contributes its representative closest to the
/// origin, ties broken by the smaller `(i, j)`.
pub fn build_cell(spec: &VertexSetSpec) -> Result<PeriodicityCell, VertexSetError> {
    spec.validate()?;
    match spec {
        VertexSetSpec::Finite { .. } => Err(VertexSetError::NotPeriodic),
        VertexSetSpec::Z2Periodic { v1, v2, .. } => {
            let k = cross(*v1, *v2).abs();
            let mut classes: BTreeMap<(i64, i64), Point> = BTreeMap::new();
            for j in -k..k {
                for i in -k..k {
                    let w = (i, j);
                    classes
                        .entry(lattice_key(w, *v1, *v2))
                        .and_modify(|r| {
                            if closer(w, *r) {
                                *r = w
                            }
                        })
                        .or_insert(w);
                }
            }
            Ok(cell_from_classes(classes, spec))
        }
        VertexSetSpec::ZPeriodic { base, v } => {
            let vp = perp(*v);
            let c: Vec<i64> = base.iter().map(|&b| dot(b, vp)).collect();
            let (lo, hi) = (*c.iter().min().unwrap(), *c.iter().max().unwrap());
            let n2 = dot(*v, *v);
            let reach = ((n2 as f64).sqrt() + lo.abs().max(hi.abs()) as f64 / (n2 as f64).sqrt())
                .ceil() as i64
                + 2;
            let mut classes: BTreeMap<(i64, i64), Point> = BTreeMap::new();
            for j in -reach..=reach {
                for i in -reach..=reach {
                    let w = (i, j);
                    let t = dot(w, vp);
                    if t < lo || t > hi {
                        continue;
                    }
                    classes
                        .entry((t, dot(w, *v).rem_euclid(n2)))
                        .and_modify(|r| {
                            if closer(w, *r) {
                                *r = w
                            }
                        })
                        .or_insert(w);
                }
            }
            Ok(cell_from_classes(classes, spec))
        }
    }
}

/// Outcome of checking the tiling by translates of `Q₀` on a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TilingReport {
    pub cells_checked: usize,
    pub overlaps: usize,
    pub gaps: usize,
    pub v_mismatches: usize,
}

impl TilingReport {
    pub fn is_ok(&self) -> bool {
        self.cells_checked > 0 && self.overlaps == 0 && self.gaps == 0 && self.v_mismatches == 0
    }
}

/// Translates `Q₀` and `V₀` by every lattice vector reaching the window and
/// counts how often each interior L-cell is hit. Rim cells, whose edges leave
/// the window, are skipped. For a ℤ-periodic set only the cells of the strip
/// spanned by the base list are expected to be covered.
pub fn verify_tiling(spec: &VertexSetSpec, cell: &PeriodicityCell, window: usize) -> TilingReport {
    let w = window as i64 - 1;
    let inside = |p: Point| p.0.abs() <= w && p.1.abs() <= w;
    let reach = cell
        .q0_cells
        .iter()
        .map(|c| c.i.abs().max(c.j.abs()))
        .max()
        .unwrap_or(0)
        + 2 * w
        + 2;
    let translations: Vec<Point> = match spec {
        VertexSetSpec::Finite { .. } => Vec::new(),
        VertexSetSpec::ZPeriodic { v, .. } => {
            (-reach..=reach).map(|a| (a * v.0, a * v.1)).collect()
        }
        VertexSetSpec::Z2Periodic { v1, v2, .. } => {
            let span = v1.0.abs() + v1.1.abs() + v2.0.abs() + v2.1.abs();
            let lim = reach * span / cross(*v1, *v2).abs() + 1;
            let mut t = Vec::new();
            for a in -lim..=lim {
                for b in -lim..=lim {
                    t.push((a * v1.0 + b * v2.0, a * v1.1 + b * v2.1));
                }
            }
            t
        }
    };
    let mut hits: BTreeMap<Point, usize> = BTreeMap::new();
    let mut v_hits: HashSet<Point> = HashSet::new();
    for &t in &translations {
        for c in &cell.q0_cells {
            let p = (c.i + t.0, c.j + t.1);
            if inside(p) {
                *hits.entry(p).or_default() += 1;
            }
        }
        for &p in &cell.v0 {
            let p = (p.0 + t.0, p.1 + t.1);
            if inside(p) {
                v_hits.insert(p);
            }
        }
    }
    let expected: Box<dyn Fn(Point) -> bool> = match spec {
        VertexSetSpec::ZPeriodic { base, v } => {
            let vp = perp(*v);
            let c: Vec<i64> = base.iter().map(|&b| dot(b, vp)).collect();
            let (lo, hi) = (*c.iter().min().unwrap(), *c.iter().max().unwrap());
            Box::new(move |p| (lo..=hi).contains(&dot(p, vp)))
        }
        _ => Box::new(|_| true),
    };
    let mut report = TilingReport {
        cells_checked: 0,
        overlaps: 0,
        gaps: 0,
        v_mismatches: 0,
    };
    for j in -w..=w {
        for i in -w..=w {
            let p = (i, j);
            let n = hits.get(&p).copied().unwrap_or(0);
            if expected(p) {
                report.cells_checked += 1;
                if n == 0 {
                    report.gaps += 1;
                }
            }
            if n > 1 {
                report.overlaps += 1;
            }
            if n > 0 && !expected(p) {
                report.gaps += 1;
            }
            if spec.contains(p) != v_hits.contains(&p) {
                report.v_mismatches += 1;
            }
        }
    }
    report
}

/// Which singular-limit statement fixes the coupling constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremCase {
    /// Doubly periodic `V`, planar limit.
    Z2,
    /// Singly periodic `V`, line limit.
    ZLine,
    /// Thickened singly periodic `V`, strip limit.
    ZStrip,
}

/// `(α, β)` for the singular limits. `cell` belongs to the doubly periodic
/// set (Z2) or to the unthickened base line (ZLine, ZStrip).
pub fn beta_for_theorem(
    case: TheoremCase,
    cell: &PeriodicityCell,
    v: Point,
    epsilon: f64,
) -> (f64, f64) {
    let beta = match case {
        TheoremCase::Z2 | TheoremCase::ZStrip => cell.ratio() * epsilon,
        TheoremCase::ZLine => (dot(v, v) as f64).sqrt() / cell.n_v0 as f64,
    };
    (0.5, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(w: usize) -> Grid {
        Grid::new(GridSpec::new(1.0, w, 1).unwrap())
    }

    /// Classes of `[−k, k)²` modulo the lattice by direct search for integer
    /// coefficients, independent of the residue key.
    fn brute_classes(v1: Point, v2: Point) -> Vec<Vec<Point>> {
        let k = cross(v1, v2).abs();
        let pts: Vec<Point> = (-k..k).flat_map(|j| (-k..k).map(move |i| (i, j))).collect();
        let same = |a: Point, b: Point| {
            let d = sub(a, b);
            (-3 * k..=3 * k).any(|x| {
                (-3 * k..=3 * k).any(|y| x * v1.0 + y * v2.0 == d.0 && x * v1.1 + y * v2.1 == d.1)
            })
        };
        let mut classes: Vec<Vec<Point>> = Vec::new();
        for p in pts {
            match classes.iter_mut().find(|c| same(c[0], p)) {
                Some(c) => c.push(p),
                None => classes.push(vec![p]),
            }
        }
        classes
    }

    #[test]
    fn full_lattice_cell() {
        let cell = build_cell(&VertexSetSpec::full_lattice()).unwrap();
        assert_eq!(cell.q0_cells, vec![LCell { i: 0, j: 0 }]);
        assert_eq!(cell.v0, vec![(0, 0)]);
        assert_eq!((cell.n_vertices_q0, cell.n_v0), (1, 1));
    }

    #[test]
    fn even_columns_cell_matches_brute_force() {
        let spec = VertexSetSpec::z2_periodic(vec![(0, 0)], (2, 0), (0, 1)).unwrap();
        let cell = build_cell(&spec).unwrap();
        let classes = brute_classes((2, 0), (0, 1));
        assert_eq!(classes.len(), 2);
        let mut reps: Vec<Point> = classes
            .iter()
            .map(|c| {
                *c.iter()
                    .min_by_key(|p| (p.0 * p.0 + p.1 * p.1, **p))
                    .unwrap()
            })
            .collect();
        reps.sort_unstable();
        assert_eq!(reps, vec![(-1, 0), (0, 0)]);
        let cells: Vec<Point> = cell.q0_cells.iter().map(|c| (c.i, c.j)).collect();
        assert_eq!(cells, reps);
        assert_eq!(cell.v0, vec![(0, 0)]);
        assert_eq!(cell.ratio(), 2.0);
        assert!(verify_tiling(&spec, &cell, 5).is_ok());
    }

    #[test]
    fn skew_lattices_tile() {
        for (v1, v2, base) in [
            ((2, 1), (-1, 2), vec![(0, 0), (1, 0)]),
            ((3, 0), (1, 2), vec![(0, 0)]),
            ((1, 1), (1, -1), vec![(0, 0)]),
        ] {
            let spec = VertexSetSpec::z2_periodic(base.clone(), v1, v2).unwrap();
            let cell = build_cell(&spec).unwrap();
            assert_eq!(cell.n_vertices_q0 as i64, cross(v1, v2).abs());
            assert_eq!(cell.n_vertices_q0, brute_classes(v1, v2).len());
            assert_eq!(cell.n_v0, base.len());
            let report = verify_tiling(&spec, &cell, 7);
            assert!(report.is_ok(), "{v1:?} {v2:?}: {report:?}");
        }
    }

    #[test]
    fn diagonal_line_cell() {
        let spec = VertexSetSpec::line((1, 1)).unwrap();
        let cell = build_cell(&spec).unwrap();
        assert_eq!(cell.v0, vec![(0, 0)]);
        assert_eq!(cell.n_vertices_q0, 1);
        let report = verify_tiling(&spec, &cell, 4);
        assert!(report.is_ok(), "{report:?}");
        assert_eq!(report.cells_checked, 7);
    }

    #[test]
    fn thick_line_cells_tile_their_strip() {
        let base = VertexSetSpec::line((2, 1)).unwrap();
        let strip = build_strip_set(&base, 1.0, 0.5).unwrap();
        let cell = build_cell(&strip).unwrap();
        assert_eq!(cell.n_v0, 5);
        assert!(verify_tiling(&strip, &cell, 9).is_ok());
    }

    #[test]
    fn rejects_bad_sets() {
        assert_eq!(
            VertexSetSpec::z2_periodic(vec![(0, 0)], (1, 2), (2, 4)),
            Err(VertexSetError::Dependent((1, 2), (2, 4)))
        );
        assert_eq!(VertexSetSpec::line((0, 0)), Err(VertexSetError::ZeroVector));
        assert_eq!(
            VertexSetSpec::z_periodic(vec![(0, 0), (3, 0)], (1, 0)),
            Err(VertexSetError::RedundantBase((0, 0), (3, 0)))
        );
        assert_eq!(
            VertexSetSpec::z_periodic(vec![], (1, 0)),
            Err(VertexSetError::EmptyBase)
        );
        assert_eq!(
            build_cell(&VertexSetSpec::finite(vec![(0, 0)])),
            Err(VertexSetError::NotPeriodic)
        );
    }

    #[test]
    fn materialize_counts() {
        let g = grid(3);
        let origin = materialize(&VertexSetSpec::finite(vec![(0, 0), (9, 9)]), &g);
        assert_eq!(origin, vec![g.vertex_index(0, 0).unwrap()]);
        let axis = materialize(&VertexSetSpec::line((1, 0)).unwrap(), &g);
        assert_eq!(axis.len(), 7);
        assert!(axis.iter().all(|&v| g.vertex_coords(v).1 == 0));
        assert_eq!(
            materialize(&VertexSetSpec::full_lattice(), &grid(2)).len(),
            25
        );
    }

    #[test]
    fn materialize_is_scale_free() {
        let spec = VertexSetSpec::z_periodic(vec![(0, 0), (0, 1)], (2, 1)).unwrap();
        let a = Grid::new(GridSpec::new(1.0, 6, 1).unwrap());
        let b = Grid::new(GridSpec::new(0.25, 6, 3).unwrap());
        let ma = materialize(&spec, &a);
        let mb = materialize(&spec, &b);
        assert_eq!(ma, mb);
        for (&x, &y) in ma.iter().zip(&mb) {
            let (pa, pb) = (a.vertex_position(x), b.vertex_position(y));
            assert_eq!((0.25 * pa.0, 0.25 * pa.1), pb);
        }
    }

    #[test]
    fn strip_sets() {
        let base = VertexSetSpec::line((1, 0)).unwrap();
        let rows = |s: &VertexSetSpec| {
            let g = grid(4);
            let mut js: Vec<i64> = materialize(s, &g)
                .iter()
                .map(|&v| g.vertex_coords(v).1)
                .collect();
            js.dedup();
            js
        };
        assert_eq!(
            rows(&build_strip_set(&base, 1.0, 1.0).unwrap()),
            vec![-1, 0, 1]
        );
        assert_eq!(
            rows(&build_strip_set(&base, 1.0, 0.5).unwrap()),
            vec![-2, -1, 0, 1, 2]
        );
        assert_eq!(build_strip_set(&base, 0.4, 0.5).unwrap(), base);

        let diag = VertexSetSpec::line((1, 1)).unwrap();
        let strip = build_strip_set(&diag, 1.0, 0.5).unwrap();
        let VertexSetSpec::ZPeriodic { base: pts, .. } = &strip else {
            unreachable!()
        };
        assert_eq!(pts.len(), 5);
        let g = grid(6);
        let mut owner = vec![None; g.n_vertices()];
        for (n, &b) in pts.iter().enumerate() {
            for v in materialize(&VertexSetSpec::z_periodic(vec![b], (1, 1)).unwrap(), &g) {
                assert!(owner[v].is_none());
                owner[v] = Some(n);
            }
        }
    }

    #[test]
    fn transverse_bound_is_tight() {
        let s = VertexSetSpec::z_periodic(vec![(0, 0), (0, 2)], (1, 0)).unwrap();
        let t = s.transverse_bound().unwrap();
        assert_eq!(t.p0, (0.0, 1.0));
        assert_eq!(t.r, 1.0);
    }

    #[test]
    fn theorem_betas() {
        let lattice = build_cell(&VertexSetSpec::full_lattice()).unwrap();
        assert_eq!(
            beta_for_theorem(TheoremCase::Z2, &lattice, (1, 0), 0.1),
            (0.5, 0.1)
        );
        let axis = build_cell(&VertexSetSpec::line((1, 0)).unwrap()).unwrap();
        assert_eq!(
            beta_for_theorem(TheoremCase::ZLine, &axis, (1, 0), 0.3),
            (0.5, 1.0)
        );
        let diag = build_cell(&VertexSetSpec::line((1, 1)).unwrap()).unwrap();
        assert_eq!(
            beta_for_theorem(TheoremCase::ZLine, &diag, (1, 1), 0.3),
            (0.5, 2f64.sqrt())
        );
    }
}
