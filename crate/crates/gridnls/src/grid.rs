//! The truncated square grid: vertices on `εℤ²`, horizontal and vertical
//! edges of length `ε`, and the L-cell decomposition.
//!
//! Vertices are the points `ε(i, j)` with `|i|, |j| ≤ W`. Every edge is
//! oriented west to east or south to north, and carries `m` interior
//! samples at step `h = ε / (m + 1)`. Vertices on the window boundary are
//! held at zero by the solvers.
//!
//! ```
//! use gridnls::grid::{Grid, GridSpec};
//!
//! let grid = Grid::new(GridSpec::new(1.0, 1, 1).unwrap());
//! assert_eq!(grid.n_vertices(), 9);
//! assert_eq!(grid.n_edges(), 12);
//! let center = grid.vertex_index(0, 0).unwrap();
//! assert_eq!(grid.degree(center), 4);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Size and resolution of a truncated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Edge length.
    pub epsilon: f64,
    /// Window radius `W` in lattice units.
    pub window: usize,
    /// Interior samples per edge.
    pub samples: usize,
}

impl GridSpec {
    pub fn new(epsilon: f64, window: usize, samples: usize) -> Result<Self, GridError> {
        let spec = GridSpec {
            epsilon,
            window,
            samples,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(GridError::Epsilon(self.epsilon));
        }
        if self.window == 0 {
            return Err(GridError::ZeroWindow);
        }
        if self.samples == 0 {
            return Err(GridError::ZeroSamples);
        }
        Ok(())
    }

    /// Vertices per side, `2W + 1`.
    pub fn side(&self) -> usize {
        2 * self.window + 1
    }

    pub fn n_vertices(&self) -> usize {
        self.side() * self.side()
    }

    pub fn n_edges(&self) -> usize {
        2 * self.side() * 2 * self.window
    }

    /// Sample spacing along an edge.
    pub fn step(&self) -> f64 {
        self.epsilon / (self.samples + 1) as f64
    }

    /// Total number of degrees of freedom (vertices plus edge samples).
    pub fn n_dofs(&self) -> usize {
        self.n_vertices() + self.n_edges() * self.samples
    }

    /// Half-width `W·ε` of the window in physical units.
    pub fn half_width(&self) -> f64 {
        self.window as f64 * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// An oriented edge. `tail` is the west (or south) endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub orientation: Orientation,
}

/// Incident edge slots of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    /// Whether the vertex is the tail of the edge in this direction.
    pub fn outgoing_from_tail(self) -> bool {
        matches!(self, Direction::East | Direction::North)
    }
}

/// The cell `L_{i,j}`: vertex `(i, j)` together with its east and north edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LCell {
    pub i: i64,
    pub j: i64,
}

/// Edges owned by one L-cell; missing entries fall outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LCellEdges {
    pub east: Option<usize>,
    pub north: Option<usize>,
}

impl LCellEdges {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.east.into_iter().chain(self.north)
    }
}

/// Vertices, edges and incidence of a truncated grid. Immutable once built.
///
/// Vertex `(i, j)` has index `(j + W)(2W + 1) + (i + W)`. Horizontal edges
/// come first, indexed by their tail as `(j + W)·2W + (i + W)`; vertical
/// edges follow, indexed by their tail as `(j + W)(2W + 1) + (i + W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    edges: Vec<Edge>,
    incidence: Vec<[Option<usize>; 4]>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Self {
        let w = spec.window as i64;
        let side = spec.side();
        let n_h = side * 2 * spec.window;
        let mut edges = Vec::with_capacity(spec.n_edges());
        let mut incidence = vec![[None; 4]; spec.n_vertices()];
        let vidx = |i: i64, j: i64| ((j + w) as usize) * side + (i + w) as usize;
        for j in -w..=w {
            for i in -w..w {
                let e = edges.len();
                let (tail, head) = (vidx(i, j), vidx(i + 1, j));
                edges.push(Edge {
                    tail,
                    head,
                    orientation: Orientation::Horizontal,
                });
                incidence[tail][Direction::East as usize] = Some(e);
                incidence[head][Direction::West as usize] = Some(e);
            }
        }
        debug_assert_eq!(edges.len(), n_h);
        for j in -w..w {
            for i in -w..=w {
                let e = edges.len();
                let (tail, head) = (vidx(i, j), vidx(i, j + 1));
                edges.push(Edge {
                    tail,
                    head,
                    orientation: Orientation::Vertical,
                });
                incidence[tail][Direction::North as usize] = Some(e);
                incidence[head][Direction::South as usize] = Some(e);
            }
        }
        Grid {
            spec,
            edges,
            incidence,
        }
    }

    /// Validates the spec and builds the grid.
    pub fn build(spec: GridSpec) -> Result<Self, GridError> {
        spec.validate()?;
        Ok(Self::new(spec))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn window(&self) -> i64 {
        self.spec.window as i64
    }

    pub fn samples(&self) -> usize {
        self.spec.samples
    }

    pub fn n_vertices(&self) -> usize {
        self.spec.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_horizontal(&self) -> usize {
        self.spec.side() * 2 * self.spec.window
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        let w = self.window();
        i.abs() <= w && j.abs() <= w
    }

    pub fn vertex_index(&self, i: i64, j: i64) -> Option<usize> {
        if !self.contains(i, j) {
            return None;
        }
        let w = self.window();
        Some(((j + w) as usize) * self.spec.side() + (i + w) as usize)
    }

    pub fn vertex_coords(&self, v: usize) -> (i64, i64) {
        let side = self.spec.side();
        let w = self.window();
        ((v % side) as i64 - w, (v / side) as i64 - w)
    }

    /// Physical position `ε(i, j)` of a vertex.
    pub fn vertex_position(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.vertex_coords(v);
        (i as f64 * self.spec.epsilon, j as f64 * self.spec.epsilon)
    }

    /// Physical position of interior sample `k` (0-based) of edge `e`.
    pub fn sample_position(&self, e: usize, k: usize) -> (f64, f64) {
        let edge = self.edges[e];
        let (x, y) = self.vertex_position(edge.tail);
        let t = (k + 1) as f64 * self.spec.step();
        match edge.orientation {
            Orientation::Horizontal => (x + t, y),
            Orientation::Vertical => (x, y + t),
        }
    }

    pub fn incident(&self, v: usize) -> &[Option<usize>; 4] {
        &self.incidence[v]
    }

    pub fn edge_at(&self, v: usize, dir: Direction) -> Option<usize> {
        self.incidence[v][dir as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].iter().flatten().count()
    }

    /// Window-boundary vertices carry the Dirichlet condition.
    pub fn is_boundary(&self, v: usize) -> bool {
        let (i, j) = self.vertex_coords(v);
        let w = self.window();
        i.abs() == w || j.abs() == w
    }

    pub fn east_edge(&self, i: i64, j: i64) -> Option<usize> {
        self.vertex_index(i, j)
            .and_then(|v| self.edge_at(v, Direction::East))
    }

    pub fn north_edge(&self, i: i64, j: i64) -> Option<usize> {
        self.vertex_index(i, j)
            .and_then(|v| self.edge_at(v, Direction::North))
    }

    /// Edges of `L_{i,j}`; cells on the east or north rim lose the edges
    /// leaving the window.
    pub fn lcell_edges(&self, cell: LCell) -> LCellEdges {
        LCellEdges {
            east: self.east_edge(cell.i, cell.j),
            north: self.north_edge(cell.i, cell.j),
        }
    }

    /// Image of a vertex under the quarter turn `(i, j) ↦ (−j, i)`.
    pub fn rotate_vertex(&self, v: usize) -> usize {
        let (i, j) = self.vertex_coords(v);
        self.vertex_index(-j, i)
            .expect("square window is rotation invariant")
    }

    /// Image of an edge under the quarter turn, with a flag telling whether
    /// the orientation got reversed (horizontal edges become vertical edges
    /// traversed as before; vertical edges become horizontal edges traversed
    /// east to west).
    pub fn rotate_edge(&self, e: usize) -> (usize, bool) {
        let edge = self.edges[e];
        let (a, b) = (self.rotate_vertex(edge.tail), self.rotate_vertex(edge.head));
        let find = |x: usize, y: usize| {
            Direction::ALL.iter().find_map(|&d| {
                self.edge_at(x, d).filter(|&f| {
                    let g = self.edges[f];
                    (g.tail == x && g.head == y) || (g.tail == y && g.head == x)
                })
            })
        };
        let f = find(a, b).expect("rotation maps edges to edges");
        (f, self.edges[f].tail != a)
    }
}
