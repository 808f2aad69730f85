use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("edge length must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("window radius must be at least 1")]
    ZeroWindow,
    #[error("samples per edge must be at least 1")]
    ZeroSamples,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VertexSetError {
    #[error("generating vector must be nonzero")]
    ZeroVector,
    #[error("generating vectors {0:?} and {1:?} are linearly dependent")]
    Dependent((i64, i64), (i64, i64)),
    #[error("base list is empty")]
    EmptyBase,
    #[error("base points {0:?} and {1:?} differ by a lattice vector")]
    RedundantBase((i64, i64), (i64, i64)),
    #[error("a periodicity cell needs a periodic vertex set")]
    NotPeriodic,
    #[error("strip radius must be positive, got {0}")]
    StripRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("norm exponent must be at least 1, got {0}")]
    Exponent(f64),
    #[error("field has zero mass")]
    ZeroMass,
    #[error("field length {got} does not match grid ({expected} dofs)")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at dof {0}")]
    NonFinite(usize),
}

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} = {value} outside {range}")]
pub struct ParamViolation {
    pub field: &'static str,
    pub value: f64,
    pub range: &'static str,
}

/// Every constraint a parameter set violates.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameters: {}", list(.0))]
pub struct ParamError(pub Vec<ParamViolation>);

fn list(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("initial state has zero mass")]
    ZeroMass,
    #[error("initial state length {got} does not match problem dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanarError {
    #[error("{case} problem not attained for p = {p}, q = {q}: {reason}")]
    Unattained {
        case: &'static str,
        p: f64,
        q: f64,
        reason: &'static str,
    },
    #[error("raster spacing must be positive, got {0}")]
    Spacing(f64),
    #[error("raster half-size must be at least 1")]
    EmptyRaster,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(
        "bracket [{lo}, {hi}] does not straddle the threshold (signs {lo_sign} and {hi_sign})"
    )]
    NoStraddle {
        lo: f64,
        hi: f64,
        lo_sign: String,
        hi_sign: String,
    },
    #[error("empty epsilon list")]
    EmptySweep,
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    VertexSet(#[from] VertexSetError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
