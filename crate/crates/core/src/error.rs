use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("asymmetric distance at ({i},{j}): {dij} vs {dji}")]
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("negative or non-finite distance {value} at ({i},{j})")]
    InvalidEntry { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal {value} at ({i},{i})")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("triangle inequality violated at ({i},{k},{j}): d({i},{k})={dik} > d({i},{j})+d({j},{k})={via}")]
    Triangle { i: usize, j: usize, k: usize, dik: f64, via: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error("graph is disconnected at scale {scale}: components {components:?}")]
    Disconnected { scale: f64, components: Vec<Vec<usize>> },
    #[error("pair ({i},{j}) has zero membership; supply a truncation floor")]
    ZeroMembership { i: usize, j: usize },
    #[error("infinite target distance at ({i},{j}) under the strict policy")]
    InfiniteTarget { i: usize, j: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("optimizer diverged at iteration {iteration} (last finite loss {last_loss})")]
    Diverged { iteration: usize, last_loss: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(stage: &str) -> impl FnOnce(Error) -> Error + '_ {
        move |e| Error::Stage {
            stage: stage.into(),
            source: Box::new(e),
        }
    }

    /// Numerical failures (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite(_) | Error::Diverged { .. } | Error::Quadrature(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
