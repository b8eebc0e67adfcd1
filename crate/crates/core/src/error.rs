//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while building, stepping or writing a simulation.
#[derive(Debug, Error)]
pub enum FsiError {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("near-singular deformation: det(I - grad d) = {det:e}")]
    SingularDeformation { det: f64 },

    #[error("solid flip-over in {} triangle(s), first is {}", .triangles.len(), .triangles[0])]
    FlipOver { triangles: Vec<usize> },

    #[error("interface topology: {0}")]
    Topology(String),

    #[error("remesh: {0}")]
    Remesh(String),

    #[error("point ({x:.6e}, {y:.6e}) lies {distance:.3e} outside the mesh")]
    PointOutside { x: f64, y: f64, distance: f64 },

    #[error("characteristic foot ({x:.6e}, {y:.6e}) lies {distance:.3e} outside the domain")]
    CharacteristicsExit { x: f64, y: f64, distance: f64 },

    #[error("assembly: element {element}: {detail}")]
    Assembly { element: usize, detail: String },

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("fixed point did not converge after {iterations} iterations (last increment {increment:.3e})")]
    FixedPoint { iterations: usize, increment: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vertex id {0} not found")]
    IdNotFound(u64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("only {peaks} peak(s) found, at least 3 are needed")]
    InsufficientOscillation { peaks: usize },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl FsiError {
    /// Process exit status used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            FsiError::Config(_) | FsiError::Parse { .. } => 2,
            FsiError::Io(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, FsiError>;
