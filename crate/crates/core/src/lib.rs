pub mod constitutive;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod scenario;
pub mod timestepper;
pub mod transport;
