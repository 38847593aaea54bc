//! Structure-preserving dual-field mixed finite elements for incompressible Hall MHD.

pub mod assembly;
pub mod basis;
pub mod complex;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod runner;
pub mod scalar;
pub mod scheme;
pub mod sparse;
pub mod vtk;

pub use complex::{DeRhamComplex, SpaceTag};
pub use error::{Error, Result};
pub use field::{DiscreteField, TimeLabel};
pub use mesh::{BoxDomain, HexMesh, MappingKind, MappingSpec};
pub use scalar::Real;
pub use sparse::{SolveMethod, SparseMatrix};
pub use assembly::Assembler;
pub use diagnostics::{DiagnosticsRecord, Energies};
pub use runner::{execute, RunConfig, RunSummary, Scenario};
pub use scheme::{HallMhdScheme, SchemeParams, SimulationState, SourceSpec};

pub type Mesh64 = HexMesh<f64>;
pub type Complex64 = DeRhamComplex<f64>;
pub type Assembler64 = Assembler<f64>;
pub type Scheme64 = HallMhdScheme<f64>;
pub type State64 = SimulationState<f64>;
pub type Field64 = DiscreteField<f64>;

pub type Mesh32 = HexMesh<f32>;
pub type Complex32 = DeRhamComplex<f32>;
pub type Assembler32 = Assembler<f32>;
pub type Scheme32 = HallMhdScheme<f32>;
