//! Broken polynomial spaces `U_h^k` (vector) and `X_h^k` (tensor), local
//! L²-projections, and face traces, jumps and averages.

mod basis;
mod field;
mod space;

pub use basis::{dim_p, ReferenceBasis};
pub use field::{export_samples, BrokenField, FaceTraces, Rank};
pub use space::{CellData, DgSpace, FaceData, QuadratureSettings};
