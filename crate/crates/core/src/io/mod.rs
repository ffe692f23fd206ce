//! Polytope files, MPS input and result output.

mod mps;
mod native;
mod output;

pub use mps::{
    load_mps, mps_to_constrained, parse_mps, BoundKind, MpsBound, MpsConversion, MpsModel, MpsRow,
    RowKind, VariableMap,
};
pub use native::{
    load_polytope, read_polytope, save_polytope, write_constrained, write_full, write_polytope,
    PolytopeFile,
};
pub use output::{load_samples_csv, read_samples_csv, save_json, save_samples_csv, write_samples_csv};
