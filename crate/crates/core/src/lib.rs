//! Uniform sampling from convex polytopes with Markov chain Monte Carlo.

pub mod barrier;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lpsolve;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod walks;

pub use error::{Error, Result};
pub use linalg::SparseMatrix;
pub use model::{
    make_birkhoff, make_hypercube, make_simplex, to_full_dimensional, AffineMap,
    ConstrainedPolytope, FullDimPolytope, Generator,
};
pub use walks::{run_chain, Chain, ChainOutput, Form, Target, WalkConfig, WalkKind};
