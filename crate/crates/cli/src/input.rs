//! Loading and preprocessing of command-line inputs.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use polysample::io::{load_mps, load_polytope, mps_to_constrained, PolytopeFile};
use polysample::preprocess::{facial_reduction, initialize, initialize_full, FacialReductionResult};
use polysample::{ConstrainedPolytope, Error, Form, FullDimPolytope, Generator, Result, Target};

#[derive(Clone, Debug)]
pub enum Source {
    Generator(Generator),
    File(PathBuf),
}

impl Source {
    /// A `name:size` spec names a generator unless a file of that name exists.
    pub fn parse(s: &str) -> Result<Source> {
        let path = Path::new(s);
        if path.exists() {
            return Ok(Source::File(path.to_path_buf()));
        }
        let looks_like_spec = s.contains(':') && !s.contains('/') && !s.contains('.');
        match s.parse::<Generator>() {
            Ok(g) => Ok(Source::Generator(g)),
            Err(e) if looks_like_spec => Err(e),
            Err(_) => Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no such file: {s}"),
            ))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Source::Generator(g) => g.to_string(),
            Source::File(p) => p.display().to_string(),
        }
    }
}

pub enum Loaded {
    Constrained {
        polytope: ConstrainedPolytope,
        generator: Option<Generator>,
    },
    Full(FullDimPolytope),
}

pub fn load(source: &Source) -> Result<Loaded> {
    match source {
        Source::Generator(g) => Ok(Loaded::Constrained {
            polytope: g.build()?,
            generator: Some(*g),
        }),
        Source::File(path) => {
            let is_mps = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.eq_ignore_ascii_case("mps"))
                .unwrap_or(false);
            if is_mps {
                let conv = mps_to_constrained(&load_mps(path)?)?;
                return Ok(Loaded::Constrained {
                    polytope: conv.polytope,
                    generator: None,
                });
            }
            Ok(match load_polytope(path)? {
                PolytopeFile::Constrained(p) => Loaded::Constrained {
                    polytope: p,
                    generator: None,
                },
                PolytopeFile::Full(f) => Loaded::Full(f),
            })
        }
    }
}

/// A polytope ready for sampling with a strictly interior start point.
pub enum Prepared {
    Constrained {
        polytope: ConstrainedPolytope,
        x0: Vec<f64>,
        delta: f64,
        reduction: Option<FacialReductionResult>,
        original_d: usize,
    },
    Full {
        polytope: FullDimPolytope,
        v0: Vec<f64>,
        delta: f64,
    },
}

/// Generators are full-dimensional with a known center, so they skip the
/// linear programs; files go through facial reduction and initialization.
pub fn prepare(loaded: Loaded) -> Result<Prepared> {
    match loaded {
        Loaded::Constrained {
            polytope,
            generator: Some(g),
        } => Ok(Prepared::Constrained {
            original_d: polytope.d(),
            x0: g.center(),
            delta: g.center_margin(),
            polytope,
            reduction: None,
        }),
        Loaded::Constrained {
            polytope,
            generator: None,
        } => {
            let original_d = polytope.d();
            let fr = facial_reduction(&polytope)?;
            let init = initialize(&fr.reduced)?;
            if !init.strictly_feasible() {
                return Err(Error::DegeneratePolytope(format!(
                    "no strictly interior point after facial reduction (margin {:e})",
                    init.delta
                )));
            }
            if init.unbounded {
                log::warn!("interior margin reached its cap; the polytope may be unbounded");
            }
            Ok(Prepared::Constrained {
                polytope: fr.reduced.clone(),
                x0: init.x0,
                delta: init.delta,
                reduction: Some(fr),
                original_d,
            })
        }
        Loaded::Full(f) => {
            let init = initialize_full(&f)?;
            if !init.strictly_feasible() {
                return Err(Error::DegeneratePolytope(format!(
                    "polytope has no interior (margin {:e})",
                    init.delta
                )));
            }
            Ok(Prepared::Full {
                polytope: f,
                v0: init.x0,
                delta: init.delta,
            })
        }
    }
}

impl Prepared {
    pub fn target(&self, form: Form) -> Result<Target> {
        match self {
            Prepared::Constrained { polytope, .. } => Target::new(polytope, form),
            Prepared::Full { polytope, .. } => {
                if form != Form::DenseK1 {
                    return Err(Error::InvalidArgument(
                        "inequality-form input can only be sampled with --form dense".into(),
                    ));
                }
                Target::from_full(polytope.clone())
            }
        }
    }

    /// Start point in the target's coordinates.
    pub fn start(&self, target: &Target) -> Result<Vec<f64>> {
        match self {
            Prepared::Constrained { x0, .. } => target.from_constrained(x0),
            Prepared::Full { v0, .. } => Ok(v0.clone()),
        }
    }

    /// Smallest slack of the start point.
    pub fn margin(&self) -> f64 {
        match self {
            Prepared::Constrained { delta, .. } | Prepared::Full { delta, .. } => *delta,
        }
    }

    pub fn d_eff(&self) -> usize {
        match self {
            Prepared::Constrained { polytope, .. } => polytope.d_eff(),
            Prepared::Full { polytope, .. } => polytope.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prepared::Constrained { original_d, .. } => *original_d,
            Prepared::Full { polytope, .. } => polytope.dim(),
        }
    }

    /// Native samples mapped to the input's own coordinates.
    pub fn export(&self, target: &Target, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let fr = match self {
            Prepared::Full { .. } => return Ok(samples.clone()),
            Prepared::Constrained { reduction, .. } => reduction,
        };
        let x = target.to_constrained(samples)?;
        let Some(fr) = fr else { return Ok(x) };
        let mut out = DMatrix::zeros(x.nrows(), fr.original_dim());
        for (i, row) in x.row_iter().enumerate() {
            let v: Vec<f64> = row.iter().copied().collect();
            out.row_mut(i).copy_from_slice(&fr.lift(&v)?);
        }
        Ok(out)
    }

    /// Inverse of [`Prepared::export`].
    pub fn import(&self, target: &Target, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let reduced = match self {
            Prepared::Full { .. } => return Ok(samples.clone()),
            Prepared::Constrained {
                reduction: Some(fr), ..
            } => {
                if samples.ncols() != fr.original_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: fr.original_dim(),
                        found: samples.ncols(),
                    });
                }
                samples.select_columns(&fr.columns)
            }
            Prepared::Constrained { .. } => samples.clone(),
        };
        let mut out = DMatrix::zeros(reduced.nrows(), target.native_dim());
        for (i, row) in reduced.row_iter().enumerate() {
            let x: Vec<f64> = row.iter().copied().collect();
            out.row_mut(i).copy_from_slice(&target.from_constrained(&x)?);
        }
        Ok(out)
    }
}
