//! Random walks and the Metropolis-Hastings chain driver.
//!
//! Barrier walks propose `z ~ N(x, (r/c)² M_x⁻¹)` and accept with
//! `min{1, p_z(x) / p_x(z)}` using the exact Gaussian densities of both
//! proposals. Ball walk and hit-and-run are symmetric and skip the ratio.

mod dense;
mod sparse;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::{SparseBody, WeightKind, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::model::{to_full_dimensional, ConstrainedPolytope, FullDimPolytope};
use crate::rng::ChainRng;

pub use dense::chord_dense;
pub use sparse::{chord_sparse, Projector, REPROJECT_EVERY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    Ball,
    HitAndRun,
    Dikin,
    Vaidya,
    John,
    LeeSidford,
}

impl WalkKind {
    pub const ALL: [WalkKind; 6] = [
        WalkKind::Ball,
        WalkKind::HitAndRun,
        WalkKind::Dikin,
        WalkKind::Vaidya,
        WalkKind::John,
        WalkKind::LeeSidford,
    ];

    pub fn weight_kind(self) -> Option<WeightKind> {
        match self {
            WalkKind::Ball | WalkKind::HitAndRun => None,
            WalkKind::Dikin => Some(WeightKind::Dikin),
            WalkKind::Vaidya => Some(WeightKind::Vaidya),
            WalkKind::John => Some(WeightKind::John),
            WalkKind::LeeSidford => Some(WeightKind::LeeSidford),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WalkKind::Ball => "ball",
            WalkKind::HitAndRun => "hit_and_run",
            WalkKind::Dikin => "dikin",
            WalkKind::Vaidya => "vaidya",
            WalkKind::John => "john",
            WalkKind::LeeSidford => "lee_sidford",
        }
    }
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WalkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        WalkKind::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "hr" && *k == WalkKind::HitAndRun))
            .ok_or_else(|| Error::invalid(format!("unknown walk {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    DenseK1,
    SparseK2,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::DenseK1 => "dense_k1",
            Form::SparseK2 => "sparse_k2",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" | "dense_k1" | "k1" => Ok(Form::DenseK1),
            "sparse" | "sparse_k2" | "k2" => Ok(Form::SparseK2),
            other => Err(Error::invalid(format!("unknown form {other:?}"))),
        }
    }
}

/// Variance correction `c` of a walk in effective dimension `d_eff` with `k`
/// inequalities. Ball walk steps are scaled by `1/c` as well.
pub fn variance_correction(kind: WalkKind, d_eff: usize, k: usize) -> f64 {
    let d = d_eff as f64;
    match kind {
        WalkKind::Ball | WalkKind::Dikin | WalkKind::LeeSidford => d.sqrt(),
        WalkKind::Vaidya => (k as f64 * d).powf(0.25),
        WalkKind::John => d.powf(0.75),
        WalkKind::HitAndRun => 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub kind: WalkKind,
    pub form: Form,
    pub r: f64,
    /// `ε` of the constrained-form metric, relative to its largest entry.
    pub epsilon: f64,
    pub seed: u64,
    /// Stream index for independent chains sharing a seed.
    pub stream: u64,
    pub steps: usize,
    pub thin: usize,
    pub burn_in: usize,
    /// Replaces the default variance correction when set.
    pub c_override: Option<f64>,
}

impl WalkConfig {
    pub fn new(kind: WalkKind, form: Form) -> Self {
        WalkConfig {
            kind,
            form,
            r: 0.5,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            stream: 0,
            steps: 1000,
            thin: 1,
            burn_in: 0,
            c_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid(format!("r must be positive, got {}", self.r)));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(c) = self.c_override {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("variance correction must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// A polytope prepared for one of the two forms.
#[derive(Debug)]
pub enum Target {
    Dense(FullDimPolytope),
    Sparse(SparseBody),
}

impl Target {
    pub fn new(p: &ConstrainedPolytope, form: Form) -> Result<Self> {
        match form {
            Form::DenseK1 => {
                let f = to_full_dimensional(p)?;
                f.check_bounded()?;
                Ok(Target::Dense(f))
            }
            Form::SparseK2 => Ok(Target::Sparse(SparseBody::new(p)?)),
        }
    }

    pub fn from_full(f: FullDimPolytope) -> Result<Self> {
        f.check_bounded()?;
        Ok(Target::Dense(f))
    }

    pub fn form(&self) -> Form {
        match self {
            Target::Dense(_) => Form::DenseK1,
            Target::Sparse(_) => Form::SparseK2,
        }
    }

    pub fn d_eff(&self) -> usize {
        match self {
            Target::Dense(f) => f.dim(),
            Target::Sparse(b) => b.d_eff(),
        }
    }

    pub fn n_inequalities(&self) -> usize {
        match self {
            Target::Dense(f) => f.n_constraints(),
            Target::Sparse(b) => b.k(),
        }
    }

    /// Length of a state vector.
    pub fn native_dim(&self) -> usize {
        match self {
            Target::Dense(f) => f.dim(),
            Target::Sparse(b) => b.polytope().d(),
        }
    }

    /// Maps a point of the constrained form to this target's coordinates.
    pub fn from_constrained(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Target::Sparse(b) => {
                if x.len() != b.polytope().d() {
                    return Err(Error::DimensionMismatch {
                        expected: b.polytope().d(),
                        found: x.len(),
                    });
                }
                Ok(x.to_vec())
            }
            Target::Dense(f) => {
                let map = f
                    .map()
                    .ok_or_else(|| Error::invalid("polytope has no constrained form"))?;
                if x.len() != map.q2().nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: map.q2().nrows(),
                        found: x.len(),
                    });
                }
                Ok(map.pull(&DVector::from_column_slice(x)).as_slice().to_vec())
            }
        }
    }

    /// Maps native samples (one per row) to the constrained form.
    pub fn to_constrained(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Target::Sparse(_) => Ok(samples.clone()),
            Target::Dense(f) => {
                let map = f
                    .map()
                    .ok_or_else(|| Error::invalid("polytope has no constrained form"))?;
                let mut out = samples * map.q2().transpose();
                for mut row in out.row_iter_mut() {
                    row += map.shift().transpose();
                }
                Ok(out)
            }
        }
    }

    /// Non-strict membership in native coordinates.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Target::Dense(f) => x.len() == f.dim() && f.contains(&DVector::from_column_slice(x), tol),
            Target::Sparse(b) => {
                let p = b.polytope();
                x.len() == p.d()
                    && p.residual(x) <= tol.max(p.eq_tolerance())
                    && x[p.lead()..].iter().all(|&v| v >= -tol)
            }
        }
    }
}

/// Per-step wall-clock summary in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub count: usize,
    pub total: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl StepTiming {
    fn record(&mut self, secs: f64) {
        if self.count == 0 {
            self.min = secs;
            self.max = secs;
        } else {
            self.min = self.min.min(secs);
            self.max = self.max.max(secs);
        }
        self.count += 1;
        self.total += secs;
        self.mean = self.total / self.count as f64;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    /// Kept states, one per row, in the target's native coordinates.
    pub samples: DMatrix<f64>,
    pub accepted: usize,
    pub proposed: usize,
    /// Rejections because the proposal left the polytope.
    pub infeasible_rejects: usize,
    pub per_step_seconds: StepTiming,
}

impl ChainOutput {
    pub fn rejected(&self) -> usize {
        self.proposed - self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Result of one transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Accepted,
    Rejected,
    Infeasible,
}

enum State<'t> {
    Dense(dense::DenseState<'t>),
    Sparse(sparse::SparseState<'t>),
}

/// Walk parameters resolved against a target.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Params {
    pub kind: WalkKind,
    pub r: f64,
    pub c: f64,
    pub epsilon: f64,
}

impl Params {
    /// `(c/r)²`, the precision multiplier of the metric.
    pub fn precision_scale(&self) -> f64 {
        (self.c / self.r).powi(2)
    }

    pub fn step_scale(&self) -> f64 {
        self.r / self.c
    }
}

/// Accepts with probability `min{1, exp(log_alpha)}`.
pub(crate) fn metropolis(log_alpha: f64, rng: &mut ChainRng) -> bool {
    if log_alpha >= 0.0 {
        return true;
    }
    if log_alpha.is_nan() {
        return false;
    }
    rng.uniform().ln() < log_alpha
}

/// A resumable chain: its state persists between calls to [`Chain::run`].
pub struct Chain<'t> {
    state: State<'t>,
    params: Params,
    rng: ChainRng,
    accepted: usize,
    proposed: usize,
    infeasible: usize,
}

impl<'t> Chain<'t> {
    /// `start` is in the target's native coordinates and must be strictly
    /// interior.
    pub fn new(target: &'t Target, start: &[f64], config: &WalkConfig) -> Result<Self> {
        config.validate()?;
        if start.len() != target.native_dim() {
            return Err(Error::DimensionMismatch {
                expected: target.native_dim(),
                found: start.len(),
            });
        }
        if target.form() != config.form {
            return Err(Error::invalid(format!(
                "config is for the {} form but the target is {}",
                config.form,
                target.form()
            )));
        }
        let c = config
            .c_override
            .unwrap_or_else(|| variance_correction(config.kind, target.d_eff(), target.n_inequalities()));
        let params = Params {
            kind: config.kind,
            r: config.r,
            c,
            epsilon: config.epsilon,
        };
        let state = match target {
            Target::Dense(f) => State::Dense(dense::DenseState::new(f, start, &params)?),
            Target::Sparse(b) => State::Sparse(sparse::SparseState::new(b, start, &params)?),
        };
        Ok(Chain {
            state,
            params,
            rng: ChainRng::new(config.seed, config.stream),
            accepted: 0,
            proposed: 0,
            infeasible: 0,
        })
    }

    pub fn variance_correction(&self) -> f64 {
        self.params.c
    }

    pub fn current(&self) -> &[f64] {
        match &self.state {
            State::Dense(s) => s.current(),
            State::Sparse(s) => s.current(),
        }
    }

    pub fn step(&mut self) -> Result<Step> {
        let outcome = match &mut self.state {
            State::Dense(s) => s.step(&self.params, &mut self.rng)?,
            State::Sparse(s) => s.step(&self.params, &mut self.rng)?,
        };
        self.proposed += 1;
        match outcome {
            Step::Accepted => self.accepted += 1,
            Step::Infeasible => self.infeasible += 1,
            Step::Rejected => {}
        }
        Ok(outcome)
    }

    /// Runs `steps · thin` transitions and keeps every `thin`-th state.
    /// Counters cover only this call.
    pub fn run(&mut self, steps: usize, thin: usize) -> Result<ChainOutput> {
        if thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        let (a0, p0, i0) = (self.accepted, self.proposed, self.infeasible);
        let dim = self.current().len();
        let mut samples = DMatrix::zeros(steps, dim);
        let mut timing = StepTiming::default();
        for row in 0..steps {
            for _ in 0..thin {
                let t = Instant::now();
                self.step()?;
                timing.record(t.elapsed().as_secs_f64());
            }
            samples.row_mut(row).copy_from_slice(self.current());
        }
        Ok(ChainOutput {
            samples,
            accepted: self.accepted - a0,
            proposed: self.proposed - p0,
            infeasible_rejects: self.infeasible - i0,
            per_step_seconds: timing,
        })
    }

    pub fn burn_in(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Burn-in followed by `steps` kept states, every `thin`-th transition.
pub fn run_chain(target: &Target, start: &[f64], config: &WalkConfig) -> Result<ChainOutput> {
    let mut chain = Chain::new(target, start, config)?;
    chain.burn_in(config.burn_in)?;
    chain.run(config.steps, config.thin)
}
