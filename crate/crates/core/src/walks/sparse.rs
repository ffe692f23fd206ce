use super::{metropolis, Params, Step, WalkKind};
use crate::barrier::{sparse_metric, SparseBody, SparseMetric};
use crate::error::{Error, Result};
use crate::linalg::{NormalEquations, NormalFactor, SolveWork};
use crate::model::ConstrainedPolytope;
use crate::rng::ChainRng;

/// Transitions between two corrections of `A x = b` drift.
pub const REPROJECT_EVERY: usize = 1024;

/// Orthogonal projection onto `null(A)` through a factor of `A Aᵀ`.
#[derive(Debug)]
pub struct Projector {
    normal: NormalEquations,
    factor: Option<NormalFactor>,
}

impl Projector {
    pub fn new(p: &ConstrainedPolytope) -> Result<Self> {
        let normal = NormalEquations::new(p.a());
        let factor = if normal.n() == 0 {
            None
        } else {
            Some(normal.factor(&vec![1.0; p.d()]).map_err(|_| Error::RankDeficient {
                rows: Vec::new(),
            })?)
        };
        Ok(Projector { normal, factor })
    }

    /// `u ← u − Aᵀ (A Aᵀ)⁻¹ A u`
    pub fn project(&self, p: &ConstrainedPolytope, u: &mut [f64]) {
        self.remove_row_space(p, u, None);
    }

    /// Least-squares correction `x ← x − Aᵀ (A Aᵀ)⁻¹ (A x − b)`.
    pub fn correct(&self, p: &ConstrainedPolytope, x: &mut [f64]) {
        self.remove_row_space(p, x, Some(p.b()));
    }

    fn remove_row_space(&self, p: &ConstrainedPolytope, u: &mut [f64], b: Option<&[f64]>) {
        let Some(f) = &self.factor else { return };
        let mut r = p.a().mul_vec(u);
        if let Some(b) = b {
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= bi;
            }
        }
        let y = f.solve(&self.normal, &r);
        for (ui, ci) in u.iter_mut().zip(p.a().tr_mul_vec(&y)) {
            *ui -= ci;
        }
    }
}

/// Open chord `(t_min, t_max)` of `{x + t u} ∩ K` from the trailing
/// coordinates; `u` must lie in `null(A)`.
pub fn chord_sparse(p: &ConstrainedPolytope, x: &[f64], u: &[f64]) -> Result<(f64, f64)> {
    let lead = p.lead();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (xi, ui) in x[lead..].iter().zip(&u[lead..]) {
        if *ui > 0.0 {
            lo = lo.max(-xi / ui);
        } else if *ui < 0.0 {
            hi = hi.min(-xi / ui);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::UnboundedPolytope(
            "chord is unbounded; preprocess the polytope first".into(),
        ));
    }
    Ok((lo, hi))
}

pub(crate) struct SparseState<'t> {
    body: &'t SparseBody,
    projector: Projector,
    x: Vec<f64>,
    metric: Option<SparseMetric>,
    work: SolveWork,
    noise: Vec<f64>,
    since_correction: usize,
}

impl<'t> SparseState<'t> {
    pub fn new(body: &'t SparseBody, start: &[f64], params: &Params) -> Result<Self> {
        body.interior_tail(start)?;
        let p = body.polytope();
        if p.residual(start) > p.eq_tolerance() {
            return Err(Error::invalid(format!(
                "start point violates A x = b by {:e}",
                p.residual(start)
            )));
        }
        let mut work = body.work();
        let metric = match params.kind.weight_kind() {
            Some(kind) => Some(sparse_metric(body, start, kind, params.epsilon, &mut work)?),
            None => None,
        };
        let noise_len = if metric.is_some() { body.k() } else { p.d() };
        Ok(SparseState {
            body,
            projector: Projector::new(p)?,
            x: start.to_vec(),
            metric,
            work,
            noise: vec![0.0; noise_len],
            since_correction: 0,
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.x
    }

    pub fn step(&mut self, params: &Params, rng: &mut ChainRng) -> Result<Step> {
        let outcome = self.transition(params, rng)?;
        self.since_correction += 1;
        if self.since_correction >= REPROJECT_EVERY {
            self.since_correction = 0;
            self.correct_drift(params);
        }
        Ok(outcome)
    }

    fn correct_drift(&mut self, params: &Params) {
        let p = self.body.polytope();
        let mut y = self.x.clone();
        self.projector.correct(p, &mut y);
        if self.body.interior_tail(&y).is_err() {
            return;
        }
        match params.kind.weight_kind() {
            None => self.x = y,
            Some(kind) => {
                if let Ok(m) = sparse_metric(self.body, &y, kind, params.epsilon, &mut self.work) {
                    self.x = y;
                    self.metric = Some(m);
                }
            }
        }
    }

    fn transition(&mut self, params: &Params, rng: &mut ChainRng) -> Result<Step> {
        let p = self.body.polytope();
        let lead = p.lead();
        rng.fill_gaussian(&mut self.noise);
        match params.kind {
            WalkKind::Ball => {
                let mut u = self.noise.clone();
                self.projector.project(p, &mut u);
                let h = params.step_scale();
                let z: Vec<f64> = self.x.iter().zip(&u).map(|(x, u)| x + h * u).collect();
                if !z[lead..].iter().all(|&v| v > 0.0) {
                    return Ok(Step::Infeasible);
                }
                self.x = z;
                Ok(Step::Accepted)
            }
            WalkKind::HitAndRun => {
                let mut u = self.noise.clone();
                self.projector.project(p, &mut u);
                let (lo, hi) = chord_sparse(p, &self.x, &u)?;
                let t = lo + (hi - lo) * rng.uniform();
                for (x, u) in self.x.iter_mut().zip(&u) {
                    *x += t * u;
                }
                Ok(Step::Accepted)
            }
            kind => {
                let weights = kind.weight_kind().expect("barrier walk");
                let here = self.metric.as_ref().expect("barrier walks keep a metric");
                let mut delta = here.apply_sqrt_pseudo_inverse(self.body, &self.noise);
                let h = params.step_scale();
                delta.iter_mut().for_each(|d| *d *= h);
                let z: Vec<f64> = self.x.iter().zip(&delta).map(|(x, d)| x + d).collect();
                if self.body.interior_tail(&z).is_err() {
                    return Ok(Step::Infeasible);
                }
                let there = match sparse_metric(self.body, &z, weights, params.epsilon, &mut self.work) {
                    Ok(m) => m,
                    Err(Error::BoundaryViolation { .. }) => return Ok(Step::Infeasible),
                    Err(e) => {
                        log::warn!("rejecting proposal: {e}");
                        return Ok(Step::Rejected);
                    }
                };
                let scale = params.precision_scale();
                let log_alpha = there.log_density(&delta, scale) - here.log_density(&delta, scale);
                if metropolis(log_alpha, rng) {
                    self.x = z;
                    self.metric = Some(there);
                    Ok(Step::Accepted)
                } else {
                    Ok(Step::Rejected)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::WeightKind;
    use crate::model::{make_hypercube, make_simplex, to_full_dimensional};
    use crate::walks::{run_chain, Chain, Form, Target, WalkConfig};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn projector_is_idempotent_and_annihilates_rows() {
        let p = make_hypercube(3).unwrap();
        let pr = Projector::new(&p).unwrap();
        let mut rng = ChainRng::new(2, 0);
        let mut u = rng.gaussian_vec(9);
        pr.project(&p, &mut u);
        assert!(p.a().mul_vec(&u).iter().all(|v| v.abs() < 1e-14));
        let mut again = u.clone();
        pr.project(&p, &mut again);
        for (a, b) in u.iter().zip(&again) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn correction_restores_equalities() {
        let p = make_simplex(5).unwrap();
        let pr = Projector::new(&p).unwrap();
        let mut x = vec![0.2 + 1e-5, 0.2, 0.2, 0.2, 0.2];
        pr.correct(&p, &mut x);
        assert!(p.residual(&x) < 1e-15);
    }

    #[test]
    fn chord_matches_dense_form() {
        let p = make_hypercube(2).unwrap();
        let f = to_full_dimensional(&p).unwrap();
        let map = f.map().unwrap();
        let x = [0.3, -0.4, 0.7, 1.4, 1.3, 0.6];
        let mut u = vec![0.5, -1.0, 0.2, 0.1, 0.0, 3.0];
        Projector::new(&p).unwrap().project(&p, &mut u);
        let (lo, hi) = chord_sparse(&p, &x, &u).unwrap();
        let v = map.pull(&DVector::from_column_slice(&x));
        let uv = map.q2().transpose() * DVector::from_column_slice(&u);
        let (dlo, dhi) = crate::walks::chord_dense(&f, &v, &uv).unwrap();
        assert!((lo - dlo).abs() < 1e-10 && (hi - dhi).abs() < 1e-10);
    }

    #[test]
    fn proposals_stay_in_the_affine_hull() {
        let p = make_simplex(10).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        for kind in [WalkKind::Ball, WalkKind::HitAndRun, WalkKind::Dikin] {
            let mut cfg = WalkConfig::new(kind, Form::SparseK2);
            cfg.steps = 10_000;
            cfg.seed = 4;
            let out = run_chain(&t, &[0.1; 10], &cfg).unwrap();
            let worst = out
                .samples
                .row_iter()
                .map(|r| p.residual(&r.iter().copied().collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            assert!(worst < 1e-6 * 2.0, "{kind}: {worst}");
        }
    }

    #[test]
    fn zero_radius_limit_stays_put() {
        let p = make_simplex(4).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::Dikin, Form::SparseK2);
        cfg.r = 1e-12;
        let mut chain = Chain::new(&t, &[0.25; 4], &cfg).unwrap();
        chain.step().unwrap();
        for v in chain.current() {
            assert!((v - 0.25).abs() < 1e-11);
        }
    }

    #[test]
    fn pushforward_covariance_matches_dense_metric() {
        let p = make_hypercube(2).unwrap();
        let body = SparseBody::new(&p).unwrap();
        let f = to_full_dimensional(&p).unwrap();
        let map = f.map().unwrap();
        let x = [0.3, -0.4, 0.7, 1.4, 1.3, 0.6];
        let v = map.pull(&DVector::from_column_slice(&x));
        let mut work = body.work();
        let sm = sparse_metric(&body, &x, WeightKind::John, 1e-12, &mut work).unwrap();
        let dm = crate::barrier::dense_metric(&f, &v, WeightKind::John).unwrap();
        let mut rng = ChainRng::new(8, 0);
        let n = 100_000;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let d = sm.apply_sqrt_pseudo_inverse(&body, &rng.gaussian_vec(4));
            let q = map.q2().transpose() * DVector::from_vec(d);
            cov += &q * q.transpose();
        }
        cov /= n as f64;
        let expect = dm.h().clone().try_inverse().unwrap();
        assert!((&cov - &expect).norm() < 0.05 * expect.norm(), "{cov} {expect}");
    }
}
