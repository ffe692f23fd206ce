use nalgebra::DVector;

use super::{metropolis, Params, Step, WalkKind};
use crate::barrier::{dense_metric, slack, DenseMetric};
use crate::error::{Error, Result};
use crate::model::FullDimPolytope;
use crate::rng::ChainRng;

/// Open chord `(t_min, t_max)` of `{v + t u} ∩ K` from slack ratios.
pub fn chord_dense(p: &FullDimPolytope, v: &DVector<f64>, u: &DVector<f64>) -> Result<(f64, f64)> {
    let s = p.slack(v)?;
    let au = p.a() * u;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (si, ai) in s.iter().zip(au.iter()) {
        if *ai > 0.0 {
            hi = hi.min(si / ai);
        } else if *ai < 0.0 {
            lo = lo.max(si / ai);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::UnboundedPolytope(
            "chord is unbounded; preprocess the polytope first".into(),
        ));
    }
    Ok((lo, hi))
}

pub(crate) struct DenseState<'t> {
    p: &'t FullDimPolytope,
    v: DVector<f64>,
    metric: Option<DenseMetric>,
    xi: DVector<f64>,
}

impl<'t> DenseState<'t> {
    pub fn new(p: &'t FullDimPolytope, start: &[f64], params: &Params) -> Result<Self> {
        let v = DVector::from_column_slice(start);
        slack(p, &v)?;
        let metric = match params.kind.weight_kind() {
            Some(kind) => Some(dense_metric(p, &v, kind)?),
            None => None,
        };
        Ok(DenseState {
            p,
            xi: DVector::zeros(v.len()),
            v,
            metric,
        })
    }

    pub fn current(&self) -> &[f64] {
        self.v.as_slice()
    }

    fn draw(&mut self, rng: &mut ChainRng) {
        rng.fill_gaussian(self.xi.as_mut_slice());
    }

    pub fn step(&mut self, params: &Params, rng: &mut ChainRng) -> Result<Step> {
        self.draw(rng);
        match params.kind {
            WalkKind::Ball => {
                let z = &self.v + &self.xi * params.step_scale();
                if self.p.slack(&z).is_err() {
                    return Ok(Step::Infeasible);
                }
                self.v = z;
                Ok(Step::Accepted)
            }
            WalkKind::HitAndRun => {
                let norm = self.xi.norm();
                let u = &self.xi / norm;
                let (lo, hi) = chord_dense(self.p, &self.v, &u)?;
                let t = lo + (hi - lo) * rng.uniform();
                self.v += u * t;
                Ok(Step::Accepted)
            }
            kind => {
                let weights = kind.weight_kind().expect("barrier walk");
                let here = self.metric.as_ref().expect("barrier walks keep a metric");
                let delta = here.whiten_inverse(&self.xi) * params.step_scale();
                let z = &self.v + &delta;
                if slack(self.p, &z).is_err() {
                    return Ok(Step::Infeasible);
                }
                let there = match dense_metric(self.p, &z, weights) {
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
                    self.v = z;
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
    use crate::walks::{run_chain, Form, Target, WalkConfig};
    use nalgebra::DMatrix;

    fn triangle() -> FullDimPolytope {
        FullDimPolytope::new(
            DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        )
        .unwrap()
    }

    fn bisect(p: &FullDimPolytope, v: &DVector<f64>, u: &DVector<f64>, sign: f64) -> f64 {
        let inside = |t: f64| p.contains(&(v + u * (sign * t)), 0.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while inside(hi) {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sign * lo
    }

    #[test]
    fn chord_matches_bisection() {
        let p = triangle();
        let mut rng = ChainRng::new(5, 0);
        for _ in 0..20 {
            let v = DVector::from_vec(vec![0.1 + 0.3 * rng.uniform(), 0.1 + 0.3 * rng.uniform()]);
            let mut u = DVector::from_vec(rng.gaussian_vec(2));
            u /= u.norm();
            let (lo, hi) = chord_dense(&p, &v, &u).unwrap();
            assert!((hi - bisect(&p, &v, &u, 1.0)).abs() < 1e-10);
            assert!((lo - bisect(&p, &v, &u, -1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn interval_chord_is_whole_interval() {
        let p = FullDimPolytope::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let (lo, hi) = chord_dense(&p, &DVector::zeros(1), &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!((lo, hi), (-1.0, 1.0));
    }

    #[test]
    fn unbounded_chord_is_an_error() {
        let p = FullDimPolytope::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let u = DVector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(
            chord_dense(&p, &DVector::zeros(2), &u),
            Err(Error::UnboundedPolytope(_))
        ));
    }

    #[test]
    fn hit_and_run_mean_is_the_centroid() {
        let t = Target::from_full(triangle()).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::HitAndRun, Form::DenseK1);
        cfg.steps = 100_000;
        cfg.seed = 9;
        let out = run_chain(&t, &[0.2, 0.2], &cfg).unwrap();
        assert_eq!(out.accepted, out.proposed);
        let n = out.samples.nrows() as f64;
        let mean = out.samples.row_mean();
        // Coordinate variance on the triangle is 1/18; inflate for correlation.
        let se = (1.0f64 / 18.0 / n).sqrt() * 3.0;
        for j in 0..2 {
            assert!((mean[j] - 1.0 / 3.0).abs() < 3.0 * se, "{}", mean[j]);
        }
    }

    #[test]
    fn ball_walk_acceptance_limits() {
        let interval = FullDimPolytope::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let t = Target::from_full(interval).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::Ball, Form::DenseK1);
        cfg.steps = 2000;
        cfg.r = 1e-3;
        let small = run_chain(&t, &[0.0], &cfg).unwrap();
        assert!(small.acceptance_rate() > 0.99);
        cfg.r = 1e4;
        let huge = run_chain(&t, &[0.0], &cfg).unwrap();
        assert!(huge.acceptance_rate() < 0.01);
        assert_eq!(huge.infeasible_rejects, huge.rejected());
    }

    #[test]
    fn proposal_scales_linearly_in_r() {
        let p = triangle();
        let v = DVector::from_vec(vec![0.25, 0.3]);
        let m = dense_metric(&p, &v, crate::barrier::WeightKind::Dikin).unwrap();
        let xi = DVector::from_vec(vec![0.7, -1.1]);
        let a = m.whiten_inverse(&xi) * 0.1;
        let b = m.whiten_inverse(&xi) * 0.2;
        assert!((b - a * 2.0).norm() < 1e-15);
    }

    #[test]
    fn interval_dikin_proposal_spread() {
        // H = 2 at the center of [-1, 1], so the step sd is r / (c √2).
        let p = FullDimPolytope::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let m = dense_metric(&p, &DVector::zeros(1), crate::barrier::WeightKind::Dikin).unwrap();
        let sd = m.whiten_inverse(&DVector::from_element(1, 1.0))[0];
        assert!((sd - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn proposal_covariance_matches_inverse_metric() {
        let p = triangle();
        let v = DVector::from_vec(vec![0.25, 0.3]);
        let m = dense_metric(&p, &v, crate::barrier::WeightKind::Vaidya).unwrap();
        let mut rng = ChainRng::new(21, 0);
        let n = 100_000;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let d = m.whiten_inverse(&DVector::from_vec(rng.gaussian_vec(2)));
            cov += &d * d.transpose();
        }
        cov /= n as f64;
        let expect = m.h().clone().try_inverse().unwrap();
        assert!((&cov - &expect).norm() < 0.05 * expect.norm());
    }
}
