//! Effective sample size and the radial uniformity test.
//!
//! ESS uses Geyer's initial positive sequence: with autocorrelations `ρ_t`
//! (biased estimator, computed by FFT) and pair sums `Γ_m = ρ_{2m} + ρ_{2m+1}`,
//! the sum stops at the first non-positive `Γ_m` and
//! `ESS = N / (−1 + 2 Σ Γ_m)`, capped at `N`.
//!
//! The radial test draws a ray from an interior `x0` through each sample and
//! measures `u = |x − x0| / |x* − x0|` where `x*` is the boundary point on the
//! ray. For uniform samples `u^{d_eff}` is exactly Uniform[0, 1] in any convex
//! body, so its ECDF is compared to the identity with a Kolmogorov-Smirnov test.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConstrainedPolytope, FullDimPolytope};
use crate::walks::{Chain, ChainOutput, Target, WalkConfig};

pub const MIN_ESS_SAMPLES: usize = 10;

/// Relative slack allowed when deciding that a sample lies outside.
const OUTSIDE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub per_coordinate: Vec<f64>,
    /// Coordinates with zero variance; their ESS is reported as `N`.
    pub degenerate: Vec<usize>,
}

impl Ess {
    pub fn min(&self) -> f64 {
        self.per_coordinate.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Biased autocorrelation `ρ_0 … ρ_{n−1}` of a series; `None` when constant.
pub fn autocorrelation(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    if x.iter().all(|v| *v == x[0]) {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) {
        return None;
    }
    Some(buf[..n].iter().map(|c| c.re / c0).collect())
}

fn ess_series(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let rho = autocorrelation(x)?;
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho[2 * m] + rho[2 * m + 1];
        if !(gamma > 0.0) {
            break;
        }
        tau += 2.0 * gamma;
        m += 1;
    }
    let nf = n as f64;
    Some((nf / tau.max(1e-300)).min(nf))
}

/// Per-coordinate ESS of samples stored one per row.
pub fn ess(samples: &DMatrix<f64>) -> Result<Ess> {
    let n = samples.nrows();
    if n < MIN_ESS_SAMPLES {
        return Err(Error::invalid(format!(
            "ESS needs at least {MIN_ESS_SAMPLES} samples, got {n}"
        )));
    }
    let mut per_coordinate = Vec::with_capacity(samples.ncols());
    let mut degenerate = Vec::new();
    for (j, col) in samples.column_iter().enumerate() {
        let x: Vec<f64> = col.iter().copied().collect();
        match ess_series(&x) {
            Some(e) => per_coordinate.push(e),
            None => {
                degenerate.push(j);
                per_coordinate.push(n as f64);
            }
        }
    }
    Ok(Ess {
        per_coordinate,
        degenerate,
    })
}

/// Ray ratio in the constrained form: `u = max_i (x0_i − x_i) / x0_i` over
/// trailing coordinates, zero when the ray never leaves.
pub fn ray_ratio_constrained(p: &ConstrainedPolytope, x0: &[f64], x: &[f64]) -> f64 {
    let lead = p.lead();
    x0[lead..]
        .iter()
        .zip(&x[lead..])
        .map(|(a, b)| (a - b) / a)
        .fold(0.0, f64::max)
}

/// Ray ratio in the full-dimensional form: `u = max_i ãᵢᵀ(v − v0) / s_i(v0)`.
pub fn ray_ratio_full(p: &FullDimPolytope, s0: &DVector<f64>, v0: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let step = p.a() * (v - v0);
    step.iter().zip(s0.iter()).map(|(a, s)| a / s).fold(0.0, f64::max)
}

/// Ray ratios of each sample (rows, native coordinates) seen from `x0`.
pub fn ray_ratios(target: &Target, samples: &DMatrix<f64>, x0: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.nrows());
    match target {
        Target::Sparse(body) => {
            let p = body.polytope();
            body.interior_tail(x0)?;
            for (i, row) in samples.row_iter().enumerate() {
                let x: Vec<f64> = row.iter().copied().collect();
                if !p.membership(&x, false) {
                    return Err(outside(i));
                }
                out.push(check_ratio(ray_ratio_constrained(p, x0, &x), i)?);
            }
        }
        Target::Dense(f) => {
            let v0 = DVector::from_column_slice(x0);
            let s0 = f.slack(&v0)?;
            for (i, row) in samples.row_iter().enumerate() {
                let v = row.transpose();
                out.push(check_ratio(ray_ratio_full(f, &s0, &v0, &v), i)?);
            }
        }
    }
    Ok(out)
}

fn outside(i: usize) -> Error {
    Error::invalid(format!("sample {i} lies outside the polytope"))
}

fn check_ratio(u: f64, i: usize) -> Result<f64> {
    if u > 1.0 + OUTSIDE_TOL || !u.is_finite() {
        Err(outside(i))
    } else {
        Ok(u.min(1.0))
    }
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform[0, 1].
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        d.max((i + 1) as f64 / n - x).max(x - i as f64 / n)
    })
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples, with Stephens'
/// finite-sample correction `λ = (√n + 0.12 + 0.11/√n) d`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_q(lambda)
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² λ²)`, via the theta-function
/// form for small `λ`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut sum = 0.0;
        let mut j = 1;
        loop {
            let term = y.powi(j * j);
            sum += term;
            if term < 1e-17 * sum || j > 100 {
                break;
            }
            j += 2;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTest {
    pub statistic: f64,
    pub pvalue: f64,
    /// `u^{d_eff}` per sample, in sample order.
    pub transformed: Vec<f64>,
}

/// KS test of `u^{d_eff}` against Uniform[0, 1].
pub fn radial_uniformity(target: &Target, samples: &DMatrix<f64>, x0: &[f64]) -> Result<RadialTest> {
    if samples.nrows() == 0 {
        return Err(Error::invalid("radial test needs at least one sample"));
    }
    let d = target.d_eff() as i32;
    let transformed: Vec<f64> = ray_ratios(target, samples, x0)?
        .into_iter()
        .map(|u| u.powi(d))
        .collect();
    let statistic = ks_uniform_statistic(&transformed);
    Ok(RadialTest {
        statistic,
        pvalue: ks_pvalue(statistic, transformed.len()),
        transformed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_samples: usize,
    pub ess_per_coordinate: Vec<f64>,
    pub ess_min: f64,
    pub degenerate_coordinates: Vec<usize>,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub acceptance_rate: f64,
}

pub fn summarize(chain: &ChainOutput, target: &Target, x0: &[f64]) -> Result<DiagnosticsReport> {
    if chain.samples.nrows() == 0 {
        return Err(Error::invalid("cannot summarize an empty chain"));
    }
    let e = ess(&chain.samples)?;
    let radial = radial_uniformity(target, &chain.samples, x0)?;
    Ok(DiagnosticsReport {
        n_samples: chain.samples.nrows(),
        ess_min: e.min(),
        ess_per_coordinate: e.per_coordinate,
        degenerate_coordinates: e.degenerate,
        ks_statistic: radial.statistic,
        ks_pvalue: radial.pvalue,
        acceptance_rate: chain.acceptance_rate(),
    })
}

/// Transitions of the pilot run that estimates the autocorrelation time.
pub const PILOT_STEPS: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct EssRun {
    /// Thinned samples whose minimum ESS reached the target (or the budget).
    pub output: ChainOutput,
    pub ess_min: f64,
    pub thin: usize,
    /// Transitions spent including the pilot.
    pub total_steps: usize,
    pub reached: bool,
}

/// Runs a chain until its thinned samples reach `target_ess` in every
/// coordinate. A pilot of [`PILOT_STEPS`] transitions estimates the
/// integrated autocorrelation time `τ`; the chain is then thinned by
/// `⌈2τ⌉` so that kept samples are close to independent, and extended in
/// chunks until the target is met or `max_steps` transitions are spent.
pub fn run_to_ess(
    target: &Target,
    start: &[f64],
    config: &WalkConfig,
    target_ess: usize,
    max_steps: usize,
) -> Result<EssRun> {
    if target_ess == 0 {
        return Err(Error::invalid("target ESS must be positive"));
    }
    let mut chain = Chain::new(target, start, config)?;
    chain.burn_in(config.burn_in)?;
    let pilot = chain.run(PILOT_STEPS, 1)?;
    let pilot_ess = ess(&pilot.samples)?.min();
    let tau = PILOT_STEPS as f64 / pilot_ess;
    let thin = ((2.0 * tau).ceil() as usize).max(1);
    let mut total = config.burn_in + PILOT_STEPS;
    let mut output: Option<ChainOutput> = None;
    let mut chunk = target_ess;
    loop {
        let room = max_steps.saturating_sub(total) / thin;
        let take = chunk.min(room);
        if take > 0 {
            let more = chain.run(take, thin)?;
            total += take * thin;
            output = Some(match output {
                None => more,
                Some(prev) => concat(prev, more),
            });
        }
        let out = output.as_ref().ok_or_else(|| {
            Error::invalid(format!("budget of {max_steps} steps is below the pilot run"))
        })?;
        let e = if out.samples.nrows() >= MIN_ESS_SAMPLES {
            ess(&out.samples)?.min()
        } else {
            0.0
        };
        if e >= target_ess as f64 || take < chunk || take == 0 {
            return Ok(EssRun {
                reached: e >= target_ess as f64,
                output: output.expect("checked above"),
                ess_min: e,
                thin,
                total_steps: total,
            });
        }
        chunk = ((target_ess as f64 - e).max(1.0) * out.samples.nrows() as f64 / e.max(1.0))
            .ceil()
            .max(MIN_ESS_SAMPLES as f64) as usize;
    }
}

fn concat(a: ChainOutput, b: ChainOutput) -> ChainOutput {
    let mut samples = DMatrix::zeros(a.samples.nrows() + b.samples.nrows(), a.samples.ncols());
    samples.rows_mut(0, a.samples.nrows()).copy_from(&a.samples);
    samples.rows_mut(a.samples.nrows(), b.samples.nrows()).copy_from(&b.samples);
    let count = a.per_step_seconds.count + b.per_step_seconds.count;
    let total = a.per_step_seconds.total + b.per_step_seconds.total;
    let timing = crate::walks::StepTiming {
        count,
        total,
        mean: if count > 0 { total / count as f64 } else { 0.0 },
        min: a.per_step_seconds.min.min(b.per_step_seconds.min),
        max: a.per_step_seconds.max.max(b.per_step_seconds.max),
    };
    ChainOutput {
        samples,
        accepted: a.accepted + b.accepted,
        proposed: a.proposed + b.proposed,
        infeasible_rejects: a.infeasible_rejects + b.infeasible_rejects,
        per_step_seconds: timing,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingCost {
    pub steps: usize,
    pub thin: usize,
    pub ess_min: f64,
    /// Transitions per effective sample, `steps / ess_min`.
    pub steps_per_ess: f64,
}

/// Mixing cost of one long chain: `steps` transitions kept every `thin`-th,
/// divided by the minimum ESS of the kept samples.
pub fn mixing_cost(target: &Target, start: &[f64], config: &WalkConfig, steps: usize, thin: usize) -> Result<MixingCost> {
    let mut chain = Chain::new(target, start, config)?;
    chain.burn_in(config.burn_in)?;
    let out = chain.run(steps / thin, thin)?;
    let ess_min = ess(&out.samples)?.min();
    let steps = out.proposed;
    Ok(MixingCost {
        steps,
        thin,
        ess_min,
        steps_per_ess: steps as f64 / ess_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_hypercube, make_simplex};
    use crate::rng::ChainRng;
    use crate::walks::{Form, WalkKind};

    fn column(x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(x.len(), 1, x)
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let mut rng = ChainRng::new(1, 0);
        let x: Vec<f64> = (0..50).map(|_| rng.gaussian()).collect();
        let rho = autocorrelation(&x).unwrap();
        let mean = x.iter().sum::<f64>() / 50.0;
        let c = |t: usize| (0..50 - t).map(|i| (x[i] - mean) * (x[i + t] - mean)).sum::<f64>();
        for t in 0..50 {
            assert!((rho[t] - c(t) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn iid_ess_is_close_to_n() {
        let mut rng = ChainRng::new(2, 0);
        let n = 10_000;
        let m = DMatrix::from_fn(n, 3, |_, _| rng.gaussian());
        for e in ess(&m).unwrap().per_coordinate {
            assert!(e >= 0.9 * n as f64 && e <= 1.1 * n as f64, "{e}");
        }
    }

    #[test]
    fn duplicated_pairs_halve_ess() {
        let mut rng = ChainRng::new(3, 0);
        let x: Vec<f64> = (0..5000).flat_map(|_| {
            let g = rng.gaussian();
            [g, g]
        }).collect();
        let e = ess(&column(&x)).unwrap().min();
        assert!((e / 5000.0 - 1.0).abs() < 0.15, "{e}");
    }

    #[test]
    fn ess_edge_cases() {
        assert!(ess(&column(&[1.0])).is_err());
        let e = ess(&DMatrix::from_fn(20, 2, |i, j| if j == 0 { 4.0 } else { i as f64 })).unwrap();
        assert_eq!(e.degenerate, vec![0]);
        assert_eq!(e.per_coordinate[0], 20.0);
        assert!(e.min() > 0.0);
    }

    #[test]
    fn ess_is_scale_free() {
        let mut rng = ChainRng::new(4, 0);
        let mut x = vec![0.0; 3000];
        for i in 1..3000 {
            x[i] = 0.8 * x[i - 1] + rng.gaussian();
        }
        let y: Vec<f64> = x.iter().map(|v| 7.0 - 3.5 * v).collect();
        let a = ess(&column(&x)).unwrap().min();
        let b = ess(&column(&y)).unwrap().min();
        assert!((a - b).abs() < 1e-8 * a);
    }

    #[test]
    fn ks_statistic_matches_brute_force() {
        let mut rng = ChainRng::new(5, 0);
        for n in [1usize, 7, 100, 1000] {
            let v: Vec<f64> = (0..n).map(|_| rng.uniform().powf(1.3)).collect();
            // sup over x of |F_n(x) − x| by checking both sides of every jump
            let mut brute: f64 = 0.0;
            for &x in &v {
                let below = v.iter().filter(|&&y| y < x).count() as f64 / n as f64;
                let at = v.iter().filter(|&&y| y <= x).count() as f64 / n as f64;
                brute = brute.max((at - x).abs()).max((below - x).abs());
            }
            assert!((ks_uniform_statistic(&v) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for l in [1.0, 1.1, 1.17, 1.19, 1.3] {
            let y = (-std::f64::consts::PI.powi(2) / (8.0 * l * l)).exp();
            let theta = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / l * (1..60).step_by(2).map(|j| y.powi(j * j)).sum::<f64>();
            let alt = 2.0 * (1..60).map(|j| {
                let t = (-2.0 * (j * j) as f64 * l * l).exp();
                if j % 2 == 1 { t } else { -t }
            }).sum::<f64>();
            assert!((theta - alt).abs() < 1e-12);
            assert!((kolmogorov_q(l) - alt).abs() < 1e-12);
        }
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(3.0) < 1e-6);
    }

    #[test]
    fn ray_ratio_forms_agree() {
        let p = make_hypercube(2).unwrap();
        let sparse = Target::new(&p, Form::SparseK2).unwrap();
        let dense = Target::new(&p, Form::DenseK1).unwrap();
        let x0 = [0.1, -0.2, 0.9, 1.2, 1.1, 0.8];
        let xs = DMatrix::from_row_slice(2, 6, &[0.5, 0.5, 0.5, 0.5, 1.5, 1.5, -0.9, 0.3, 1.9, 0.7, 0.1, 1.3]);
        let a = ray_ratios(&sparse, &xs, &x0).unwrap();
        let vs = DMatrix::from_fn(2, 2, |i, j| {
            let row: Vec<f64> = xs.row(i).iter().copied().collect();
            dense.from_constrained(&row).unwrap()[j]
        });
        let b = ray_ratios(&dense, &vs, &dense.from_constrained(&x0).unwrap()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn interval_rejection_samples_pass() {
        let p = make_simplex(2).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = ChainRng::new(seed, 0);
            let xs = DMatrix::from_fn(2000, 2, |_, _| 0.0);
            let mut xs = xs;
            for i in 0..2000 {
                let u = rng.uniform();
                xs[(i, 0)] = u;
                xs[(i, 1)] = 1.0 - u;
            }
            let r = radial_uniformity(&t, &xs, &[0.5, 0.5]).unwrap();
            if r.pvalue > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 99, "{passes}");
    }

    #[test]
    fn samples_at_center_fail() {
        let p = make_simplex(3).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let xs = DMatrix::from_element(50, 3, 1.0 / 3.0);
        let r = radial_uniformity(&t, &xs, &[1.0 / 3.0; 3]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!(r.pvalue < 1e-10);
    }

    #[test]
    fn outside_sample_is_named() {
        let p = make_simplex(3).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let xs = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 1.2, -0.1, -0.1]);
        let err = ray_ratios(&t, &xs, &[1.0 / 3.0; 3]).unwrap_err();
        assert!(err.to_string().contains("sample 1"));
    }

    #[test]
    fn sticky_ball_walk_is_rejected() {
        let tri = FullDimPolytope::new(
            DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        )
        .unwrap();
        let t = Target::from_full(tri).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::Ball, Form::DenseK1);
        cfg.r = 1e-3;
        cfg.steps = 500;
        let x0 = [0.3, 0.3];
        let out = crate::walks::run_chain(&t, &x0, &cfg).unwrap();
        let r = radial_uniformity(&t, &out.samples, &x0).unwrap();
        assert!(r.pvalue < 0.01);
    }

    #[test]
    fn summary_composes() {
        let p = make_simplex(3).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::Dikin, Form::SparseK2);
        cfg.steps = 300;
        let x0 = [1.0 / 3.0; 3];
        let out = crate::walks::run_chain(&t, &x0, &cfg).unwrap();
        let rep = summarize(&out, &t, &x0).unwrap();
        assert_eq!(rep.acceptance_rate, out.accepted as f64 / out.proposed as f64);
        assert_eq!(rep.ess_min, ess(&out.samples).unwrap().min());
        let r = radial_uniformity(&t, &out.samples, &x0).unwrap();
        assert_eq!((rep.ks_statistic, rep.ks_pvalue), (r.statistic, r.pvalue));
        assert!(rep.ess_min > 0.0 && rep.ess_min <= 300.0);
        cfg.steps = 0;
        let empty = crate::walks::run_chain(&t, &x0, &cfg).unwrap();
        assert!(summarize(&empty, &t, &x0).is_err());
    }

    #[test]
    fn run_to_ess_reaches_small_target() {
        let p = make_simplex(4).unwrap();
        let t = Target::new(&p, Form::SparseK2).unwrap();
        let cfg = WalkConfig::new(WalkKind::Dikin, Form::SparseK2);
        let run = run_to_ess(&t, &[0.25; 4], &cfg, 50, 1_000_000).unwrap();
        assert!(run.reached && run.ess_min >= 50.0);
        assert_eq!(run.total_steps, PILOT_STEPS + run.output.proposed);
    }
}
