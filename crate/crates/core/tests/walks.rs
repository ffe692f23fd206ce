mod common;

use common::random_fixture;
use nalgebra::{DMatrix, DVector};
use polysample::diagnostics::{ess, ray_ratios, run_to_ess};
use polysample::rng::ChainRng;
use polysample::{make_hypercube, make_simplex, run_chain, Form, FullDimPolytope, Generator, Target, WalkConfig, WalkKind};
use proptest::prelude::*;

/// Bin frequencies of `x` on [−1, 1] with standard errors from 50 batch means.
fn histogram(x: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let batches = 50;
    let per = x.len() / batches;
    let mut freq = vec![vec![0.0; bins]; batches];
    for (b, chunk) in x.chunks(per).take(batches).enumerate() {
        for &v in chunk {
            let i = (((v + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
            freq[b][i] += 1.0 / per as f64;
        }
    }
    let mean: Vec<f64> = (0..bins).map(|i| freq.iter().map(|f| f[i]).sum::<f64>() / batches as f64).collect();
    let se = (0..bins)
        .map(|i| {
            let var = freq.iter().map(|f| (f[i] - mean[i]).powi(2)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        })
        .collect();
    (mean, se)
}

fn interval_histogram_is_flat(target: &Target, start: &[f64], column: usize) {
    let mut cfg = WalkConfig::new(WalkKind::Dikin, target.form());
    cfg.steps = 1_000_000;
    cfg.seed = 3;
    let out = run_chain(target, start, &cfg).unwrap();
    let x: Vec<f64> = out.samples.column(column).iter().copied().collect();
    let (freq, se) = histogram(&x, 20);
    for (i, (f, s)) in freq.iter().zip(&se).enumerate() {
        assert!((f - 0.05).abs() < 3.0 * s, "bin {i}: {f} ± {s}");
    }
}

#[test]
fn dikin_on_an_interval_is_uniform_dense() {
    let p = FullDimPolytope::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![1.0, 1.0])).unwrap();
    let target = Target::from_full(p).unwrap();
    interval_histogram_is_flat(&target, &[0.3], 0);
}

#[test]
fn dikin_on_an_interval_is_uniform_sparse() {
    let target = Target::new(&make_hypercube(1).unwrap(), Form::SparseK2).unwrap();
    interval_histogram_is_flat(&target, &[0.3, 0.7, 1.3], 0);
}

#[test]
fn dense_and_sparse_marginals_agree_on_the_simplex() {
    let p = make_simplex(4).unwrap();
    let center = Generator::Simplex(4).center();
    let mut means = Vec::new();
    for form in [Form::DenseK1, Form::SparseK2] {
        let target = Target::new(&p, form).unwrap();
        let start = target.from_constrained(&center).unwrap();
        let mut cfg = WalkConfig::new(WalkKind::Dikin, form);
        cfg.seed = 11;
        let run = run_to_ess(&target, &start, &cfg, 2000, 5_000_000).unwrap();
        assert!(run.reached);
        let x = target.to_constrained(&run.output.samples).unwrap();
        let n = x.nrows() as f64;
        let m: Vec<f64> = (0..4).map(|j| x.column(j).sum() / n).collect();
        // Dirichlet(1,1,1,1): mean 1/4, variance 3/80
        let var: Vec<f64> = (0..4).map(|j| x.column(j).iter().map(|v| (v - m[j]).powi(2)).sum::<f64>() / n).collect();
        for j in 0..4 {
            assert!((var[j] - 3.0 / 80.0).abs() < 0.15 * 3.0 / 80.0, "{form:?} var {}", var[j]);
        }
        means.push((m, run.ess_min));
    }
    let (a, ea) = &means[0];
    let (b, eb) = &means[1];
    let se = (3.0f64 / 80.0 * (1.0 / ea + 1.0 / eb)).sqrt();
    for j in 0..4 {
        assert!((a[j] - b[j]).abs() < 4.0 * se, "coordinate {j}: {} vs {}", a[j], b[j]);
    }
}

#[test]
fn ray_ratios_do_not_depend_on_the_form() {
    let p = make_hypercube(3).unwrap();
    let center = Generator::Hypercube(3).center();
    let sparse = Target::new(&p, Form::SparseK2).unwrap();
    let mut cfg = WalkConfig::new(WalkKind::HitAndRun, Form::SparseK2);
    cfg.steps = 200;
    let out = run_chain(&sparse, &center, &cfg).unwrap();
    let u_sparse = ray_ratios(&sparse, &out.samples, &center).unwrap();

    let dense = Target::new(&p, Form::DenseK1).unwrap();
    let mut v = DMatrix::zeros(out.samples.nrows(), dense.native_dim());
    for (i, row) in out.samples.row_iter().enumerate() {
        let x: Vec<f64> = row.iter().copied().collect();
        v.row_mut(i).copy_from_slice(&dense.from_constrained(&x).unwrap());
    }
    let v0 = dense.from_constrained(&center).unwrap();
    let u_dense = ray_ratios(&dense, &v, &v0).unwrap();
    for (a, b) in u_sparse.iter().zip(&u_dense) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

fn walk_kind() -> impl Strategy<Value = WalkKind> {
    prop::sample::select(vec![
        WalkKind::Ball,
        WalkKind::HitAndRun,
        WalkKind::Dikin,
        WalkKind::Vaidya,
        WalkKind::John,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kept_samples_are_members_and_reproducible(
        seed in any::<u64>(),
        d in 4usize..12,
        kind in walk_kind(),
        sparse in any::<bool>(),
    ) {
        let mut rng = ChainRng::new(seed, 0);
        let n = 1 + (rng.next_u64() as usize) % 3;
        let fx = random_fixture(&mut rng, d, n, 0, 0.7);
        let form = if sparse { Form::SparseK2 } else { Form::DenseK1 };
        // random fixtures need not be bounded; the dense form refuses those
        let Ok(target) = Target::new(&fx.polytope, form) else { return Ok(()) };
        let start = target.from_constrained(&fx.x0).unwrap();
        let mut cfg = WalkConfig::new(kind, form);
        cfg.seed = seed;
        cfg.steps = 60;
        let a = run_chain(&target, &start, &cfg);
        let b = run_chain(&target, &start, &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.samples, &b.samples);
                for row in a.samples.row_iter() {
                    let x: Vec<f64> = row.iter().copied().collect();
                    prop_assert!(target.contains(&x, 1e-9));
                }
            }
            // hit-and-run on an unbounded fixture has nowhere to stop
            (Err(polysample::Error::UnboundedPolytope(_)), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} / {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn ess_is_invariant_to_affine_rescaling(seed in any::<u64>(), scale in 1e-3f64..1e3, shift in -1e3f64..1e3) {
        let mut rng = ChainRng::new(seed, 0);
        let mut x = vec![0.0; 300];
        for t in 1..300 {
            x[t] = 0.7 * x[t - 1] + rng.gaussian();
        }
        let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let ex = ess(&DMatrix::from_column_slice(300, 1, &x)).unwrap().min();
        let ey = ess(&DMatrix::from_column_slice(300, 1, &y)).unwrap().min();
        prop_assert!((ex - ey).abs() < 1e-6 * ex);
    }
}
