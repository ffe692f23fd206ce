use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use polysample::diagnostics::{radial_uniformity, run_to_ess, summarize, ess, MIN_ESS_SAMPLES};
use polysample::io::{load_samples_csv, save_json, save_polytope, save_samples_csv, PolytopeFile};
use polysample::preprocess::{facial_reduction, initialize, initialize_full};
use polysample::{Chain, Error, Result, WalkConfig};

use crate::input::{load, prepare, Loaded, Source};

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    inputs: Vec<Value>,
    config: Option<&'a WalkConfig>,
    out_dir: String,
    seed: Option<u64>,
    version: &'static str,
}

fn write_manifest(
    subcommand: &str,
    sources: &[Source],
    config: Option<&WalkConfig>,
    out: &Path,
) -> Result<()> {
    let inputs = sources
        .iter()
        .map(|s| match s {
            Source::Generator(g) => json!({ "generator": g.to_string() }),
            Source::File(p) => json!({ "path": p.display().to_string() }),
        })
        .collect();
    let m = Manifest {
        subcommand,
        inputs,
        config,
        out_dir: out.display().to_string(),
        seed: config.map(|c| c.seed),
        version: env!("CARGO_PKG_VERSION"),
    };
    save_json(&m, &out.join("manifest.json"))
}

pub fn preprocess(input: &str, out: &Path) -> Result<()> {
    let source = Source::parse(input)?;
    write_manifest("preprocess", std::slice::from_ref(&source), None, out)?;
    let report = match load(&source)? {
        Loaded::Constrained { polytope, .. } => {
            let fr = facial_reduction(&polytope)?;
            let init = initialize(&fr.reduced)?;
            save_polytope(
                &PolytopeFile::Constrained(fr.reduced.clone()),
                &out.join("reduced.poly"),
            )?;
            let fixed: Vec<Value> = fr
                .fixed_variables
                .iter()
                .map(|f| json!({ "index": f.index, "round": f.round, "rows": f.rows, "y": f.y }))
                .collect();
            json!({
                "input": source.describe(),
                "form": "K2",
                "original": { "d": polytope.d(), "n": polytope.n(), "k": polytope.k() },
                "reduced": { "d": fr.reduced.d(), "n": fr.reduced.n(), "k": fr.reduced.k(), "nnz": fr.reduced.a().nnz() },
                "rounds": fr.rounds,
                "kept_columns": fr.columns,
                "kept_rows": fr.rows,
                "fixed_variables": fixed,
                "delta": init.delta,
                "strictly_feasible": init.strictly_feasible(),
                "unbounded": init.unbounded,
                "x0": init.x0,
                "x0_original": fr.lift(&init.x0)?,
            })
        }
        Loaded::Full(f) => {
            let init = initialize_full(&f)?;
            save_polytope(&PolytopeFile::Full(f.clone()), &out.join("reduced.poly"))?;
            json!({
                "input": source.describe(),
                "form": "K1",
                "dim": f.dim(),
                "constraints": f.n_constraints(),
                "rounds": 0,
                "delta": init.delta,
                "strictly_feasible": init.strictly_feasible(),
                "unbounded": init.unbounded,
                "x0": init.x0,
            })
        }
    };
    save_json(&report, &out.join("preprocess.json"))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report["strictly_feasible"] == json!(false) {
        return Err(Error::DegeneratePolytope(
            "no strictly interior point after preprocessing".into(),
        ));
    }
    Ok(())
}

pub fn sample(input: &str, cfg: &WalkConfig, out: &Path) -> Result<()> {
    let source = Source::parse(input)?;
    write_manifest("sample", std::slice::from_ref(&source), Some(cfg), out)?;
    let prepared = prepare(load(&source)?)?;
    let target = prepared.target(cfg.form)?;
    let start = prepared.start(&target)?;
    let chain = polysample::run_chain(&target, &start, cfg)?;
    save_samples_csv(&prepared.export(&target, &chain.samples)?, &out.join("samples.csv"))?;
    let diagnostics = if chain.samples.nrows() >= MIN_ESS_SAMPLES {
        Some(summarize(&chain, &target, &start)?)
    } else {
        None
    };
    let report = json!({
        "input": source.describe(),
        "walk": cfg.kind,
        "form": cfg.form,
        "d": prepared.dim(),
        "d_eff": prepared.d_eff(),
        "start_margin": prepared.margin(),
        "r": cfg.r,
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "thin": cfg.thin,
        "burn_in": cfg.burn_in,
        "accepted": chain.accepted,
        "proposed": chain.proposed,
        "infeasible_rejects": chain.infeasible_rejects,
        "acceptance_rate": chain.acceptance_rate(),
        "per_step_seconds": chain.per_step_seconds,
        "diagnostics": diagnostics,
    });
    save_json(&report, &out.join("report.json"))?;
    println!(
        "{}: {} samples, acceptance {:.3}",
        source.describe(),
        chain.samples.nrows(),
        chain.acceptance_rate()
    );
    Ok(())
}

pub struct BenchOptions {
    pub mixing: bool,
    pub trials: usize,
    pub steps: usize,
    pub target_ess: usize,
    pub mixing_thin: usize,
    pub max_steps: usize,
    pub time_limit: Duration,
}

#[derive(Serialize)]
struct BenchRow {
    input: String,
    d: usize,
    d_eff: usize,
    walk: String,
    form: String,
    mode: &'static str,
    trials: usize,
    steps: usize,
    mean_step_seconds: Option<f64>,
    min_step_seconds: Option<f64>,
    max_step_seconds: Option<f64>,
    ess_min: Option<f64>,
    steps_per_ess: Option<f64>,
    status: &'static str,
}

/// Steps run between deadline checks.
const CHUNK: usize = 50;

pub fn bench(inputs: &[String], cfg: &WalkConfig, opts: &BenchOptions, out: &Path) -> Result<()> {
    let sources: Vec<Source> = inputs.iter().map(|s| Source::parse(s)).collect::<Result<_>>()?;
    write_manifest("bench", &sources, Some(cfg), out)?;
    let deadline = Instant::now() + opts.time_limit;
    let mut writer = csv::Writer::from_path(out.join("bench.csv")).map_err(csv_error)?;
    for source in &sources {
        let mut row = BenchRow {
            input: source.describe(),
            d: 0,
            d_eff: 0,
            walk: cfg.kind.to_string(),
            form: cfg.form.to_string(),
            mode: if opts.mixing { "mixing" } else { "per_iteration" },
            trials: 0,
            steps: 0,
            mean_step_seconds: None,
            min_step_seconds: None,
            max_step_seconds: None,
            ess_min: None,
            steps_per_ess: None,
            status: "ok",
        };
        if Instant::now() >= deadline {
            row.status = "timeout";
            writer.serialize(&row).map_err(csv_error)?;
            writer.flush()?;
            break;
        }
        let prepared = prepare(load(source)?)?;
        row.d = prepared.dim();
        row.d_eff = prepared.d_eff();
        let target = prepared.target(cfg.form)?;
        let start = prepared.start(&target)?;
        if opts.mixing {
            mixing_row(&target, &start, cfg, opts, deadline, &mut row)?;
        } else {
            timing_row(&target, &start, cfg, opts, deadline, &mut row)?;
        }
        println!(
            "{} d={} {}: {}",
            row.input,
            row.d,
            row.status,
            match (row.mean_step_seconds, row.steps_per_ess) {
                (_, Some(s)) => format!("{s:.1} steps per ESS"),
                (Some(t), None) => format!("{t:.3e} s per step"),
                _ => "no data".into(),
            }
        );
        let stop = row.status == "timeout";
        writer.serialize(&row).map_err(csv_error)?;
        writer.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

fn timing_row(
    target: &polysample::Target,
    start: &[f64],
    cfg: &WalkConfig,
    opts: &BenchOptions,
    deadline: Instant,
    row: &mut BenchRow,
) -> Result<()> {
    let (mut total, mut count, mut min, mut max) = (0.0, 0usize, f64::INFINITY, 0.0f64);
    'trials: for trial in 0..opts.trials {
        let mut c = cfg.clone();
        c.stream = trial as u64;
        let mut chain = Chain::new(target, start, &c)?;
        chain.burn_in(c.burn_in)?;
        let mut done = 0;
        while done < opts.steps {
            if Instant::now() >= deadline {
                row.status = "timeout";
                break 'trials;
            }
            let n = CHUNK.min(opts.steps - done);
            let t = chain.run(n, 1)?.per_step_seconds;
            total += t.total;
            count += t.count;
            min = min.min(t.min);
            max = max.max(t.max);
            done += n;
        }
        row.trials += 1;
    }
    row.steps = count;
    if count > 0 {
        row.mean_step_seconds = Some(total / count as f64);
        row.min_step_seconds = Some(min);
        row.max_step_seconds = Some(max);
    }
    Ok(())
}

fn mixing_row(
    target: &polysample::Target,
    start: &[f64],
    cfg: &WalkConfig,
    opts: &BenchOptions,
    deadline: Instant,
    row: &mut BenchRow,
) -> Result<()> {
    let mut chain = Chain::new(target, start, cfg)?;
    chain.burn_in(cfg.burn_in)?;
    row.trials = 1;
    let thin = opts.mixing_thin;
    let mut kept: Vec<f64> = Vec::new();
    let dim = chain.current().len();
    let mut rows = 0usize;
    let mut want = opts.target_ess.max(MIN_ESS_SAMPLES);
    let (mut total, mut count) = (0.0, 0usize);
    loop {
        while rows < want {
            if Instant::now() >= deadline {
                row.status = "timeout";
                break;
            }
            if count + thin > opts.max_steps {
                row.status = "budget";
                break;
            }
            let n = (CHUNK / thin).max(1).min(want - rows);
            let o = chain.run(n, thin)?;
            total += o.per_step_seconds.total;
            count += o.per_step_seconds.count;
            for r in o.samples.row_iter() {
                kept.extend(r.iter());
            }
            rows += n;
        }
        if rows >= MIN_ESS_SAMPLES {
            let m = DMatrix::from_row_slice(rows, dim, &kept);
            let e = ess(&m)?.min();
            row.ess_min = Some(e);
            row.steps_per_ess = Some(count as f64 / e);
            if e >= opts.target_ess as f64 {
                break;
            }
            if row.status != "ok" {
                break;
            }
            let ratio = (opts.target_ess as f64 / e.max(1.0)).min(4.0);
            want = ((rows as f64) * ratio * 1.1).ceil() as usize + 1;
        } else if row.status != "ok" {
            break;
        }
    }
    row.steps = count;
    if count > 0 {
        row.mean_step_seconds = Some(total / count as f64);
    }
    Ok(())
}

pub fn uniformity(
    input: &str,
    cfg: &WalkConfig,
    target_ess: usize,
    max_steps: usize,
    samples_file: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let source = Source::parse(input)?;
    write_manifest("uniformity", std::slice::from_ref(&source), Some(cfg), out)?;
    let prepared = prepare(load(&source)?)?;
    let target = prepared.target(cfg.form)?;
    let start = prepared.start(&target)?;
    let (samples, extra) = match samples_file {
        Some(path) => {
            let raw = load_samples_csv(path)?;
            (prepared.import(&target, &raw)?, json!({ "samples_file": path.display().to_string() }))
        }
        None => {
            let run = run_to_ess(&target, &start, cfg, target_ess, max_steps)?;
            let info = json!({
                "ess_min": run.ess_min,
                "thin": run.thin,
                "total_steps": run.total_steps,
                "reached_target": run.reached,
                "acceptance_rate": run.output.acceptance_rate(),
            });
            (run.output.samples, info)
        }
    };
    let test = radial_uniformity(&target, &samples, &start)?;
    let mut report = json!({
        "input": source.describe(),
        "walk": cfg.kind,
        "form": cfg.form,
        "d_eff": prepared.d_eff(),
        "n_samples": samples.nrows(),
        "target_ess": target_ess,
        "ks_statistic": test.statistic,
        "ks_pvalue": test.pvalue,
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut report, extra) {
        r.extend(e);
    }
    save_json(&report, &out.join("uniformity.json"))?;
    let mut sorted = test.transformed.clone();
    sorted.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_path(out.join("ecdf.csv")).map_err(csv_error)?;
    w.write_record(["value", "ecdf"]).map_err(csv_error)?;
    let n = sorted.len() as f64;
    for (i, v) in sorted.iter().enumerate() {
        w.write_record([format!("{v:.16e}"), format!("{:.16e}", (i + 1) as f64 / n)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    println!(
        "{}: KS statistic {:.4}, p-value {:.4} over {} samples",
        source.describe(),
        test.statistic,
        test.pvalue,
        samples.nrows()
    );
    Ok(())
}
