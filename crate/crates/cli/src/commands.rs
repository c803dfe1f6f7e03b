use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use tcl_core::oracle::{
    exact_dynamical_map, exact_multipoint_correlation, exact_two_point, factorized_multipoint,
    map_two_point, recurrence_window, successive_ratios, FullModel,
};
use tcl_core::resummation::{
    resum, DerivativeStencil, Resummation, ResummationOptions, DEFAULT_SVD_CUTOFF,
};
use tcl_core::tcl::{
    compute_moments, dynamical_map_from_generator, enumerate_compositions,
    generator_via_compositions, generator_via_recursion, propagate, step_halving_error,
    GeneratorSeries, MomentSeries, TimeGrid,
};
use tcl_core::{
    CMatrix, InteractionFrame, Operator, Picture, SuperOperator, SystemModel, SystemState, C64,
};

use crate::config::{BathSpec, RunConfig};
use crate::output::{json_bytes, write_atomic, Csv};

/// Failure classes, mapped to process exit codes by `main`.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: configuration, arguments, model setup. Exit code 1.
    Validation(String),
    /// An engine error or a numerical criterion outside its window. Exit code 2.
    Numerical(String),
    /// Output could not be written. Exit code 1.
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) | Failure::Io(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn setup<T>(r: tcl_core::Result<T>, what: &str) -> Outcome<T> {
    r.map_err(|e| Failure::Validation(format!("{what}: {e}")))
}

fn numeric<T>(r: tcl_core::Result<T>, what: &str) -> Outcome<T> {
    r.map_err(|e| Failure::Numerical(format!("{what}: {e}")))
}

pub struct Context {
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Context {
    fn write(&self, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
        let path = self.output_dir.join(name);
        write_atomic(&path, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn report(&self, cfg: &RunConfig, name: &str, report: &Value) -> Outcome<()> {
        if cfg.formats.json {
            let path = self.write(name, &json_bytes(report))?;
            self.note(format!("wrote {}", path.display()));
        }
        Ok(())
    }

    fn table(&self, cfg: &RunConfig, name: &str, csv: Csv) -> Outcome<()> {
        if cfg.formats.csv {
            let path = self.write(name, &csv.into_bytes())?;
            self.note(format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

fn metadata(cfg: &RunConfig) -> Value {
    json!({
        "config_hash": cfg.hash,
        "prefix": cfg.prefix,
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": tcl_core::VERSION,
    })
}

fn grid_json(grid: &TimeGrid) -> Value {
    json!({"t0": grid.t0(), "dt": grid.dt(), "n_steps": grid.n_steps()})
}

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn require_initial_state(cfg: &RunConfig, command: &str) -> Outcome<Operator> {
    cfg.initial_state
        .clone()
        .ok_or_else(|| Failure::Validation(format!("{command} requires [initial_state] rho")))
}

/// TCL generator of the configured order, resummed when requested.
struct BuiltGenerator {
    series: GeneratorSeries,
    generator: Vec<SuperOperator>,
    resummation: Option<(ResummationOptions, Resummation)>,
    moments_s: f64,
    generator_s: f64,
}

fn build_generator(cfg: &RunConfig, model: &SystemModel) -> Outcome<BuiltGenerator> {
    let bath = setup(cfg.bath.moments(), "bath")?;
    let t = Instant::now();
    let moments = numeric(
        compute_moments(model, &bath, cfg.tcl_order, &cfg.grid),
        "moments",
    )?;
    let moments_s = seconds(t);
    let t = Instant::now();
    let series = numeric(
        generator_via_recursion(&moments, cfg.tcl_order),
        "generator",
    )?;
    let (generator, resummation) = match cfg.resummation {
        Some(options) => {
            let r = numeric(resum(&series, options), "resummation")?;
            (r.generator.g_np().to_vec(), Some((options, r)))
        }
        None => (series.summed(cfg.tcl_order), None),
    };
    Ok(BuiltGenerator {
        series,
        generator,
        resummation,
        moments_s,
        generator_s: seconds(t),
    })
}

fn resummation_json(options: &ResummationOptions, r: &Resummation) -> Value {
    let max_condition = r
        .reduced
        .diagnostics()
        .iter()
        .filter_map(|d| d.condition)
        .fold(0.0, f64::max);
    let max_g2 = r.g2.orders().map(|n| r.g2.max_norm(n)).fold(0.0, f64::max);
    json!({
        "cutoff": options.cutoff,
        "epsilon_steps": options.start_offset,
        "truncation": options.truncation,
        "stencil": match options.stencil {
            DerivativeStencil::Second => "second",
            DerivativeStencil::Fourth => "fourth",
        },
        "lowest_order": r.reduced.lowest_order(),
        "start_index": r.generator.start(),
        "full_rank": r.reduced.full_rank(),
        "rank_drops": r.reduced.rank_drops(1),
        "max_condition": max_condition,
        "max_g2_norm": max_g2,
        "max_g2_trace_annihilation_defect": r.max_g2_trace_annihilation_defect(),
        "max_resummed_trace_annihilation_defect": r.generator.max_trace_annihilation_defect(),
    })
}

fn generator_norms(series: &GeneratorSeries) -> Value {
    let mut norms = Map::new();
    for n in series.orders() {
        norms.insert(n.to_string(), json!(series.max_norm(n)));
    }
    Value::Object(norms)
}

fn element_columns(d: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("re_rho_{i}{j}"));
            header.push(format!("im_rho_{i}{j}"));
        }
    }
    header.push("trace".into());
    header.push("purity".into());
    header
}

pub fn simulate(cfg: &RunConfig, ctx: &Context) -> Outcome<()> {
    let total = Instant::now();
    let rho_s = require_initial_state(cfg, "simulate")?;
    let model = cfg.system.with_coupling(cfg.lambda);
    let frame = setup(InteractionFrame::new(&model.h_s), "system Hamiltonian")?;
    let grid = cfg.grid;
    let built = build_generator(cfg, &model)?;

    let t = Instant::now();
    let rho0 = setup(
        SystemState::new(rho_s, Picture::Schrodinger),
        "initial_state.rho",
    )?
    .to_picture(&frame, grid.t0(), Picture::Interaction);
    let trajectory = numeric(propagate(&built.generator, &rho0, &grid), "propagation")?;
    let halving = if grid.n_steps().is_multiple_of(2) {
        Some(numeric(
            step_halving_error(&built.generator, &rho0, &grid),
            "step-halving check",
        )?)
    } else {
        None
    };
    let propagation_s = seconds(t);

    let d = model.dim();
    let states = trajectory.schrodinger(&frame);
    let mut csv = Csv::new(&element_columns(d));
    let mut row = Vec::with_capacity(2 * d * d + 3);
    for (k, s) in states.iter().enumerate() {
        row.clear();
        row.push(grid.t(k));
        let m = s.rho.matrix();
        for i in 0..d {
            for j in 0..d {
                row.push(m[(i, j)].re);
                row.push(m[(i, j)].im);
            }
        }
        row.push(s.trace().re);
        row.push(s.purity());
        csv.row(&row);
    }
    let csv_name = format!("{}_trajectory.csv", cfg.prefix);
    ctx.table(cfg, &csv_name, csv)?;

    let generator_defect = built
        .generator
        .iter()
        .map(SuperOperator::trace_annihilation_defect)
        .fold(0.0, f64::max);
    let report = json!({
        "command": "simulate",
        "metadata": metadata(cfg),
        "outputs": {"trajectory": if cfg.formats.csv { json!(csv_name) } else { Value::Null }},
        "model": {
            "dim": d,
            "lambda": cfg.lambda,
            "bath": cfg.bath.kind(),
            "tcl_order": cfg.tcl_order,
            "resummed": built.resummation.is_some(),
            "grid": grid_json(&grid),
        },
        "diagnostics": {
            "max_trace_drift": trajectory.max_trace_drift(),
            "step_halving_error": halving,
            "generator_norms": generator_norms(&built.series),
            "max_trace_annihilation_defect": generator_defect,
            "max_hermiticity_defect": built.series.max_hermiticity_defect(),
            "final_purity": states.last().map(SystemState::purity),
            "resummation": built
                .resummation
                .as_ref()
                .map_or(Value::Null, |(o, r)| resummation_json(o, r)),
        },
        "timings": {
            "moments_s": built.moments_s,
            "generator_s": built.generator_s,
            "propagation_s": propagation_s,
            "total_s": seconds(total),
        },
    });
    ctx.report(cfg, &format!("{}_report.json", cfg.prefix), &report)?;
    ctx.note(format!(
        "simulate: {} points, max trace drift {:.3e}",
        grid.len(),
        trajectory.max_trace_drift()
    ));
    Ok(())
}

/// Random moments on a 10-point grid for the recursion/composition self-test.
fn random_moments(seed: u64, n: usize) -> tcl_core::Result<Vec<MomentSeries>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(0.0, 0.1, 9)?;
    let mut random = || {
        SuperOperator::from_matrix(
            2,
            CMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25))
            }),
        )
    };
    (1..=n)
        .map(|order| {
            let m = (0..grid.len())
                .map(|_| random())
                .collect::<tcl_core::Result<_>>()?;
            let mdot = (0..grid.len())
                .map(|_| random())
                .collect::<tcl_core::Result<_>>()?;
            MomentSeries::new(order, grid, m, mdot)
        })
        .collect()
}

pub const SELF_TEST_TOL: f64 = 1e-12;

pub fn diagrams(n: usize, ctx: &Context) -> Outcome<()> {
    let total = Instant::now();
    let comps = enumerate_compositions(n).map_err(|e| Failure::Validation(e.to_string()))?;
    let entries: Vec<Value> = comps
        .iter()
        .map(|c| json!({"parts": c.parts(), "sign": c.sign(), "term": c.term()}))
        .collect();
    let alternating: i64 = comps.iter().map(|c| i64::from(c.sign())).sum();

    let self_test = match ctx.seed {
        Some(seed) => {
            let moments = numeric(random_moments(seed, n), "self-test moments")?;
            let rec = numeric(generator_via_recursion(&moments, n), "recursion")?;
            let comp = numeric(generator_via_compositions(&moments, n), "compositions")?;
            let rec_n = rec
                .order(n)
                .ok_or_else(|| Failure::Numerical(format!("recursion produced no order {n}")))?;
            let diff = rec_n
                .iter()
                .zip(&comp)
                .map(|(a, b)| (a - b).max_abs())
                .fold(0.0, f64::max);
            Some((seed, diff))
        }
        None => None,
    };

    let report = json!({
        "command": "diagrams",
        "n": n,
        "count": comps.len(),
        "alternating_sign_sum": alternating,
        "compositions": entries,
        "self_test": self_test.map_or(Value::Null, |(seed, diff)| json!({
            "seed": seed,
            "dim": 2,
            "grid_points": 10,
            "max_abs_difference": diff,
            "tolerance": SELF_TEST_TOL,
            "passed": diff < SELF_TEST_TOL,
        })),
        "timings": {"total_s": seconds(total)},
    });
    let path = ctx.write(&format!("diagrams_{n}.json"), &json_bytes(&report))?;
    ctx.note(format!(
        "diagrams: {} compositions of {n}, wrote {}",
        comps.len(),
        path.display()
    ));
    if let Some((seed, diff)) = self_test {
        if diff >= SELF_TEST_TOL {
            return Err(Failure::Numerical(format!(
                "recursion and composition sum differ by {diff:.3e} (seed {seed})"
            )));
        }
    }
    Ok(())
}

fn require_discrete<'a>(
    cfg: &'a RunConfig,
    command: &str,
) -> Outcome<&'a tcl_core::bath::DiscreteBath> {
    match &cfg.bath {
        BathSpec::Discrete(b) => Ok(b),
        _ => Err(Failure::Validation(format!(
            "{command} requires bath.kind = \"discrete\""
        ))),
    }
}

fn in_window(r: f64, w: [f64; 2]) -> bool {
    r >= w[0] && r <= w[1]
}

pub fn oracle_compare(cfg: &RunConfig, ctx: &Context) -> Outcome<()> {
    let total = Instant::now();
    let bath = require_discrete(cfg, "oracle-compare")?;
    let spec = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| Failure::Validation("oracle-compare requires an [oracle] block".into()))?;
    let grid = cfg.grid;
    let window = setup(recurrence_window(&grid, bath), "comparison window")?;
    // Fail on oversize models before any numerical work.
    for &lambda in &spec.lambdas {
        setup(
            FullModel::new(cfg.system.clone(), bath.clone(), lambda),
            "full model",
        )?;
    }

    let mut results = Vec::with_capacity(spec.lambdas.len());
    let (mut d2, mut d4) = (Vec::new(), Vec::new());
    let mut timings = Vec::new();
    for &lambda in &spec.lambdas {
        let t = Instant::now();
        let full = setup(
            FullModel::new(cfg.system.clone(), bath.clone(), lambda),
            "full model",
        )?;
        let exact = numeric(exact_dynamical_map(&full, &grid, spec.cutoff), "exact map")?;
        let moments = numeric(
            compute_moments(
                &cfg.system.with_coupling(lambda),
                &tcl_core::tcl::BathMoments::Exact(bath.clone()),
                4,
                &grid,
            ),
            "moments",
        )?;
        let series = numeric(generator_via_recursion(&moments, 4), "generator")?;
        let g2 = series.summed(2);
        let g4 = series.summed(4);
        let (mut times, mut e2, mut e4) = (Vec::new(), Vec::new(), Vec::new());
        for k in window.range.clone() {
            times.push(grid.t(k));
            e2.push((&exact.generators()[k] - &g2[k]).norm());
            e4.push((&exact.generators()[k] - &g4[k]).norm());
        }
        let m2 = e2.iter().copied().fold(0.0, f64::max);
        let m4 = e4.iter().copied().fold(0.0, f64::max);
        let max_condition = exact.conditions()[window.range.clone()]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        d2.push(m2);
        d4.push(m4);
        results.push(json!({
            "lambda": lambda,
            "tcl2_distance": m2,
            "tcl4_distance": m4,
            "max_condition": max_condition,
            "distances": {"t": times, "tcl2": e2, "tcl4": e4},
        }));
        timings.push(json!({"lambda": lambda, "seconds": seconds(t)}));
    }

    let r2 = successive_ratios(&d2);
    let r4 = successive_ratios(&d4);
    let mut failures = Vec::new();
    for (name, ratios, w) in [
        ("tcl2", &r2, spec.tcl2_window),
        ("tcl4", &r4, spec.tcl4_window),
    ] {
        for (i, &r) in ratios.iter().enumerate() {
            if !in_window(r, w) {
                failures.push(format!(
                    "{name} ratio {r:.4} for lambda {} -> {} is outside [{}, {}]",
                    spec.lambdas[i],
                    spec.lambdas[i + 1],
                    w[0],
                    w[1]
                ));
            }
        }
    }
    let report = json!({
        "command": "oracle-compare",
        "metadata": metadata(cfg),
        "grid": grid_json(&grid),
        "window": {
            "start_index": window.range.start,
            "end_index": window.range.end,
            "t_start": grid.t(window.range.start),
            "t_end": grid.t(window.range.end - 1),
            "recurrence_time": window.recurrence_time,
        },
        "results": results,
        "ratios": {"tcl2": r2, "tcl4": r4},
        "windows": {"tcl2": spec.tcl2_window, "tcl4": spec.tcl4_window},
        "passed": failures.is_empty(),
        "failures": failures,
        "timings": {"per_lambda": timings, "total_s": seconds(total)},
    });
    ctx.report(cfg, &format!("{}_oracle.json", cfg.prefix), &report)?;
    for (i, l) in spec.lambdas.iter().enumerate() {
        ctx.note(format!(
            "lambda {l}: |G_exact - G2| = {:.4e}, |G_exact - G2 - G4| = {:.4e}",
            d2[i], d4[i]
        ));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(failures.join("\n")))
    }
}

pub fn correlation(cfg: &RunConfig, ctx: &Context) -> Outcome<()> {
    let total = Instant::now();
    let rho = require_initial_state(cfg, "correlation")?;
    let spec = cfg.correlation.as_ref().ok_or_else(|| {
        Failure::Validation("correlation requires a [correlation] block with a, b, c".into())
    })?;
    let model = cfg.system.with_coupling(cfg.lambda);
    let frame = setup(InteractionFrame::new(&model.h_s), "system Hamiltonian")?;
    let grid = cfg.grid;
    let built = build_generator(cfg, &model)?;
    let map = numeric(
        dynamical_map_from_generator(&built.generator, &grid),
        "dynamical map",
    )?;

    let t = Instant::now();
    let mut two_point = Vec::with_capacity(grid.len());
    let mut csv = Csv::new(&["t", "re", "im"]);
    for k in 0..grid.len() {
        let c = numeric(
            map_two_point(&map, &frame, &rho, &spec.a, &spec.b, k),
            "two-point",
        )?;
        csv.row(&[grid.t(k), c.re, c.im]);
        two_point.push(c);
    }
    let two_point_s = seconds(t);
    let csv_name = format!("{}_two_point.csv", cfg.prefix);
    ctx.table(cfg, &csv_name, csv)?;

    let t = Instant::now();
    let (oracle_two_point, three_point) = match &cfg.bath {
        BathSpec::Discrete(bath) => {
            let full = setup(
                FullModel::new(cfg.system.clone(), bath.clone(), cfg.lambda),
                "full model",
            )?;
            let mut deviation: f64 = 0.0;
            for (k, c) in two_point.iter().enumerate() {
                let exact = numeric(
                    exact_two_point(&full, &rho, &spec.a, &spec.b, grid.t(k), grid.t0()),
                    "exact two-point",
                )?;
                deviation = deviation.max((exact - c).norm());
            }
            let cutoff = cfg.oracle.as_ref().map_or(DEFAULT_SVD_CUTOFF, |o| o.cutoff);
            let exact_map = numeric(exact_dynamical_map(&full, &grid, cutoff), "exact map")?;
            let ops = [&spec.a, &spec.b, &spec.c];
            let mut pairs = Vec::new();
            let mut max_gap: f64 = 0.0;
            for k2 in (0..grid.len()).step_by(spec.stride) {
                for k1 in (0..=k2).step_by(spec.stride) {
                    let (t2, t1) = (grid.t(k2), grid.t(k1));
                    let exact = numeric(
                        exact_multipoint_correlation(&full, &rho, ops, [t2, t1, grid.t0()]),
                        "exact three-point",
                    )?;
                    let fact = numeric(
                        factorized_multipoint(&exact_map, full.system_frame(), &rho, ops, [t2, t1]),
                        "factorized three-point",
                    )?;
                    let gap = (exact - fact).norm();
                    max_gap = max_gap.max(gap);
                    pairs.push(json!({
                        "t2": t2,
                        "t1": t1,
                        "exact": complex_json(exact),
                        "factorized": complex_json(fact),
                        "gap": gap,
                    }));
                }
            }
            (
                json!(deviation),
                json!({"stride": spec.stride, "max_gap": max_gap, "pairs": pairs}),
            )
        }
        _ => (Value::Null, Value::Null),
    };
    let oracle_s = seconds(t);

    let report = json!({
        "command": "correlation",
        "metadata": metadata(cfg),
        "outputs": {"two_point": if cfg.formats.csv { json!(csv_name) } else { Value::Null }},
        "model": {
            "lambda": cfg.lambda,
            "bath": cfg.bath.kind(),
            "tcl_order": cfg.tcl_order,
            "resummed": built.resummation.is_some(),
            "grid": grid_json(&grid),
        },
        "two_point": {
            "final": complex_json(*two_point.last().unwrap_or(&C64::new(0.0, 0.0))),
            "max_deviation_from_exact": oracle_two_point,
        },
        "three_point": three_point,
        "timings": {
            "moments_s": built.moments_s,
            "generator_s": built.generator_s,
            "two_point_s": two_point_s,
            "oracle_s": oracle_s,
            "total_s": seconds(total),
        },
    });
    ctx.report(cfg, &format!("{}_correlation.json", cfg.prefix), &report)?;
    if let Some(gap) = report["three_point"]["max_gap"].as_f64() {
        ctx.note(format!("correlation: max three-point gap {gap:.4e}"));
    }
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Outcome<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))
}
