//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcl_core::bath::{
    correlation_from_spectral_density, enumerate_pairings, exact_multipoint_moment,
    super_correlation, wick_multipoint, BathMode, DiscreteBath, SpectralDensity, SuperCorrelation,
};
use tcl_core::oracle::{
    exact_dynamical_map, exact_multipoint_correlation, exact_two_point, factorized_multipoint,
    map_two_point, recurrence_window, successive_ratios, FullModel,
};
use tcl_core::resummation::{resum, resummed_generator, ResummationOptions, DEFAULT_SVD_CUTOFF};
use tcl_core::tcl::{
    compute_moments, dynamical_map_from_generator, enumerate_compositions,
    generator_via_compositions, generator_via_recursion, propagate, BathMoments, GeneratorSeries,
    MomentSeries, TimeGrid,
};
use tcl_core::{
    CMatrix, InteractionFrame, Operator, Picture, Sigma, SuperOperator, SystemModel, SystemState,
    C64,
};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, verdict: Verdict) -> Verdict {
    let s = elapsed.as_secs_f64();
    match verdict {
        Ok(d) if s < limit_s => Ok(format!("{d}; {s:.1} s")),
        Ok(d) => Err(format!("{d}; {s:.1} s exceeds {limit_s} s")),
        Err(d) => Err(format!("{d}; {s:.1} s")),
    }
}

const ETA: f64 = 0.1;
const WC: f64 = 5.0;

fn ohmic() -> SuperCorrelation {
    super_correlation(
        correlation_from_spectral_density(
            SpectralDensity::Ohmic {
                eta: ETA,
                cutoff: WC,
            },
            None,
        )
        .unwrap(),
    )
}

fn spin_boson() -> SystemModel {
    SystemModel::new(Operator::pauli_z().scale_real(0.5), Operator::pauli_x()).unwrap()
}

fn dephasing() -> SystemModel {
    SystemModel::new(Operator::pauli_z().scale_real(0.5), Operator::pauli_z()).unwrap()
}

fn spin_bath(scale: f64) -> DiscreteBath {
    DiscreteBath::new(
        vec![
            BathMode::qubit(0.8, 0.5 * scale),
            BathMode::qubit(1.3, 0.4 * scale),
            BathMode::qubit(2.1, 0.6 * scale),
        ],
        Some(2.0),
        0.0,
    )
    .unwrap()
}

fn plus() -> Operator {
    Operator::new(CMatrix::from_element(2, 2, C64::new(0.5, 0.0))).unwrap()
}

fn series(
    model: &SystemModel,
    bath: &BathMoments,
    order: usize,
    grid: &TimeGrid,
) -> GeneratorSeries {
    generator_via_recursion(&compute_moments(model, bath, order, grid).unwrap(), order).unwrap()
}

fn random_moments(seed: u64, n_max: usize) -> Vec<MomentSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(0.0, 0.1, 9).unwrap();
    let mut random = || {
        SuperOperator::from_matrix(
            2,
            CMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }),
        )
        .unwrap()
    };
    (1..=n_max)
        .map(|n| {
            let m = (0..grid.len()).map(|_| random()).collect();
            let mdot = (0..grid.len()).map(|_| random()).collect();
            MomentSeries::new(n, grid, m, mdot).unwrap()
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let moments = random_moments(20_240_601, 6);
    let rec = generator_via_recursion(&moments, 6).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let comp = generator_via_compositions(&moments, n).unwrap();
        for (a, b) in rec.order(n).unwrap().iter().zip(&comp) {
            worst = worst.max((a - b).max_abs());
        }
    }
    within(
        start.elapsed(),
        5.0,
        check(
            worst < 1e-12,
            format!("max |recursion - compositions| = {worst:.2e}"),
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut problems = Vec::new();
    for n in 1..=12 {
        let comps = enumerate_compositions(n).unwrap();
        if comps.len() != 1 << (n - 1) {
            problems.push(format!("n={n}: {} compositions", comps.len()));
        }
        let sum: i32 = comps.iter().map(|c| c.sign()).sum();
        if n >= 2 && sum != 0 {
            problems.push(format!("n={n}: signed sum {sum}"));
        }
    }
    let signs: Vec<i32> = enumerate_compositions(3)
        .unwrap()
        .iter()
        .map(|c| c.sign())
        .collect();
    if signs != [1, -1, -1, 1] {
        problems.push(format!("n=3 signs {signs:?}"));
    }
    within(
        start.elapsed(),
        1.0,
        check(
            problems.is_empty(),
            if problems.is_empty() {
                "2^(n-1) counts, zero signed sums, n=3 pattern (+,-,-,+)".into()
            } else {
                problems.join(", ")
            },
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `Γ(t) = 4 ∫₀^t (t − u) Re C(u) du` with `Re C` of the zero-temperature Ohmic bath.
fn decoherence_by_quadrature(t: f64) -> f64 {
    let re_c = |u: f64| {
        let x = WC * u;
        ETA / PI * WC * WC * (1.0 - x * x) / ((1.0 + x * x) * (1.0 + x * x))
    };
    4.0 * simpson(|u| (t - u) * re_c(u), 0.0, t, 400)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = common::run_shipped(dir.path(), "pure_dephasing.toml", "simulate");
    if !out.status.success() {
        return Err(format!("simulate failed: {}", common::stderr(&out)));
    }
    let (header, rows) = common::read_csv(&dir.path().join("pure_dephasing_trajectory.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (re, im) = (col("re_rho_01"), col("im_rho_01"));
    let dt_ok = (rows[1][0] - 1e-3 / WC).abs() < 1e-15
        && (rows.last().unwrap()[0] - 2.0 / WC).abs() < 1e-12;
    let mut worst: f64 = 0.0;
    for r in &rows {
        let coh = 2.0 * r[re].hypot(r[im]);
        let expected = (-decoherence_by_quadrature(r[0])).exp();
        worst = worst.max((coh - expected).abs() / expected);
    }

    // Cumulant termination on [0, 2/ω_c] with 400 steps.
    let grid = TimeGrid::new(0.0, 2.0 / WC / 400.0, 400).unwrap();
    let g = series(&dephasing(), &BathMoments::Gaussian(ohmic()), 4, &grid);
    let termination = g.max_norm(4) / g.max_norm(2);
    within(
        start.elapsed(),
        120.0,
        check(
            dt_ok && worst < 1e-3 && termination < 1e-8,
            format!(
                "max relative coherence error {worst:.2e} over {} points; max|G4|/max|G2| = {termination:.2e}",
                rows.len()
            ),
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let grid = TimeGrid::new(0.0, 0.05, 60).unwrap();
    let bath = spin_bath(1.0);
    let window = recurrence_window(&grid, &bath).unwrap();
    let (mut d2, mut d4) = (Vec::new(), Vec::new());
    for lambda in [0.1, 0.05] {
        let full = FullModel::new(spin_boson(), bath.clone(), lambda).unwrap();
        let exact = exact_dynamical_map(&full, &grid, DEFAULT_SVD_CUTOFF).unwrap();
        let g = series(
            &spin_boson().with_coupling(lambda),
            &BathMoments::Exact(bath.clone()),
            4,
            &grid,
        );
        let (g2, g4) = (g.summed(2), g.summed(4));
        let dist = |approx: &[SuperOperator]| {
            window
                .range
                .clone()
                .map(|k| (&exact.generators()[k] - &approx[k]).norm())
                .fold(0.0, f64::max)
        };
        d2.push(dist(&g2));
        d4.push(dist(&g4));
    }
    let (r2, r4) = (successive_ratios(&d2)[0], successive_ratios(&d4)[0]);
    within(
        start.elapsed(),
        300.0,
        check(
            (8.0..=32.0).contains(&r2) && (32.0..=128.0).contains(&r4),
            format!("TCL2 ratio {r2:.2}, TCL4 ratio {r4:.2}"),
        ),
    )
}

fn criterion_5() -> Verdict {
    let grid = TimeGrid::new(0.0, 0.02, 50).unwrap();
    let discrete = DiscreteBath::new(
        vec![BathMode::qubit(0.9, 0.3), BathMode::oscillator(1.4, 0.2, 4)],
        Some(1.0),
        0.1,
    )
    .unwrap();
    let mut trace_defect: f64 = 0.0;
    let mut herm_defect: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut homogeneity: f64 = 0.0;
    let rho = SystemState::new(plus(), Picture::Interaction).unwrap();
    for bath in [BathMoments::Gaussian(ohmic()), BathMoments::Exact(discrete)] {
        let base = series(&spin_boson(), &bath, 4, &grid);
        trace_defect = trace_defect.max(base.max_trace_annihilation_defect());
        herm_defect = herm_defect.max(base.max_hermiticity_defect());
        let traj = propagate(&base.summed(4), &rho, &grid).unwrap();
        drift = drift.max(traj.max_trace_drift());
        // 0.5 scales exactly in binary; 0.3 exercises rounding.
        for lambda in [0.5, 0.3] {
            let scaled = series(&spin_boson().with_coupling(lambda), &bath, 4, &grid);
            for n in base.orders() {
                let f = lambda.powi(n as i32);
                let scale = base.max_norm(n).max(f64::MIN_POSITIVE);
                for (a, b) in base.order(n).unwrap().iter().zip(scaled.order(n).unwrap()) {
                    homogeneity = homogeneity.max((&a.scale_real(f) - b).norm() / (f * scale));
                }
            }
        }
    }
    check(
        trace_defect < 1e-11 && herm_defect < 1e-11 && drift < 1e-10 && homogeneity < 1e-12,
        format!(
            "trace annihilation {trace_defect:.1e}, Hermiticity {herm_defect:.1e}, trace drift {drift:.1e}, homogeneity {homogeneity:.1e}"
        ),
    )
}

fn random_quadruple(rng: &mut ChaCha8Rng) -> ([Sigma; 4], [f64; 4]) {
    let mut times: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..3.0));
    times.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigmas = std::array::from_fn(|k| {
        if k == 0 || rng.random_bool(0.5) {
            Sigma::Plus
        } else {
            Sigma::Minus
        }
    });
    (sigmas, times)
}

fn criterion_6() -> Verdict {
    let mut problems = Vec::new();
    let mut double_factorial = 1usize;
    for m in 1..=6 {
        double_factorial *= 2 * m - 1;
        let count = enumerate_pairings(m).unwrap().len();
        if count != double_factorial {
            problems.push(format!("m={m}: {count} pairings"));
        }
    }
    let harmonic = DiscreteBath::new(vec![BathMode::oscillator(1.3, 0.45, 6)], None, 0.0).unwrap();
    let d = super_correlation(harmonic.correlation());
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut wick_err: f64 = 0.0;
    for _ in 0..20 {
        let (s, t) = random_quadruple(&mut rng);
        let exact = exact_multipoint_moment(&harmonic, &s, &t).unwrap();
        wick_err = wick_err.max((exact - wick_multipoint(&d, &s, &t).unwrap()).norm());
    }
    let spins = spin_bath(1.0);
    let d = super_correlation(spins.correlation());
    let mut violation: f64 = 0.0;
    for _ in 0..20 {
        let (s, t) = random_quadruple(&mut rng);
        let exact = exact_multipoint_moment(&spins, &s, &t).unwrap();
        violation = violation.max((exact - wick_multipoint(&d, &s, &t).unwrap()).norm());
    }
    check(
        problems.is_empty() && wick_err < 1e-9 && violation > 1e-4,
        format!(
            "(2m-1)!! counts {}; harmonic Wick error {wick_err:.1e}; spin-bath violation {violation:.1e}",
            if problems.is_empty() { "ok".into() } else { problems.join(", ") }
        ),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let grid = TimeGrid::new(0.0, 0.4 / 200.0, 200).unwrap();
    let bath = BathMoments::Gaussian(ohmic());

    let base = series(&spin_boson().with_coupling(0.3), &bath, 2, &grid);
    let g2 = base.order(2).unwrap();
    let zero = vec![SuperOperator::zeros(2); grid.len()];
    let trivial = resummed_generator(2, g2, &zero, &grid, 5).unwrap();
    let exact_reduction = trivial.g_np().iter().zip(g2).all(|(a, b)| a == b);

    let mut residuals = Vec::new();
    for lambda in [0.1, 0.05, 0.025] {
        let g = series(&spin_boson().with_coupling(lambda), &bath, 4, &grid);
        let r = resum(&g, ResummationOptions::default()).unwrap();
        let g24 = g.summed(4);
        residuals.push(
            r.generator
                .g_np()
                .iter()
                .zip(&g24)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    let ratios = successive_ratios(&residuals);
    let ok = exact_reduction && ratios.iter().all(|r| (32.0..=128.0).contains(r));
    within(
        start.elapsed(),
        300.0,
        check(
            ok,
            format!(
                "zero G2 gives G_NP = G(2) exactly: {exact_reduction}; ratios {:.2}, {:.2}",
                ratios[0], ratios[1]
            ),
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let grid = TimeGrid::new(0.0, 0.05, 80).unwrap();
    let rho = plus();
    let (a, b, c) = (
        Operator::pauli_x(),
        Operator::pauli_z(),
        Operator::pauli_x(),
    );

    // Two-point function through the TCL2 map against the exact one.
    let frame = InteractionFrame::new(&spin_boson().h_s).unwrap();
    let mut gaps = Vec::new();
    for lambda in [0.1, 0.05] {
        let bath = spin_bath(1.0);
        let g = series(
            &spin_boson().with_coupling(lambda),
            &BathMoments::Exact(bath.clone()),
            2,
            &grid,
        );
        let map = dynamical_map_from_generator(&g.summed(2), &grid).unwrap();
        let full = FullModel::new(spin_boson(), bath, lambda).unwrap();
        let mut gap: f64 = 0.0;
        for k in 0..grid.len() {
            let via_map = map_two_point(&map, &frame, &rho, &a, &b, k).unwrap();
            let exact = exact_two_point(&full, &rho, &a, &b, grid.t(k), 0.0).unwrap();
            gap = gap.max((via_map - exact).norm());
        }
        gaps.push(gap);
    }
    let two_point_ratio = successive_ratios(&gaps)[0];

    // Three-point factorization gap on the scaled model.
    let three_point_gap = |lambda: f64| {
        let full = FullModel::new(spin_boson(), spin_bath(0.15), lambda).unwrap();
        let map = exact_dynamical_map(&full, &grid, DEFAULT_SVD_CUTOFF).unwrap();
        let mut gap: f64 = 0.0;
        for k2 in (0..grid.len()).step_by(10) {
            for k1 in (0..=k2).step_by(10) {
                let (t2, t1) = (grid.t(k2), grid.t(k1));
                let exact =
                    exact_multipoint_correlation(&full, &rho, [&a, &b, &c], [t2, t1, 0.0]).unwrap();
                let fact =
                    factorized_multipoint(&map, full.system_frame(), &rho, [&a, &b, &c], [t2, t1])
                        .unwrap();
                gap = gap.max((exact - fact).norm());
            }
        }
        gap
    };
    let (strong, weak) = (three_point_gap(1.0), three_point_gap(0.01));
    within(
        start.elapsed(),
        180.0,
        check(
            (8.0..=32.0).contains(&two_point_ratio) && strong > 1e-3 && weak < 1e-5,
            format!(
                "two-point ratio {two_point_ratio:.2}; three-point gap {strong:.2e} at lambda=1, {weak:.2e} at lambda=0.01"
            ),
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut bad = Vec::new();
    for (config, command) in common::SHIPPED {
        let r = common::check_determinism(config, command);
        if !(r.identical && r.matches_golden) {
            bad.push(format!("{}: {}", r.config, r.detail));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{} shipped configs byte-identical across runs and with golden files",
                common::SHIPPED.len()
            )
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Verdict); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
