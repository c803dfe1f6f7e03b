use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcl_core::bath::{
    correlation_from_spectral_density, super_correlation, BathMode, DiscreteBath, SpectralDensity,
    SuperCorrelation,
};
use tcl_core::quadrature::centered_derivative;
use tcl_core::tcl::{
    compute_moment_derivative_with_top, compute_moments, dynamical_map_from_generator,
    generator_via_compositions, generator_via_recursion, propagate, step_halving_error,
    tcl2_generator, BathMoments, MomentSeries, TimeGrid,
};
use tcl_core::{
    CMatrix, InteractionFrame, Operator, Picture, Sigma, SuperOperator, SystemModel, SystemState,
    C64,
};

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

fn dephasing_model() -> SystemModel {
    SystemModel::new(Operator::pauli_z().scale_real(0.5), Operator::pauli_z()).unwrap()
}

fn spin_boson_model() -> SystemModel {
    SystemModel::new(Operator::pauli_z().scale_real(0.5), Operator::pauli_x()).unwrap()
}

/// `Re C(u)` for the zero-temperature Ohmic bath, written out independently.
fn re_c(u: f64) -> f64 {
    let x = WC * u;
    ETA / PI * WC * WC * (1.0 - x * x) / ((1.0 + x * x) * (1.0 + x * x))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Column/row index of the coherence `|0⟩⟨1|` in the column-stacked representation.
const COH: usize = 2;

#[test]
fn second_moment_matches_dense_double_integral() {
    let t = 1.0 / WC;
    let grid = TimeGrid::new(0.0, t / 200.0, 200).unwrap();
    let moments = compute_moments(
        &dephasing_model(),
        &BathMoments::Gaussian(ohmic()),
        2,
        &grid,
    )
    .unwrap();
    let m2 = moments[1].m()[200].matrix()[(COH, COH)];
    let oracle = -4.0 * simpson(|t2| simpson(|t1| re_c(t2 - t1), 0.0, t2, 200), 0.0, t, 200);
    assert!(
        (m2.re - oracle).abs() < 1e-6 * oracle.abs(),
        "{m2} vs {oracle}"
    );
    assert!(m2.im.abs() < 1e-12);
}

#[test]
fn second_moment_derivative_matches_single_integral() {
    let grid = TimeGrid::new(0.0, 1e-3, 400).unwrap();
    let moments = compute_moments(
        &dephasing_model(),
        &BathMoments::Gaussian(ohmic()),
        2,
        &grid,
    )
    .unwrap();
    for k in [50, 200, 400] {
        let t = grid.t(k);
        let oracle = -4.0 * ETA / PI * WC * WC * t / (1.0 + WC * WC * t * t);
        let v = moments[1].mdot()[k].matrix()[(COH, COH)];
        assert!(
            (v.re - oracle).abs() < 1e-8 * oracle.abs(),
            "k={k}: {v} vs {oracle}"
        );
    }
}

#[test]
fn first_moment_vanishes_and_moments_start_at_zero() {
    let grid = TimeGrid::new(0.0, 0.01, 20).unwrap();
    let moments = compute_moments(
        &spin_boson_model(),
        &BathMoments::Gaussian(ohmic()),
        4,
        &grid,
    )
    .unwrap();
    assert!(moments[0].m().iter().all(|m| m.max_abs() == 0.0));
    assert!(moments[2].m().iter().all(|m| m.max_abs() == 0.0));
    for s in &moments {
        assert!(s.m()[0].max_abs() < 1e-15);
        if s.order() >= 2 {
            assert!(s.mdot()[0].max_abs() < 1e-15);
        }
    }
}

fn fd_check(moments: &[MomentSeries], dt: f64, rate: f64) {
    for s in moments {
        let fd = centered_derivative(s.m(), dt).unwrap();
        let scale = s.mdot().iter().map(SuperOperator::norm).fold(0.0, f64::max) * rate * rate;
        for k in 1..s.m().len() - 1 {
            let err = (&fd[k] - &s.mdot()[k]).norm();
            assert!(
                err <= 5.0 * dt * dt * scale,
                "order {} k={k}: {err:.3e}",
                s.order()
            );
        }
    }
}

#[test]
fn derivative_agrees_with_finite_differences() {
    let dt = 0.005;
    let grid = TimeGrid::new(0.0, dt, 80).unwrap();
    let gauss = compute_moments(
        &spin_boson_model(),
        &BathMoments::Gaussian(ohmic()),
        4,
        &grid,
    )
    .unwrap();
    fd_check(&gauss, dt, WC);
    let bath = DiscreteBath::new(
        vec![BathMode::qubit(0.9, 0.3), BathMode::qubit(1.4, 0.2)],
        Some(1.0),
        0.1,
    )
    .unwrap();
    let grid = TimeGrid::new(0.0, 0.02, 100).unwrap();
    let exact = compute_moments(&spin_boson_model(), &BathMoments::Exact(bath), 4, &grid).unwrap();
    fd_check(&exact, 0.02, 2.0);
}

#[test]
fn top_vertex_rule() {
    let grid = TimeGrid::new(0.0, 0.01, 30).unwrap();
    let bath = DiscreteBath::new(vec![BathMode::qubit(1.0, 0.4)], Some(0.5), 0.2).unwrap();
    for provider in [BathMoments::Gaussian(ohmic()), BathMoments::Exact(bath)] {
        for n in [2, 4] {
            let forced = compute_moment_derivative_with_top(
                &spin_boson_model(),
                &provider,
                n,
                &grid,
                Sigma::Plus,
            )
            .unwrap();
            assert!(forced.iter().all(|m| m.max_abs() < 1e-13));
        }
    }
}

fn random_moments(seed: u64, n_max: usize) -> Vec<MomentSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(0.0, 0.1, 9).unwrap();
    let mut random = || {
        SuperOperator::from_matrix(
            2,
            CMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25))
            }),
        )
        .unwrap()
    };
    (1..=n_max)
        .map(|n| {
            let m = (0..10).map(|_| random()).collect();
            let mdot = (0..10).map(|_| random()).collect();
            MomentSeries::new(n, grid, m, mdot).unwrap()
        })
        .collect()
}

#[test]
fn recursion_equals_composition_sum() {
    let moments = random_moments(2024, 6);
    let rec = generator_via_recursion(&moments, 6).unwrap();
    for n in 1..=6 {
        let comp = generator_via_compositions(&moments, n).unwrap();
        for (a, b) in rec.order(n).unwrap().iter().zip(&comp) {
            assert!((a - b).max_abs() < 1e-12);
        }
    }
    // second order written out: Ṁ⁽²⁾ − Ṁ⁽¹⁾M⁽¹⁾
    for k in 0..10 {
        let direct = &moments[1].mdot()[k] - &(&moments[0].mdot()[k] * &moments[0].m()[k]);
        assert!((&rec.order(2).unwrap()[k] - &direct).max_abs() < 1e-15);
    }
}

#[test]
fn missing_order_is_reported() {
    let moments = random_moments(1, 2);
    assert!(generator_via_recursion(&moments, 3).is_err());
    assert!(generator_via_compositions(&moments, 3).is_err());
}

#[test]
fn tcl2_closed_form_matches_recursion() {
    let grid = TimeGrid::new(0.0, 0.004, 100).unwrap();
    let corr = correlation_from_spectral_density(
        SpectralDensity::Ohmic {
            eta: ETA,
            cutoff: WC,
        },
        None,
    )
    .unwrap();
    for mean in [0.0, 0.3] {
        let d = super_correlation(corr.clone().with_mean(mean));
        let model = spin_boson_model();
        let closed = tcl2_generator(&model, &d, &grid).unwrap();
        let moments = compute_moments(&model, &BathMoments::Gaussian(d), 2, &grid).unwrap();
        let rec = generator_via_recursion(&moments, 2).unwrap();
        for n in [1, 2] {
            for (a, b) in closed.order(n).unwrap().iter().zip(rec.order(n).unwrap()) {
                assert!((a - b).max_abs() < 1e-10, "mean {mean}, order {n}");
            }
        }
    }
    let zero = SystemModel::new(Operator::pauli_z(), Operator::zeros(2)).unwrap();
    let g = tcl2_generator(&zero, &ohmic(), &grid).unwrap();
    assert_eq!(g.max_norm(2), 0.0);
}

#[test]
fn tcl2_dephasing_rate_matches_decoherence_derivative() {
    let grid = TimeGrid::new(0.0, 1e-3, 400).unwrap();
    let g = tcl2_generator(&dephasing_model(), &ohmic(), &grid).unwrap();
    for k in [100, 250, 400] {
        let t = grid.t(k);
        // dΓ/dt by quadrature of 4 Re C
        let rate = 4.0 * simpson(re_c, 0.0, t, 400);
        let v = g.order(2).unwrap()[k].matrix()[(COH, COH)];
        assert!((v.re + rate).abs() < 1e-6 * rate, "{v} vs {rate}");
    }
}

#[test]
fn generator_orders_are_homogeneous_in_coupling() {
    let grid = TimeGrid::new(0.0, 0.01, 40).unwrap();
    let bath = BathMoments::Gaussian(ohmic());
    let base = generator_via_recursion(
        &compute_moments(&spin_boson_model(), &bath, 4, &grid).unwrap(),
        4,
    )
    .unwrap();
    let lambda = 0.5;
    let scaled = generator_via_recursion(
        &compute_moments(&spin_boson_model().with_coupling(lambda), &bath, 4, &grid).unwrap(),
        4,
    )
    .unwrap();
    for n in [2, 4] {
        let f = lambda.powi(n as i32);
        for (a, b) in base.order(n).unwrap().iter().zip(scaled.order(n).unwrap()) {
            assert!((&a.scale_real(f) - b).norm() <= 1e-12 * a.norm().max(1e-300) * f + 1e-300);
        }
    }
}

#[test]
fn generators_annihilate_trace_and_preserve_hermiticity() {
    let grid = TimeGrid::new(0.0, 0.02, 50).unwrap();
    let bath = DiscreteBath::new(
        vec![BathMode::qubit(0.9, 0.3), BathMode::qubit(1.4, 0.2)],
        Some(1.0),
        0.1,
    )
    .unwrap();
    for provider in [BathMoments::Gaussian(ohmic()), BathMoments::Exact(bath)] {
        let g = generator_via_recursion(
            &compute_moments(&spin_boson_model(), &provider, 4, &grid).unwrap(),
            4,
        )
        .unwrap();
        assert!(g.max_trace_annihilation_defect() < 1e-11);
        assert!(g.max_hermiticity_defect() < 1e-11);
    }
}

#[test]
fn pure_dephasing_cumulants_terminate() {
    let grid = TimeGrid::new(0.0, 2.0 / WC / 200.0, 200).unwrap();
    let g = generator_via_recursion(
        &compute_moments(
            &dephasing_model(),
            &BathMoments::Gaussian(ohmic()),
            4,
            &grid,
        )
        .unwrap(),
        4,
    )
    .unwrap();
    assert!(
        g.max_norm(4) < 1e-8 * g.max_norm(2),
        "{:.3e}",
        g.max_norm(4) / g.max_norm(2)
    );
}

#[test]
fn wick_engine_matches_exact_engine_on_harmonic_bath() {
    let grid = TimeGrid::new(0.0, 0.01, 120).unwrap();
    let bath = DiscreteBath::new(vec![BathMode::oscillator(1.2, 0.3, 6)], None, 0.0).unwrap();
    let model = spin_boson_model();
    let wick = compute_moments(
        &model,
        &BathMoments::Gaussian(super_correlation(bath.correlation())),
        4,
        &grid,
    )
    .unwrap();
    let exact = compute_moments(&model, &BathMoments::Exact(bath), 4, &grid).unwrap();
    for (w, e) in wick.iter().zip(&exact) {
        let scale = e
            .mdot()
            .iter()
            .map(SuperOperator::norm)
            .fold(1e-300, f64::max);
        for k in 0..grid.len() {
            assert!(
                (&w.mdot()[k] - &e.mdot()[k]).norm() < 1e-8 * scale,
                "order {}",
                e.order()
            );
            assert!(
                (&w.m()[k] - &e.m()[k]).norm() < 1e-8 * scale,
                "order {}",
                e.order()
            );
        }
    }
}

fn plus_state() -> SystemState {
    let rho = Operator::new(CMatrix::from_element(2, 2, C64::new(0.5, 0.0))).unwrap();
    SystemState::new(rho, Picture::Interaction).unwrap()
}

#[test]
fn pure_dephasing_propagation_follows_decoherence_function() {
    let grid = TimeGrid::new(0.0, 1e-3 / WC, 2000).unwrap();
    let g = tcl2_generator(&dephasing_model(), &ohmic(), &grid).unwrap();
    let traj = propagate(&g.summed(2), &plus_state(), &grid).unwrap();
    assert!(traj.max_trace_drift() < 1e-10);
    for (k, s) in traj.states().iter().enumerate() {
        let t = grid.t(k);
        let gamma = 2.0 * ETA / PI * (1.0 + WC * WC * t * t).ln();
        let coh = 2.0 * s.rho.matrix()[(0, 1)].norm();
        assert!((coh - (-gamma).exp()).abs() < 1e-3 * (-gamma).exp());
    }
    let frame = InteractionFrame::new(&dephasing_model().h_s).unwrap();
    let schr = traj.schrodinger(&frame);
    assert_eq!(schr[5].picture, Picture::Schrodinger);
    assert!(
        (schr[5].rho.matrix()[(0, 1)].norm() - traj.states()[5].rho.matrix()[(0, 1)].norm()).abs()
            < 1e-14
    );
}

#[test]
fn zero_generator_keeps_state_and_map() {
    let grid = TimeGrid::new(0.0, 0.1, 10).unwrap();
    let zero = vec![SuperOperator::zeros(2); grid.len()];
    let traj = propagate(&zero, &plus_state(), &grid).unwrap();
    assert!(traj.states().iter().all(|s| s.rho == plus_state().rho));
    let map = dynamical_map_from_generator(&zero, &grid).unwrap();
    assert!(map.maps().iter().all(|m| *m == SuperOperator::identity(2)));
    let short = vec![SuperOperator::zeros(2); 3];
    assert!(propagate(&short, &plus_state(), &grid).is_err());
}

#[test]
fn spin_boson_map_is_invertible_and_trace_preserving() {
    let grid = TimeGrid::new(0.0, 0.01, 200).unwrap();
    let g = tcl2_generator(&spin_boson_model(), &ohmic(), &grid).unwrap();
    let map = dynamical_map_from_generator(&g.summed(2), &grid).unwrap();
    assert!(map.max_trace_preservation_defect() < 1e-9);
    let last = map.at(grid.n_steps());
    let inv = last.try_inverse().unwrap();
    assert!((&(last * &inv) - &SuperOperator::identity(2)).max_abs() < 1e-9);
    let traj = propagate(&g.summed(2), &plus_state(), &grid).unwrap();
    assert!(traj.max_trace_drift() < 1e-10);
    let err = step_halving_error(&g.summed(2), &plus_state(), &grid).unwrap();
    assert!(err < 1e-6, "{err:.3e}");
}
