mod common;

use approx::assert_relative_eq;
use common::Lcg;
use multiscan::kernels::{Kernel, KernelKind, ScaledKernel};
use multiscan::statistics::{self, psi_hat_kernel, psi_hat_rect, StatisticSpec};
use multiscan::{build_prefix, simulation, GridField, PenaltySpec, Rect, RngSpec};
use proptest::prelude::*;

fn random_grid(rng: &mut Lcg, dims: &[usize]) -> GridField {
    GridField::from_fn(dims, |_| 4.0 * rng.uniform() - 2.0).unwrap()
}

#[test]
fn every_rect_of_a_random_4x4_matches_direct_sum() {
    let mut rng = Lcg(11);
    let g = random_grid(&mut rng, &[4, 4]);
    let t = build_prefix(&g).unwrap();
    let rects = common::all_rects(&[4, 4]);
    assert_eq!(rects.len(), 100);
    for r in &rects {
        assert!((psi_hat_rect(&t, r).unwrap() - common::direct_psi(&g, r)).abs() <= 1e-10);
    }
}

#[test]
fn all_four_statistics_match_exhaustive_oracles() {
    let mut rng = Lcg(2024);
    for case in 0..60 {
        let d = 1 + case % 3;
        let dims: Vec<usize> = (0..d).map(|_| 1 + rng.below(if d == 3 { 4 } else { 6 })).collect();
        let g = random_grid(&mut rng, &dims);

        let t = statistics::multiscale_t(&g, &StatisticSpec::multiscale()).unwrap();
        let (v, r) = common::multiscale(&g);
        assert!((t.value - v).abs() <= 1e-10, "{:?}", dims);
        assert_eq!(t.argmax_rect, r);

        let s = statistics::multiscale_t_star(&g, &StatisticSpec::multiscale_star()).unwrap();
        let (v, r) = common::multiscale_star_v(&g, 1.0);
        assert!((s.value - v).abs() <= 1e-10);
        assert_eq!(s.argmax_rect, r);

        let sv = StatisticSpec::multiscale_star().with_penalty(PenaltySpec::GammaV { v: 2.5 });
        let (v, _) = common::multiscale_star_v(&g, 2.5);
        assert!((statistics::evaluate(&g, &sv).unwrap().value - v).abs() <= 1e-10);

        let m = statistics::scan_mn(&g, &StatisticSpec::scan()).unwrap();
        let (v, r) = common::scan(&g);
        assert!((m.value - v).abs() <= 1e-10);
        assert_eq!(m.argmax_rect, r);

        let a = statistics::alr_an(&g, &StatisticSpec::alr()).unwrap();
        assert_relative_eq!(a.value.exp(), common::log_alr(&g).exp(), max_relative = 1e-10);
        assert_eq!(a.argmax_rect, r);
        assert_eq!(a.rect_count as usize, common::all_rects(&dims).len());
    }
}

#[test]
fn gamma_v_penalty_skips_the_d_normalizer() {
    let mut rng = Lcg(5);
    let g = random_grid(&mut rng, &[5, 4]);
    let spec = StatisticSpec::multiscale().with_penalty(PenaltySpec::GammaV { v: 4.0 });
    let (v, _) = common::multiscale_star_v(&g, 4.0);
    assert!((statistics::evaluate(&g, &spec).unwrap().value - v).abs() <= 1e-10);
}

#[test]
fn holder_multiscale_matches_per_rect_kernel_statistic() {
    let mut rng = Lcg(77);
    for dims in [vec![6], vec![4, 5]] {
        let g = random_grid(&mut rng, &dims);
        let kind = KernelKind::HolderBump { beta: 0.6 };
        let kernel = Kernel::new(kind, dims.len()).unwrap();
        let n = g.len() as f64;
        let (oracle, arg) = common::argmax_by(&g, |r| {
            let sk = ScaledKernel::for_rect(kernel, r, &dims).unwrap();
            let frac = r.point_count() as f64 / n;
            (psi_hat_kernel(&g, &sk).unwrap().abs() - common::gamma(frac)) / common::dnorm(frac)
        });
        let t = statistics::multiscale_t(&g, &StatisticSpec::multiscale().with_kernel(kind)).unwrap();
        assert!((t.value - oracle).abs() <= 1e-10);
        assert_eq!(t.argmax_rect, arg);
    }
}

#[test]
fn indicator_kernel_reduces_to_rect_statistic() {
    let mut rng = Lcg(9);
    let g = random_grid(&mut rng, &[5, 5]);
    let t = build_prefix(&g).unwrap();
    for r in common::all_rects(&[5, 5]).iter().step_by(5) {
        let sk = ScaledKernel::for_rect(Kernel::indicator(2), r, &[5, 5]).unwrap();
        assert!((psi_hat_kernel(&g, &sk).unwrap() - psi_hat_rect(&t, r).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn scale_filter_restricts_the_family() {
    let mut rng = Lcg(31);
    let g = random_grid(&mut rng, &[6, 6]);
    let filter = multiscan::ScaleFilter {
        min_side: Some(2),
        max_side: Some(4),
    };
    let r = statistics::evaluate(&g, &StatisticSpec::scan().with_filter(filter)).unwrap();
    let (v, arg) = common::argmax_by(&g, |r| {
        if r.lengths().iter().all(|&l| (2..=4).contains(&l)) {
            common::direct_psi(&g, r).abs()
        } else {
            f64::NEG_INFINITY
        }
    });
    assert!((r.value - v).abs() <= 1e-10);
    assert_eq!(r.argmax_rect, arg);
    assert_eq!(r.rect_count, 12 * 12);
}

#[test]
fn per_scale_max_reports_every_size_class() {
    let mut rng = Lcg(3);
    let g = random_grid(&mut rng, &[3, 4]);
    let r = statistics::evaluate(&g, &StatisticSpec::multiscale()).unwrap();
    let scales = r.per_scale_max.unwrap();
    assert_eq!(scales.len(), 12);
    for s in &scales {
        let best = common::all_rects(&[3, 4])
            .iter()
            .filter(|r| r.lengths() == s.lengths)
            .map(|r| common::direct_psi(&g, r).abs())
            .fold(0.0, f64::max);
        assert!((s.max_abs_psi - best).abs() <= 1e-10);
    }
}

#[test]
fn null_moments_of_a_fixed_rect() {
    let rect = Rect::new(vec![2, 3], vec![4, 7]);
    let reps = 10_000u64;
    let (mut s, mut ss) = (0.0, 0.0);
    for rep in 0..reps {
        let g = simulation::gaussian_grid(&[8, 8], RngSpec { seed: 99, stream: rep }).unwrap();
        let p = psi_hat_rect(&build_prefix(&g).unwrap(), &rect).unwrap();
        s += p;
        ss += p * p;
    }
    let mean = s / reps as f64;
    let var = ss / reps as f64 - mean * mean;
    assert!(mean.abs() <= 0.05, "mean {}", mean);
    assert!((var - 1.0).abs() <= 0.1, "var {}", var);
}

fn all_specs() -> Vec<StatisticSpec> {
    vec![
        StatisticSpec::multiscale(),
        StatisticSpec::multiscale_star(),
        StatisticSpec::scan(),
        StatisticSpec::alr(),
    ]
}

fn grid_strategy() -> impl Strategy<Value = GridField> {
    (1usize..=3, 1usize..=5, 1usize..=5).prop_flat_map(|(d, a, b)| {
        let dims: Vec<usize> = [a, b, 2][..d].to_vec();
        let n: usize = dims.iter().product();
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| GridField::new(dims.clone(), v).unwrap())
    })
}

fn square_strategy() -> impl Strategy<Value = GridField> {
    (1usize..=5).prop_flat_map(|m| {
        prop::collection::vec(-3.0f64..3.0, m * m).prop_map(move |v| GridField::new(vec![m, m], v).unwrap())
    })
}

/// Grids of small integers: every partial sum is exact, so symmetric
/// rearrangements must give bit-identical statistics.
fn integer_square_strategy() -> impl Strategy<Value = GridField> {
    (1usize..=5).prop_flat_map(|m| {
        prop::collection::vec(-20i32..20, m * m)
            .prop_map(move |v| GridField::new(vec![m, m], v.into_iter().map(f64::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_flip_is_exact(g in grid_strategy()) {
        let neg = g.negated();
        for spec in all_specs() {
            let a = statistics::evaluate(&g, &spec).unwrap();
            let b = statistics::evaluate(&neg, &spec).unwrap();
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn transpose_and_reversal_within_rounding(g in square_strategy()) {
        for spec in all_specs() {
            let v = statistics::evaluate(&g, &spec).unwrap().value;
            for h in [g.transposed().unwrap(), g.reversed_axis(0).unwrap(), g.reversed_axis(1).unwrap()] {
                let w = statistics::evaluate(&h, &spec).unwrap().value;
                prop_assert!((v - w).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn transpose_and_reversal_exact_on_integer_grids(g in integer_square_strategy()) {
        for spec in all_specs() {
            let v = statistics::evaluate(&g, &spec).unwrap().value;
            for h in [g.transposed().unwrap(), g.reversed_axis(0).unwrap(), g.reversed_axis(1).unwrap()] {
                let w = statistics::evaluate(&h, &spec).unwrap().value;
                if spec.kind == statistics::StatisticKind::Alr {
                    // the log-sum-exp accumulates in a different order
                    prop_assert!((v - w).abs() <= 1e-12 * (1.0 + v.abs()));
                } else {
                    prop_assert_eq!(v.to_bits(), w.to_bits());
                }
            }
        }
    }

    #[test]
    fn star_dominates_every_rect(g in grid_strategy(), pick in 0usize..1000) {
        let star = statistics::evaluate(&g, &StatisticSpec::multiscale_star()).unwrap().value;
        let rects = common::all_rects(g.dims());
        let r = &rects[pick % rects.len()];
        let frac = r.point_count() as f64 / g.len() as f64;
        prop_assert!(star + 1e-12 >= common::direct_psi(&g, r).abs() - common::gamma(frac));
    }

    #[test]
    fn mean_shift_moves_psi_by_c_sqrt_count(g in grid_strategy(), c in -2.0f64..2.0, pick in 0usize..1000) {
        let rects = common::all_rects(g.dims());
        let r = rects[pick % rects.len()].clone();
        let shifted = GridField::from_fn(g.dims(), |i| {
            g.get(i).unwrap() + if r.contains(i) { c } else { 0.0 }
        }).unwrap();
        let before = psi_hat_rect(&build_prefix(&g).unwrap(), &r).unwrap();
        let after = psi_hat_rect(&build_prefix(&shifted).unwrap(), &r).unwrap();
        let expect = c * (r.point_count() as f64).sqrt();
        prop_assert!((after - before - expect).abs() <= 1e-9);
    }

    #[test]
    fn evaluator_matches_single_calls(g in grid_strategy()) {
        let specs = all_specs();
        let ev = statistics::Evaluator::new(g.dims(), &specs).unwrap();
        let vals = ev.values(&g).unwrap();
        for (spec, v) in specs.iter().zip(vals) {
            prop_assert_eq!(statistics::evaluate(&g, spec).unwrap().value.to_bits(), v.to_bits());
        }
    }
}
