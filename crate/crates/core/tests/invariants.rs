use hcthin_core::estimators::{
    estimate_cover_covariance, estimate_pair_correlation, estimate_volume_fraction, CoverIndex,
};
use hcthin_core::{
    obstructs, sample_boolean, thin, thin_bruteforce, BooleanSample, Dim, Grain, RadiusLaw,
    WeightKernel, Window,
};
use proptest::prelude::*;

const KERNELS: [WeightKernel; 4] = [
    WeightKernel::IsolatedRetained,
    WeightKernel::RandomRetained,
    WeightKernel::LargeRetained,
    WeightKernel::SmallRetained,
];

fn sample_from(d: u32, raw: &[(f64, f64, f64, f64)], kernel: WeightKernel) -> BooleanSample {
    let window = Window::cube(Dim::new(d).unwrap(), 20.0, 0.0).unwrap();
    let grains = raw
        .iter()
        .map(|&(x, y, r, u)| {
            let center = [x, y, 0.0];
            let w = match kernel {
                WeightKernel::IsolatedRetained => 1.0,
                WeightKernel::RandomRetained => u,
                WeightKernel::LargeRetained => r,
                WeightKernel::SmallRetained => 1.0 / r,
            };
            Grain::new(&center[..d as usize], r, w)
        })
        .collect();
    BooleanSample {
        grains,
        window,
        lambda: 1.0,
        kernel,
        seed: 0,
        replication: 0,
        bias_bound: 0.0,
    }
}

fn grains() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec(
        (
            0.0..20.0f64,
            0.0..20.0f64,
            // A few radii far above the rest exercise the overflow path.
            prop_oneof![4 => 0.1..2.0f64, 1 => 5.0..15.0f64],
            0.0..1.0f64,
        ),
        0..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_thinning_matches_bruteforce(raw in grains(), d in 1u32..=2, k in 0usize..4) {
        let s = sample_from(d, &raw, KERNELS[k]);
        prop_assert_eq!(thin(&s).mask, thin_bruteforce(&s).mask);
    }

    #[test]
    fn survivors_are_unobstructed_and_disjoint(raw in grains(), k in 0usize..4) {
        let s = sample_from(2, &raw, KERNELS[k]);
        let t = thin(&s);
        for (i, a) in t.retained.iter().enumerate() {
            for b in &t.retained[i + 1..] {
                prop_assert!(!a.touches(b));
            }
        }
        for (i, g) in s.grains.iter().enumerate() {
            let blocked = s.grains.iter().enumerate().any(|(j, h)| j != i && obstructs(h, g));
            prop_assert_eq!(t.mask[i], !blocked);
        }
    }

    #[test]
    fn isolated_survivors_survive_every_kernel(raw in grains(), k in 0usize..4) {
        let iso = thin(&sample_from(2, &raw, WeightKernel::IsolatedRetained)).mask;
        let other = thin(&sample_from(2, &raw, KERNELS[k])).mask;
        for (a, b) in iso.iter().zip(&other) {
            prop_assert!(!a || *b);
        }
    }

    #[test]
    fn cover_index_agrees_with_direct_test(
        raw in grains(),
        probes in prop::collection::vec((0.0..20.0f64, 0.0..20.0f64), 50),
    ) {
        let s = sample_from(2, &raw, WeightKernel::RandomRetained);
        let index = CoverIndex::new(&s.grains, &s.window);
        for (x, y) in probes {
            let direct = s.grains.iter().any(|g| {
                (g.center[0] - x).powi(2) + (g.center[1] - y).powi(2) <= g.radius * g.radius
            });
            prop_assert_eq!(index.covered(&[x, y]), direct);
        }
    }
}

#[test]
fn sampling_is_a_function_of_seed_and_replication() {
    let law = RadiusLaw::pareto(2.5, 1.0).unwrap();
    let w = Window::cube(Dim::new(2).unwrap(), 50.0, 10.0).unwrap();
    let k = WeightKernel::RandomRetained;
    let a = sample_boolean(0.05, &law, k, &w, 9, 3).unwrap();
    let b = sample_boolean(0.05, &law, k, &w, 9, 3).unwrap();
    let c = sample_boolean(0.05, &law, k, &w, 9, 4).unwrap();
    assert_eq!(a.grains, b.grains);
    assert_ne!(a.grains, c.grains);
    assert_eq!(thin(&a).mask, thin(&b).mask);
}

fn matern(reps: u64) -> Vec<BooleanSample> {
    let law = RadiusLaw::deterministic(1.0).unwrap();
    let w = Window::cube(Dim::new(2).unwrap(), 80.0, 2.0).unwrap();
    (0..reps)
        .map(|rep| sample_boolean(0.05, &law, WeightKernel::IsolatedRetained, &w, 17, rep).unwrap())
        .collect()
}

#[test]
fn unit_discs_decorrelate_beyond_their_diameter() {
    let samples = matern(20);
    let k = estimate_cover_covariance(&samples, &[3.0], 4096, 5).unwrap();
    let m = k.at(0);
    assert!(m.z_score(0.0).abs() < 4.0, "{} ± {}", m.mean, m.stderr);
    let p = estimate_volume_fraction(&samples, 64, 5).unwrap();
    let exact = 1.0 - (-0.05 * std::f64::consts::PI).exp();
    assert!(p.z_score(exact).abs() < 4.0, "{} ± {}", p.mean, p.stderr);
}

#[test]
fn matern_survivors_never_pair_below_the_hard_core() {
    let thinned: Vec<_> = matern(10).iter().map(thin).collect();
    let xi = estimate_pair_correlation(&thinned, &[0.5, 1.0, 1.5], 0.25).unwrap();
    for j in 0..3 {
        assert_eq!(xi.at(j).mean, -1.0);
    }
}
