use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imaxent::geometry::{exact_moments, marginal_density_exact_with_limit, PermutohedronSpec};
use imaxent::gof::{anderson_darling, cvm_beta, neyman_statistic, CvMWeight, TransformedPits};
use imaxent::kernel::{
    gaussian_var_v1, loo_pits, loo_pits_fast, loo_pits_via_kdfe, pit_affine_representation, pits_from_affine,
};
use imaxent::reference::{build_reference_with_limit, UniformSampler};
use imaxent::select::m2_gaussian_bandwidth_for_moment;
use imaxent::{Kernel, Sample};

/// Facet description of `Pi_n`: on the plane, every subset sum is at least the
/// sum of that many smallest generator entries.
fn in_permutohedron_by_facets(point: &[f64], tol: f64) -> bool {
    let n = point.len();
    let step = 1.0 / (n - 1) as f64;
    let total: f64 = point.iter().sum();
    if (total - n as f64 / 2.0).abs() > tol {
        return false;
    }
    for mask in 1u32..(1 << n) - 1 {
        let size = mask.count_ones() as usize;
        let floor: f64 = (0..size).map(|i| i as f64 * step).sum();
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| point[i]).sum();
        if s < floor - tol {
            return false;
        }
    }
    true
}

fn sample_strategy(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..=max_n)
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Gaussian), Just(Kernel::Epanechnikov)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pits_sum_to_half_n_and_stay_in_support(
        x in sample_strategy(40),
        log_b in -4.0f64..2.0,
        kernel in kernel_strategy(),
    ) {
        let sample = Sample::new(x).unwrap();
        let n = sample.len();
        let pits = loo_pits(&sample, 10f64.powf(log_b), kernel).unwrap();
        let sum: f64 = pits.v.iter().sum();
        prop_assert!((sum - n as f64 / 2.0).abs() <= 1e-10 * n as f64);
        let spec = PermutohedronSpec::new(n).unwrap();
        prop_assert!(spec.contains(&pits.v, spec.default_tol()).unwrap());
    }

    #[test]
    fn pit_routes_agree(
        x in sample_strategy(30),
        log_b in -3.0f64..1.5,
        kernel in kernel_strategy(),
    ) {
        let sample = Sample::new(x).unwrap();
        let b = 10f64.powf(log_b);
        let direct = loo_pits(&sample, b, kernel).unwrap();
        let fast = loo_pits_fast(&sample, b, kernel).unwrap();
        let via = loo_pits_via_kdfe(&sample, b, kernel).unwrap();
        let affine = pits_from_affine(&pit_affine_representation(&sample, b, kernel).unwrap());
        for i in 0..sample.len() {
            prop_assert!((direct.v[i] - fast.v[i]).abs() < 1e-12);
            prop_assert!((direct.v[i] - via.v[i]).abs() < 1e-12);
            prop_assert!((direct.v[i] - affine[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn majorization_matches_facets(
        raw in prop::collection::vec(0.0f64..1.0, 2..=7),
        shrink in 0.0f64..1.2,
    ) {
        // Pull a random point on the plane toward the centre by `shrink`.
        let n = raw.len();
        let mean: f64 = raw.iter().sum::<f64>() / n as f64;
        let point: Vec<f64> = raw.iter().map(|v| 0.5 + shrink * (v - mean)).collect();
        let spec = PermutohedronSpec::new(n).unwrap();
        let tol = 1e-12;
        let sorting = spec.contains(&point, tol).unwrap();
        let facets = in_permutohedron_by_facets(&point, tol);
        prop_assert_eq!(sorting, facets);
    }

    #[test]
    fn prefilter_never_drops_members(
        raw in prop::collection::vec(0.0f64..1.0, 2..=60),
        shrink in 0.0f64..1.5,
    ) {
        let n = raw.len();
        let mean: f64 = raw.iter().sum::<f64>() / n as f64;
        let point: Vec<f64> = raw.iter().map(|v| 0.5 + shrink * (v - mean)).collect();
        let sampler = UniformSampler::new(n).unwrap();
        if sampler.majorized(&point) {
            prop_assert!(sampler.prefilter(&point));
        }
    }

    #[test]
    fn neyman_is_order_free_and_nested(
        mut u in prop::collection::vec(0.0f64..=1.0, 1..50),
        seed in any::<u64>(),
    ) {
        let a = neyman_statistic(&TransformedPits::new(u.clone()).unwrap(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..u.len()).rev() {
            u.swap(i, rng.random_range(0..=i));
        }
        let t = TransformedPits::new(u).unwrap();
        prop_assert_eq!(a, neyman_statistic(&t, 4).unwrap());
        let s2 = neyman_statistic(&t, 2).unwrap();
        prop_assert!(a >= s2 - 1e-12);
    }

    #[test]
    fn cvm_nonnegative_and_ad_is_alpha_limit(
        u in prop::collection::vec(0.01f64..0.99, 1..40),
    ) {
        let t = TransformedPits::new(u).unwrap();
        let eps = 0.01;
        let ad = anderson_darling(&t, eps).unwrap();
        prop_assert!(ad >= 0.0);
        let near = cvm_beta(&t, &CvMWeight::symmetric(1e-6, eps).unwrap()).unwrap();
        prop_assert!((near - ad).abs() <= 1e-4 * ad.max(1e-3));
    }
}

#[test]
fn uniform_pair_draws_are_uniform_segment() {
    let mut sampler = UniformSampler::new(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out = Vec::new();
    let mut t: Vec<f64> = (0..4000)
        .map(|_| {
            sampler.sample_into(&mut rng, &mut out);
            assert!((out[0] + out[1] - 1.0).abs() < 1e-15);
            out[0]
        })
        .collect();
    assert_eq!(sampler.acceptance_rate(), 1.0);
    t.sort_by(f64::total_cmp);
    let m = t.len() as f64;
    let ks = t
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / m).abs().max(((i + 1) as f64 / m - v).abs()))
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov-Smirnov statistic.
    assert!(ks < 1.63 / m.sqrt(), "KS = {ks}");
}

#[test]
fn acceptance_rate_scales_inversely_with_n() {
    let rate = |n: usize| {
        let mut sampler = UniformSampler::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut out = Vec::new();
        for _ in 0..400 {
            sampler.sample_into(&mut rng, &mut out);
        }
        sampler.acceptance_rate()
    };
    let r50 = rate(50);
    let r100 = rate(100);
    let predicted = r50 * 0.5;
    assert!(r100 > predicted / 3.0 && r100 < predicted * 3.0, "{r50} {r100}");
}

#[test]
fn uniform_coordinates_have_exchangeable_correlation() {
    let n = 6;
    let mut sampler = UniformSampler::new(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut out = Vec::new();
    let reps = 40_000;
    let (mut s00, mut s01) = (0.0, 0.0);
    for _ in 0..reps {
        sampler.sample_into(&mut rng, &mut out);
        s00 += (out[0] - 0.5).powi(2);
        s01 += (out[0] - 0.5) * (out[1] - 0.5);
    }
    let corr = s01 / s00;
    let want = -1.0 / (n - 1) as f64;
    assert!((corr - want).abs() < 0.02, "{corr} vs {want}");
}

#[test]
fn simulated_reference_matches_exact_moments() {
    let n = 10;
    let exact = marginal_density_exact_with_limit(n, 12).unwrap();
    let m = exact_moments(&exact, &[2, 4]).unwrap();
    let sim = build_reference_with_limit(n, 60_000, 200, 17, 9).unwrap();
    assert!(matches!(sim.source, imaxent::ReferenceSource::Simulated { .. }));
    for (k, order) in [2usize, 4].iter().enumerate() {
        let got = sim.moment(*order).unwrap();
        let se = sim.moment_std_errors[order - 2];
        assert!((got - m[k]).abs() < 4.0 * se, "order {order}: {got} vs {} (se {se})", m[k]);
    }
    // The simulated CDF tracks the exact one.
    for (u, c) in sim.grid.iter().zip(&sim.cdf_values) {
        assert!((c - exact.cdf(*u)).abs() < 0.01);
    }
}

#[test]
fn gaussian_variance_decreases_and_m2_root_inverts_it() {
    for n in [5usize, 30, 300] {
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let b = 10f64.powf(-3.0 + i as f64 * 0.1);
            let v = gaussian_var_v1(n, b).unwrap();
            assert!(v < prev);
            prev = v;
        }
        // Roughly the reference second moment for this n.
        let m2 = 1.0 / 12.0 - 0.0974 * (n as f64).powf(-0.4944);
        let b = m2_gaussian_bandwidth_for_moment(n, m2).unwrap();
        assert!((gaussian_var_v1(n, b).unwrap() - m2).abs() < 1e-10);
    }
    let b = |n: usize| m2_gaussian_bandwidth_for_moment(n, 1.0 / 12.0 - 0.0974 * (n as f64).powf(-0.4944)).unwrap();
    assert!(b(100) > b(1000) && b(1000) > b(10_000));
}
