use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use starbody::density::{sample_density_seeded, DensitySpec, SampleSet};
use starbody::geometry::{self, StarBody};
use starbody::io;
use starbody::learn::{fit, inner_radius, FitConfig};
use starbody::random::{random_ellipsoid, random_radial_body, random_rotation, random_well_conditioned};
use starbody::SphericalGrid;

fn grid() -> &'static Arc<SphericalGrid> {
    static G: OnceLock<Arc<SphericalGrid>> = OnceLock::new();
    G.get_or_init(|| Arc::new(SphericalGrid::uniform2d(720).unwrap()))
}

fn body(seed: u64) -> StarBody {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    match seed % 4 {
        0 => random_radial_body(grid(), 0.5, &mut r),
        1 => random_ellipsoid(2, 0.3, 2.0, &mut r),
        2 => random_well_conditioned(2, 0.4, &mut r),
        _ => StarBody::union(vec![random_ellipsoid(2, 0.3, 1.5, &mut r).unwrap(), StarBody::l1_ball(2).unwrap()]),
    }
    .unwrap()
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_filter("nonzero", |(a, b)| a.hypot(*b) > 1e-3).prop_map(|(a, b)| [a, b])
}

fn gaussian_samples(m: usize, seed: u64) -> SampleSet {
    let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.7]);
    sample_density_seeded(&DensitySpec::centered_gaussian(c).unwrap(), m, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_is_positively_homogeneous(seed in 0u64..10_000, x in point(), t in 0.01..50.0f64) {
        let k = body(seed);
        let g = k.gauge(&x).unwrap();
        let gt = k.gauge(&[t * x[0], t * x[1]]).unwrap();
        prop_assert!((gt - t * g).abs() <= 1e-9 * gt.max(1.0));
    }

    #[test]
    fn boundary_points_have_unit_gauge(seed in 0u64..10_000, th in 0.0..std::f64::consts::TAU) {
        let k = body(seed);
        let u = [th.cos(), th.sin()];
        let r = k.radial(&u).unwrap();
        prop_assert!((k.gauge(&[r * u[0], r * u[1]]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dilation_scales_volume_and_gauge(seed in 0u64..10_000, t in 0.2..5.0f64, x in point()) {
        let k = body(seed);
        let tk = geometry::dilate(&k, t).unwrap();
        let v = geometry::volume(&k, grid()).unwrap();
        prop_assert!((geometry::volume(&tk, grid()).unwrap() - t * t * v).abs() <= 1e-10 * t * t * v);
        prop_assert!((tk.gauge(&x).unwrap() - k.gauge(&x).unwrap() / t).abs() <= 1e-10 * k.gauge(&x).unwrap());
    }

    #[test]
    fn lutwak_inequality_holds(a in 0u64..10_000, b in 0u64..10_000) {
        let (k, l) = (body(a), body(b));
        let v = geometry::dual_mixed_volume(&k, &l, -1.0, grid()).unwrap();
        let vk = geometry::volume(&k, grid()).unwrap();
        let vl = geometry::volume(&l, grid()).unwrap();
        prop_assert!(v * v * vk >= vl.powi(3) * (1.0 - 1e-12));
    }

    #[test]
    fn union_gauge_is_the_minimum(a in 0u64..10_000, b in 0u64..10_000, x in point()) {
        let (k, l) = (body(a), body(b));
        let u = StarBody::union(vec![k.clone(), l.clone()]).unwrap();
        let expect = k.gauge(&x).unwrap().min(l.gauge(&x).unwrap());
        prop_assert!((u.gauge(&x).unwrap() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn radial_distance_is_a_metric(a in 0u64..10_000, b in 0u64..10_000, c in 0u64..10_000) {
        let (k, l, m) = (body(a), body(b), body(c));
        let d = |p: &StarBody, q: &StarBody| geometry::radial_distance(p, q, grid()).unwrap();
        prop_assert_eq!(d(&k, &k), 0.0);
        prop_assert_eq!(d(&k, &l), d(&l, &k));
        prop_assert!(d(&k, &m) <= d(&k, &l) + d(&l, &m) + 1e-12);
    }

    #[test]
    fn l1_gauge_is_the_l1_norm(x in prop::collection::vec(-10.0..10.0f64, 3)) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        let g = StarBody::l1_ball(3).unwrap().gauge(&x).unwrap();
        let n: f64 = x.iter().map(|v| v.abs()).sum();
        prop_assert!((g - n).abs() <= 1e-9 * n);
    }

    #[test]
    fn body_json_round_trips(seed in 0u64..10_000, x in point()) {
        let k = body(seed);
        let back = io::body_from_json(&serde_json::from_str(&io::json_text(&io::body_to_json(&k))).unwrap()).unwrap();
        prop_assert_eq!(back.gauge(&x).unwrap(), k.gauge(&x).unwrap());
    }

    /// `|F(K) - F(L)| ≤ E‖x‖ δ(K,L) / r²` for bodies containing `r·B²`.
    #[test]
    fn population_risk_is_radially_lipschitz(a in 0u64..10_000, b in 0u64..10_000) {
        let r = 0.4;
        let mut ra = ChaCha8Rng::seed_from_u64(a);
        let mut rb = ChaCha8Rng::seed_from_u64(b.wrapping_add(1 << 32));
        let k = random_well_conditioned(2, r, &mut ra).unwrap();
        let l = random_well_conditioned(2, r, &mut rb).unwrap();
        let x = gaussian_samples(500, a ^ b);
        let risk = |q: &StarBody| x.rows().map(|p| q.gauge(p).unwrap()).sum::<f64>() / x.len() as f64;
        let delta = geometry::radial_distance(&k, &l, grid()).unwrap();
        // the grid distance can miss the sup between nodes by O(h²)
        prop_assert!((risk(&k) - risk(&l)).abs() <= x.mean_norm() * delta / (r * r) * (1.0 + 1e-3) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fit_traces_never_increase(seed in 0u64..1000, family in 0usize..3) {
        let x = gaussian_samples(300, seed);
        let cfg = match family {
            0 => FitConfig::ellipsoid(),
            1 => FitConfig::dictionary(3),
            _ => FitConfig::union_ellipsoids(2),
        };
        let rep = fit(&x, &FitConfig { seed, max_iters: 60, ..cfg }).unwrap();
        prop_assert!(rep.trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!((rep.trace.last().unwrap() - rep.empirical_risk).abs() <= 1e-9 * rep.empirical_risk);
    }

    #[test]
    fn fitted_ellipsoids_respect_the_axis_floor(seed in 0u64..1000, floor in 0.05..0.5f64) {
        // nearly degenerate data pushes one axis toward zero; unit area caps the floor at π^{-1/2}
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-4]);
        let x = sample_density_seeded(&DensitySpec::centered_gaussian(c).unwrap(), 400, seed).unwrap();
        let rep = fit(&x, &FitConfig { seed, inner_width_floor: floor, ..FitConfig::ellipsoid() }).unwrap();
        let StarBody::Ellipsoid(e) = &rep.body else { panic!("ellipsoid family") };
        prop_assert!(e.semi_axes().iter().all(|a| *a >= floor * (1.0 - 1e-9)), "{:?} vs {floor}", e.semi_axes());
    }

    #[test]
    fn ellipsoid_fit_is_rotation_equivariant(seed in 0u64..1000) {
        let x = gaussian_samples(400, seed);
        let q = random_rotation(2, &mut ChaCha8Rng::seed_from_u64(seed));
        let qx = x.transformed(&q).unwrap();
        let a = fit(&x, &FitConfig { seed, ..FitConfig::ellipsoid() }).unwrap();
        let b = fit(&qx, &FitConfig { seed, ..FitConfig::ellipsoid() }).unwrap();
        prop_assert!((a.empirical_risk - b.empirical_risk).abs() <= 1e-6 * a.empirical_risk);
        for p in x.rows().take(20) {
            let v = &q * nalgebra::DVector::from_column_slice(p);
            prop_assert!((a.body.gauge(p).unwrap() - b.body.gauge(v.as_slice()).unwrap()).abs() <= 1e-5);
        }
    }

    /// `z = A⁺x` has `‖z‖₁ ≤ √p‖x‖/η` with `η` the smallest singular value,
    /// so the inner radius is at least `η/√p`.
    #[test]
    fn dictionary_inner_radius_dominates_the_singular_value_bound(seed in 0u64..10_000, p in 2usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<f64> = (0..p).flat_map(|_| starbody::optimizer::random_unit(2, &mut r)).collect();
        let a = DMatrix::from_column_slice(2, p, &cols);
        let eta = a.clone().svd(false, false).singular_values.min();
        let g = SphericalGrid::uniform2d(2048).unwrap();
        prop_assert!(inner_radius(&a, &g) >= eta / (p as f64).sqrt() - 1e-9);
    }
}
