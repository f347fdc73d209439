mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use spdsl::alignment::AlignmentObjective;
use spdsl::manifold::{horizontal_project, riemannian_grad};
use spdsl::matfun::{dlog, spd_exp, spd_log};
use spdsl::pairgraph::build_graphs;
use spdsl::spd::{auto_beta, dist2, MetricKind, SpdMatrix};

fn metric() -> impl Strategy<Value = MetricKind> {
    prop_oneof![Just(MetricKind::Aim), Just(MetricKind::Stein), Just(MetricKind::Lem)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn log_and_exp_are_inverse(seed in any::<u64>(), n in 2usize..7) {
        let x = random_spd(n, &mut rng(seed));
        let back = spd_exp(&spd_log(x.matrix()).unwrap()).unwrap();
        prop_assert!(rel_err(&back, x.matrix()) < 1e-12);
    }

    #[test]
    fn dlog_is_linear(seed in any::<u64>(), n in 2usize..6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let x = random_spd(n, &mut r);
        let h1 = random_symmetric(n, &mut r);
        let h2 = random_symmetric(n, &mut r);
        let lhs = dlog(x.matrix(), &(&h1 * a + &h2 * b)).unwrap();
        let rhs = dlog(x.matrix(), &h1).unwrap() * a + dlog(x.matrix(), &h2).unwrap() * b;
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn distances_are_symmetric_and_nonnegative(seed in any::<u64>(), n in 2usize..6, m in metric()) {
        let mut r = rng(seed);
        let x = random_spd(n, &mut r);
        let y = random_spd(n, &mut r);
        let dxy = dist2(m, &x, &y).unwrap();
        let dyx = dist2(m, &y, &x).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - dyx).abs() <= 1e-10 * (1.0 + dxy));
        prop_assert_eq!(dist2(m, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn affine_invariance(seed in any::<u64>(), n in 2usize..6, stein in any::<bool>()) {
        let m = if stein { MetricKind::Stein } else { MetricKind::Aim };
        let mut r = rng(seed);
        let x = random_spd(n, &mut r);
        let y = random_spd(n, &mut r);
        let a = gaussian(n, n, &mut r) + DMatrix::identity(n, n) * 2.0;
        let d = dist2(m, &x, &y).unwrap();
        let moved = dist2(m, &x.congruence(&a).unwrap(), &y.congruence(&a).unwrap()).unwrap();
        prop_assert!((moved - d).abs() <= 1e-8 * d.max(1e-12));
    }

    #[test]
    fn lem_is_euclidean_in_log_domain(seed in any::<u64>(), n in 2usize..6) {
        let x = random_spd(n, &mut rng(seed));
        let l = spd_log(x.matrix()).unwrap();
        let d = dist2(MetricKind::Lem, &x, &SpdMatrix::identity(n)).unwrap();
        prop_assert!((d - l.norm_squared()).abs() <= 1e-10 * (1.0 + d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objective_is_constant_on_fibers(seed in any::<u64>(), m in metric()) {
        let mut r = rng(seed);
        let data = random_dataset(6, 2, 4, &mut r);
        let graphs = build_graphs(&data, m, 2, 2).unwrap();
        let beta = auto_beta(m, data.samples()).unwrap();
        let obj = AlignmentObjective::new(&data, &graphs, m, beta).unwrap();
        let w = random_transform(6, 3, &mut r);
        let o = random_orthogonal(3, &mut r);
        let j = obj.value(&w).unwrap();
        let jo = obj.value(&w.right_mul(&o).unwrap()).unwrap();
        prop_assert!((j - jo).abs() <= 1e-9 * (1.0 + j.abs()));
    }

    #[test]
    fn riemannian_gradient_is_horizontal(seed in any::<u64>(), m in metric()) {
        let mut r = rng(seed);
        let data = random_dataset(6, 2, 4, &mut r);
        let graphs = build_graphs(&data, m, 2, 2).unwrap();
        let beta = auto_beta(m, data.samples()).unwrap();
        let obj = AlignmentObjective::new(&data, &graphs, m, beta).unwrap();
        let w = random_transform(6, 3, &mut r);
        let egrad = obj.gradient(&obj.evaluate(&w).unwrap()).unwrap();
        let g = riemannian_grad(&w, &egrad).unwrap();
        for _ in 0..3 {
            let v = w.matrix() * skew(3, &mut r);
            prop_assert!(g.inner(&v).abs() <= 1e-9 * g.norm().max(1e-300) * v.norm());
        }
        let p = horizontal_project(&w, &egrad).unwrap();
        prop_assert!(p.is_horizontal(1e-9));
    }
}
