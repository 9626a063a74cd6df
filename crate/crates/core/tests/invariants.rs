use chaoscert::certificates::gaussian_pair_bound;
use chaoscert::chaos::{eval_multiple_integral, exact_covariance, hermite, GaussianSample};
use chaoscert::corpus::random_kernel;
use chaoscert::io::{ExpansionFile, Symmetry};
use chaoscert::mc::shard_rng;
use chaoscert::operator::{OperatorMatrix, Schatten, Truncation};
use chaoscert::tensor::{contract, factorial, symmetrize, ChaosExpansion, RawTensor, ScalarKernel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn raw_tensor() -> impl Strategy<Value = RawTensor> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(p, d)| {
        prop::collection::vec(-2.0f64..2.0, d.pow(p as u32))
            .prop_map(move |data| RawTensor::from_dense(p, d, &data).unwrap())
    })
}

fn sym_pair() -> impl Strategy<Value = (ScalarKernel, ScalarKernel)> {
    (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(p, q, d)| {
        (
            prop::collection::vec(-2.0f64..2.0, d.pow(p as u32)),
            prop::collection::vec(-2.0f64..2.0, d.pow(q as u32)),
        )
            .prop_map(move |(a, b)| {
                (
                    symmetrize(&RawTensor::from_dense(p, d, &a).unwrap()),
                    symmetrize(&RawTensor::from_dense(q, d, &b).unwrap()),
                )
            })
    })
}

fn square(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim * dim).prop_map(move |v| DMatrix::from_row_slice(dim, dim, &v))
}

fn psd(dim: usize) -> impl Strategy<Value = OperatorMatrix> {
    square(dim).prop_map(|a| OperatorMatrix::new_symmetric(&a * a.transpose()).unwrap())
}

fn expansion() -> impl Strategy<Value = ChaosExpansion> {
    (any::<u64>(), 1usize..=3, 1usize..=3, prop::collection::btree_set(1usize..=3, 1..=3)).prop_map(
        |(seed, d, m, orders)| {
            let mut rng = shard_rng(seed, 0);
            let ks = orders.into_iter().map(|p| random_kernel(p, d, m, &mut rng).unwrap());
            ChaosExpansion::from_kernels(Truncation::new(d, m).unwrap(), ks).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetrization_is_an_orthogonal_projection(raw in raw_tensor()) {
        let s = symmetrize(&raw);
        let again = symmetrize(&s.to_raw());
        prop_assert!((again.norm_sq() - s.norm_sq()).abs() < 1e-10);
        prop_assert!(again.axpy(-1.0, &s).unwrap().norm() < 1e-10);
        prop_assert!(s.norm() <= raw.norm() + 1e-10);
        // the residual is orthogonal to the symmetric part
        prop_assert!((raw.inner(&s.to_raw()) - s.norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn contraction_norm_is_symmetric((f, g) in sym_pair()) {
        for r in 0..=f.order().min(g.order()) {
            let fg = contract(&f, &g, r).unwrap().norm();
            let gf = contract(&g, &f, r).unwrap().norm();
            prop_assert!((fg - gf).abs() <= 1e-9 * (1.0 + fg));
            prop_assert!(fg <= f.norm() * g.norm() * (1.0 + 1e-12) + 1e-12);
        }
        let full = contract(&f, &f, f.order()).unwrap();
        prop_assert!((full.as_scalar().unwrap() - f.norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn inner_product_is_bilinear((f, g) in sym_pair(), c in -3.0f64..3.0) {
        prop_assume!(f.order() == g.order());
        let h = f.axpy(c, &g).unwrap();
        let lhs = h.norm_sq();
        let rhs = f.norm_sq() + 2.0 * c * f.inner(&g) + c * c * g.norm_sq();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs));
        prop_assert!(f.inner(&g).abs() <= f.norm() * g.norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn basis_products_are_hermite_products(idx in prop::collection::vec(0u32..3, 1..=4), xs in prop::collection::vec(-3.0f64..3.0, 3)) {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        let g = ScalarKernel::basis_product(3, &sorted).unwrap();
        let got = eval_multiple_integral(&g, &GaussianSample::new(xs.clone())).unwrap();
        let want: f64 = (0..3u32).map(|j| hermite(sorted.iter().filter(|&&k| k == j).count(), xs[j as usize])).product();
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn covariance_is_psd_with_isometric_trace(f in expansion()) {
        let c = exact_covariance(&f);
        prop_assert!(c.is_symmetric());
        prop_assert!(c.min_eigenvalue() >= -1e-10);
        let want: f64 = f.kernels().map(|(r, k)| factorial(r) * k.norm_sq()).sum();
        prop_assert!((c.trace() - want).abs() <= 1e-9 * (1.0 + want));
    }

    #[test]
    fn expansion_file_round_trip(f in expansion()) {
        let file = ExpansionFile::from_expansion(&f);
        let text = serde_json::to_string(&file).unwrap();
        let back: ExpansionFile = serde_json::from_str(&text).unwrap();
        let g = back.to_expansion(Symmetry::Strict).unwrap();
        prop_assert_eq!(f.orders(), g.orders());
        for (r, k) in f.kernels() {
            prop_assert!(k.axpy(-1.0, g.kernel(r).unwrap()).unwrap().norm_sq() < 1e-20);
        }
    }

    #[test]
    fn schatten_norms_are_ordered_and_unitarily_invariant(a in square(4), perm in Just([2usize, 0, 3, 1])) {
        let t = OperatorMatrix::new(a).unwrap();
        let ps = [Schatten::P(1.0), Schatten::P(1.5), Schatten::P(2.0), Schatten::P(4.0), Schatten::Inf];
        let norms: Vec<f64> = ps.iter().map(|&p| t.schatten_norm(p)).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14));
        let frob = t.matrix().norm();
        prop_assert!((norms[2] - frob).abs() <= 1e-10 * (1.0 + frob));
        let u = DMatrix::from_fn(4, 4, |r, c| if r == perm[c] { 1.0 } else { 0.0 });
        let ut = t.conjugate(&u).unwrap();
        for (&p, &n) in ps.iter().zip(&norms) {
            prop_assert!((ut.schatten_norm(p) - n).abs() <= 1e-10 * (1.0 + n));
        }
    }

    #[test]
    fn schatten_triangle_inequality(a in square(3), b in square(3), p in 1.0f64..6.0) {
        let (a, b) = (OperatorMatrix::new(a).unwrap(), OperatorMatrix::new(b).unwrap());
        let sp = Schatten::P(p);
        let lhs = a.add(&b).unwrap().schatten_norm(sp);
        prop_assert!(lhs <= a.schatten_norm(sp) + b.schatten_norm(sp) + 1e-10);
    }

    #[test]
    fn trace_norm_of_psd_is_trace(t in psd(4)) {
        prop_assert!((t.trace_norm() - t.trace()).abs() <= 1e-10 * (1.0 + t.trace()));
    }

    #[test]
    fn pair_bound_is_a_symmetric_semimetric(t1 in psd(3), t2 in psd(3), t3 in psd(3)) {
        let d = |a: &OperatorMatrix, b: &OperatorMatrix| gaussian_pair_bound(a, b).unwrap().value;
        prop_assert!(d(&t1, &t1).abs() < 1e-12);
        prop_assert!((d(&t1, &t2) - d(&t2, &t1)).abs() < 1e-12);
        prop_assert!(d(&t1, &t3) <= d(&t1, &t2) + d(&t2, &t3) + 1e-10);
    }
}
