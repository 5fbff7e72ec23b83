use hadalg::generate::{random_cp, random_tt, separated_cp};
use hadalg::io::{Encoding, TensorData, TensorFile};
use hadalg::iteration::StoppingRule;
use hadalg::postproc::{hadamard_sign, SignMethod};
use hadalg::{AlgebraElement, CpTensor, DenseTensor, MultiIndex, Shape, TruncationPolicy, TtTensor};
use num_bigint::BigUint;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Shape> {
    prop::collection::vec(1usize..=4, 1..=4).prop_map(|m| Shape::new(m).unwrap())
}

fn cp_pair() -> impl Strategy<Value = (CpTensor, CpTensor)> {
    (shape(), 1usize..=3, 1usize..=3, any::<u64>()).prop_map(|(s, ru, rv, seed)| {
        let u = random_cp(&s, ru, seed).unwrap();
        let v = random_cp(&s, rv, seed.wrapping_add(1)).unwrap();
        (u, v)
    })
}

fn tt_pair() -> impl Strategy<Value = (TtTensor, TtTensor)> {
    (shape(), 1usize..=3, 1usize..=3, any::<u64>()).prop_map(|(s, ru, rv, seed)| {
        let u = random_tt(&s, ru, seed).unwrap();
        let v = random_tt(&s, rv, seed.wrapping_add(1)).unwrap();
        (u, v)
    })
}

fn close(a: &DenseTensor, b: &DenseTensor, tol: f64) -> bool {
    let scale = a.sup_norm().max(b.sup_norm()).max(f64::MIN_POSITIVE);
    a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn zip_dense(a: &DenseTensor, b: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> DenseTensor {
    let v = a.values().iter().zip(b.values()).map(|(x, y)| f(*x, *y)).collect();
    DenseTensor::from_vec(a.shape().clone(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cp_ranks_add_and_multiply((u, v) in cp_pair()) {
        prop_assert_eq!(u.add(&v).unwrap().rank(), u.rank() + v.rank());
        prop_assert_eq!(u.hadamard(&v).unwrap().rank(), u.rank() * v.rank());
        prop_assert_eq!(u.scale(-2.5).rank(), u.rank());
    }

    #[test]
    fn tt_ranks_add_and_multiply((u, v) in tt_pair()) {
        let (ru, rv) = (u.ranks(), v.ranks());
        let sum = u.add(&v).unwrap().ranks();
        let prod = u.hadamard(&v).unwrap().ranks();
        for k in 1..ru.len() - 1 {
            prop_assert_eq!(sum[k], ru[k] + rv[k]);
            prop_assert_eq!(prod[k], ru[k] * rv[k]);
        }
        prop_assert_eq!(sum[0], 1);
        prop_assert_eq!(*prod.last().unwrap(), 1);
    }

    #[test]
    fn cp_ops_match_dense((u, v) in cp_pair()) {
        let (du, dv) = (u.to_dense().unwrap(), v.to_dense().unwrap());
        prop_assert!(close(&u.add(&v).unwrap().to_dense().unwrap(), &zip_dense(&du, &dv, |x, y| x + y), 1e-12));
        prop_assert!(close(&u.hadamard(&v).unwrap().to_dense().unwrap(), &zip_dense(&du, &dv, |x, y| x * y), 1e-12));
        let ip: f64 = du.values().iter().zip(dv.values()).map(|(x, y)| x * y).sum();
        prop_assert!((u.inner(&v).unwrap() - ip).abs() <= 1e-12 * (du.norm() * dv.norm()).max(1e-300));
    }

    #[test]
    fn tt_ops_match_dense((u, v) in tt_pair()) {
        let (du, dv) = (u.to_dense().unwrap(), v.to_dense().unwrap());
        prop_assert!(close(&u.add(&v).unwrap().to_dense().unwrap(), &zip_dense(&du, &dv, |x, y| x + y), 1e-12));
        prop_assert!(close(&u.hadamard(&v).unwrap().to_dense().unwrap(), &zip_dense(&du, &dv, |x, y| x * y), 1e-12));
    }

    #[test]
    fn hadamard_commutes_and_unit_is_neutral((u, v) in tt_pair()) {
        let uv = u.hadamard(&v).unwrap().to_dense().unwrap();
        let vu = v.hadamard(&u).unwrap().to_dense().unwrap();
        prop_assert!(close(&uv, &vu, 1e-13));
        let one = TtTensor::unit(u.shape());
        prop_assert!(close(&u.hadamard(&one).unwrap().to_dense().unwrap(), &u.to_dense().unwrap(), 1e-13));
        prop_assert!((u.inner(&v).unwrap() - v.inner(&u).unwrap()).abs() <= 1e-12 * u.norm() * v.norm());
    }

    #[test]
    fn entries_match_dense((u, _) in cp_pair(), pick in any::<prop::sample::Index>()) {
        let d = u.to_dense().unwrap();
        let m = u.shape().multi_index(pick.index(d.len()));
        let lin = u.shape().linear_index(&m).unwrap();
        prop_assert!((u.entry(&m).unwrap() - d.values()[lin]).abs() <= 1e-13 * d.sup_norm().max(1e-300));
        let t = TtTensor::from_cp(&u);
        prop_assert!((t.entry(&m).unwrap() - d.values()[lin]).abs() <= 1e-13 * d.sup_norm().max(1e-300));
    }

    #[test]
    fn from_cp_preserves_values((u, _) in cp_pair()) {
        let t = TtTensor::from_cp(&u);
        prop_assert!(close(&t.to_dense().unwrap(), &u.to_dense().unwrap(), 1e-13));
        prop_assert!(t.ranks().iter().all(|&r| r <= u.rank()));
    }

    #[test]
    fn truncation_contracts((u, v) in tt_pair(), k in 0usize..3) {
        let eps = [1e-1, 1e-3, 1e-6][k];
        let w = u.hadamard(&v).unwrap();
        let t = w.truncate(&TruncationPolicy::new(eps, 1).unwrap()).unwrap();
        prop_assert!(!t.tolerance_miss);
        let err = w.distance(&t.value).unwrap();
        prop_assert!(err <= eps * w.norm() * (1.0 + 1e-12) + 1e-300, "{} > {}", err, eps * w.norm());
    }

    #[test]
    fn exact_truncation_keeps_values((u, v) in cp_pair()) {
        let w = u.add(&v).unwrap();
        let t = w.truncate(&TruncationPolicy::new(0.0, 1).unwrap()).unwrap();
        prop_assert!(close(&t.value.to_dense().unwrap(), &w.to_dense().unwrap(), 1e-10));
    }

    #[test]
    fn total_size_is_exact(m in prop::collection::vec(1usize..=1000, 1..=40)) {
        let s = Shape::new(m.clone()).unwrap();
        let expected = m.iter().fold(BigUint::from(1u32), |acc, &x| acc * x);
        prop_assert_eq!(s.total_size(), expected);
    }

    #[test]
    fn basis_picks_one_entry((u, _) in tt_pair(), pick in any::<prop::sample::Index>()) {
        let len = u.shape().total_size_usize().unwrap();
        let m: MultiIndex = u.shape().multi_index(pick.index(len));
        let e = TtTensor::basis(u.shape(), &m).unwrap();
        let lhs = u.hadamard(&e).unwrap();
        let rhs = e.scale(u.entry(&m).unwrap());
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12 * u.norm().max(1e-300));
    }

    #[test]
    fn files_round_trip((u, _) in cp_pair(), binary in any::<bool>()) {
        let data = TensorData::from(u.clone());
        let encoding = if binary { Encoding::Binary } else { Encoding::Text };
        let bytes = TensorFile::from_tensor(&data).encode(encoding).unwrap();
        let back = TensorFile::decode(&bytes).unwrap().into_tensor().unwrap();
        prop_assert_eq!(back, data);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sign_matches_dense_sign(d in 2usize..=5, rank in 1usize..=3, seed in any::<u64>()) {
        let w = TtTensor::from_cp(&separated_cp(3, d, rank, seed).unwrap());
        let policy = TruncationPolicy::new(1e-10, w.rank()).unwrap();
        let (v, report) = hadamard_sign(&w, &policy, &StoppingRule::residual(1e-9, 50), SignMethod::NewtonSchulz).unwrap();
        prop_assert!(report.converged);
        let dense = v.to_dense().unwrap();
        let expected = w.to_dense().unwrap().sign();
        prop_assert!(close(&dense, &expected, 1e-6));
    }
}
