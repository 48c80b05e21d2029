use ltr_core::infogeo::{
    detect_bingos, detect_bingos_theta, eta_from_tensor, mobius_coefficient, tensor_from_eta,
    tensor_from_theta, theta_from_tensor, EtaCoords, ThetaCoords, DEFAULT_BINGO_TOL,
};
use ltr_core::synth::{planted_bingo, random_distribution};
use ltr_core::{DenseTensor, Shape};
use proptest::prelude::*;

fn small_shape() -> impl Strategy<Value = Shape> {
    proptest::collection::vec(1usize..=4, 1..=3).prop_map(|d| Shape::new(d).unwrap())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Möbius function of a product of chains from its recursive definition.
fn mobius_recursive(lower: &[usize], upper: &[usize]) -> i64 {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return 0;
    }
    if lower == upper {
        return 1;
    }
    let mut total = 0;
    let ranges: Vec<Vec<usize>> = lower.iter().zip(upper).map(|(&l, &u)| (l..=u).collect()).collect();
    let mut idx = vec![0usize; ranges.len()];
    loop {
        let z: Vec<usize> = idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
        if z != upper {
            total += mobius_recursive(lower, &z);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return -total;
            }
            idx[k] += 1;
            if idx[k] < ranges[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn mobius_matches_recursive_definition() {
    let shape = Shape::new(vec![3, 3, 3]).unwrap();
    let all: Vec<Vec<usize>> = shape.indices().map(|i| i.0).collect();
    for a in &all {
        for b in &all {
            assert_eq!(mobius_coefficient(a, b), mobius_recursive(a, b), "{a:?} {b:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_round_trip(shape in small_shape(), seed in any::<u64>()) {
        let p = random_distribution(&shape, seed);
        let th = theta_from_tensor(&p).unwrap();
        let back = tensor_from_theta(&th, false).unwrap();
        prop_assert!(max_diff(back.data(), p.data()) < 1e-10);
        let renorm = tensor_from_theta(&th, true).unwrap();
        prop_assert!(max_diff(renorm.data(), p.data()) < 1e-10);
        let th2 = theta_from_tensor(&back.normalized().unwrap()).unwrap();
        prop_assert!(max_diff(th2.values(), th.values()) < 1e-10);
        prop_assert!((th.normalizer() - th.root()).abs() < 1e-9);
    }

    #[test]
    fn eta_round_trip(shape in small_shape(), seed in any::<u64>()) {
        let p = random_distribution(&shape, seed);
        let e = eta_from_tensor(&p, true).unwrap();
        prop_assert!((e.root() - 1.0).abs() < 1e-12);
        let back = tensor_from_eta(&e).unwrap();
        prop_assert!(max_diff(back.data(), p.data()) < 1e-10);
        let e2 = eta_from_tensor(&back, true).unwrap();
        prop_assert!(max_diff(e2.values(), e.values()) < 1e-10);
    }

    #[test]
    fn mobius_sum_inverts_tail_sums(shape in small_shape(), seed in any::<u64>()) {
        let p = random_distribution(&shape, seed);
        let e = eta_from_tensor(&p, true).unwrap();
        for i in shape.indices() {
            let s: f64 = shape
                .indices()
                .map(|j| mobius_coefficient(i.as_slice(), j.as_slice()) as f64 * e.get(j.as_slice()).unwrap())
                .sum();
            prop_assert!((s - p.get(i.as_slice()).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn bingo_detectors_agree(dims in proptest::collection::vec(3usize..=5, 2..=3), seed in any::<u64>(), pick in 0usize..100) {
        let shape = Shape::new(dims).unwrap();
        let k = 1 + pick % shape.order();
        let n = shape.dims()[k - 1];
        let rows: Vec<usize> = (2..=n).filter(|i| (pick + i) % 2 == 0).collect();
        let t = planted_bingo(&shape, k, &rows, false, seed).unwrap();
        let a = detect_bingos(&t, k, DEFAULT_BINGO_TOL).unwrap();
        let b = detect_bingos_theta(&t, k, DEFAULT_BINGO_TOL).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.into_iter().collect::<Vec<_>>(), rows);
    }
}

#[test]
fn coordinate_wrappers_reject_bad_values() {
    let e = EtaCoords::from_tensor(DenseTensor::from_dims(&[2], vec![1.0, 1.5]).unwrap());
    assert!(tensor_from_eta(&e).is_err());
    let th = ThetaCoords::from_tensor(DenseTensor::from_dims(&[2], vec![0.0, 1e6]).unwrap());
    assert!(tensor_from_theta(&th, false).is_err());
}
