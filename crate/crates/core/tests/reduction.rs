use ltr_core::infogeo::{eta_from_tensor, one_body_eta, theta_from_tensor};
use ltr_core::suite::max_abs_diff;
use ltr_core::synth::{random_distribution, rng, uniform_tensor};
use ltr_core::verify::{bingo_mask, max_axis_sum_drift, perturb_in_bingo_space, unchanged_mask};
use ltr_core::{
    best_rank1, certify_projection, kl_divergence, ltr_reduce, numerical_tucker_rank,
    sample_bingo_spec, BingoSpec, BlockRule, CertifyTolerances, DenseTensor, LtrOptions, Shape,
    TuckerRank,
};
use proptest::prelude::*;

fn shape_and_target(max: usize, max_order: usize) -> impl Strategy<Value = (Shape, TuckerRank)> {
    proptest::collection::vec(1usize..=max, 2..=max_order).prop_flat_map(|dims| {
        let ranks: Vec<_> = dims.iter().map(|&n| 1usize..=n).collect();
        (Just(Shape::new(dims).unwrap()), ranks.prop_map(TuckerRank::new))
    })
}

fn reduce(t: &DenseTensor, spec: &BingoSpec) -> DenseTensor {
    ltr_reduce(t, spec, &LtrOptions::default()).unwrap().tensor
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![1]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_bound_holds((shape, target) in shape_and_target(8, 3), seed in any::<u64>()) {
        let t = uniform_tensor(&shape, seed);
        let spec = sample_bingo_spec(&shape, &target, seed).unwrap();
        for rule in [BlockRule::Unfolding, BlockRule::Joint] {
            let out = ltr_reduce(&t, &spec, &LtrOptions { rule, ..Default::default() }).unwrap().tensor;
            let est = numerical_tucker_rank(&out, 1e-8).unwrap();
            for (r, want) in est.ranks.iter().zip(target.ranks()) {
                prop_assert!(r <= want, "{rule:?}: ranks {:?} target {:?}", est.ranks, target);
            }
            prop_assert!(max_axis_sum_drift(&t, &out).unwrap() < 1e-9);
        }
    }

    #[test]
    fn projection_conditions_hold((shape, target) in shape_and_target(4, 4), seed in any::<u64>()) {
        let t = random_distribution(&shape, seed).scaled(7.0);
        let spec = sample_bingo_spec(&shape, &target, seed).unwrap();
        let out = reduce(&t, &spec);

        let mask = bingo_mask(&spec, &shape).unwrap();
        let th = theta_from_tensor(&out.normalized().unwrap()).unwrap();
        let e_in = eta_from_tensor(&t, false).unwrap();
        let e_out = eta_from_tensor(&out, false).unwrap();
        for (off, &m) in mask.iter().enumerate() {
            if m {
                prop_assert!(th.values()[off].abs() < 1e-8);
            } else {
                prop_assert!((e_in.values()[off] - e_out.values()[off]).abs() < 7e-9);
            }
        }
        let keep = unchanged_mask(&spec, &shape).unwrap();
        for (off, &k) in keep.iter().enumerate() {
            if k {
                prop_assert!((out.data()[off] - t.data()[off]).abs() < 1e-12);
            }
        }
        let cert = certify_projection(&t, &out, &spec, &CertifyTolerances::default()).unwrap();
        prop_assert!(cert.pass, "{:?}", cert);
    }

    #[test]
    fn mode_order_is_irrelevant((shape, target) in shape_and_target(4, 4), seed in any::<u64>()) {
        let t = uniform_tensor(&shape, seed);
        let spec = sample_bingo_spec(&shape, &target, seed).unwrap();
        let base = reduce(&t, &spec);
        for order in permutations(shape.order()) {
            let opts = LtrOptions { mode_order: Some(order.clone()), ..Default::default() };
            let out = ltr_reduce(&t, &spec, &opts).unwrap().tensor;
            prop_assert!(max_abs_diff(&out, &base) < 1e-12, "{order:?}");
        }
    }

    #[test]
    fn matrices_use_the_same_rule_either_way((shape, target) in shape_and_target(6, 2), seed in any::<u64>()) {
        let t = uniform_tensor(&shape, seed);
        let spec = sample_bingo_spec(&shape, &target, seed).unwrap();
        let joint = ltr_reduce(&t, &spec, &LtrOptions { rule: BlockRule::Joint, ..Default::default() })
            .unwrap()
            .tensor;
        prop_assert!(max_abs_diff(&joint, &reduce(&t, &spec)) < 1e-14);
    }

    #[test]
    fn rank1_projection_properties(dims in proptest::collection::vec(1usize..=5, 1..=4), seed in any::<u64>(), c in 0.01f64..100.0) {
        let shape = Shape::new(dims).unwrap();
        let t = random_distribution(&shape, seed);
        let (q, f) = best_rank1(&t).unwrap();
        let (qq, _) = best_rank1(&q).unwrap();
        prop_assert!(max_abs_diff(&qq, &q) < 1e-12);
        let (qc, _) = best_rank1(&t.scaled(c)).unwrap();
        for (a, b) in qc.data().iter().zip(q.data()) {
            prop_assert!((a - c * b).abs() <= 1e-12 * c * b);
        }
        prop_assert!((q.total_sum() - 1.0).abs() < 1e-9);
        prop_assert!((f.lambda - 1.0).abs() < 1e-9);
        let ob_t = one_body_eta(&eta_from_tensor(&t, true).unwrap());
        let ob_q = one_body_eta(&eta_from_tensor(&q, false).unwrap());
        for (a, b) in ob_t.iter().flatten().zip(ob_q.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(max_axis_sum_drift(&t, &q).unwrap() < 1e-9);
    }
}

#[test]
fn output_beats_perturbed_bingo_members() {
    let shape = Shape::new(vec![3, 4, 3]).unwrap();
    let mut r = rng(99);
    for seed in 0..5 {
        let t = random_distribution(&shape, seed).scaled(2.0);
        let spec = sample_bingo_spec(&shape, &TuckerRank::new(vec![2, 2, 1]), seed).unwrap();
        let out = reduce(&t, &spec);
        let best = kl_divergence(&t, &out).unwrap();
        for _ in 0..200 {
            let q = perturb_in_bingo_space(&out, &spec, 0.1, &mut r).unwrap();
            assert!(kl_divergence(&t, &q).unwrap() >= best - 1e-9);
        }
    }
}

#[test]
fn joint_rule_is_order_dependent_in_three_modes() {
    let shape = Shape::new(vec![4, 4, 4]).unwrap();
    let t = random_distribution(&shape, 3);
    let spec = BingoSpec { modes: vec![vec![1, 3], vec![1, 2], vec![1, 4]] };
    let run = |order: Vec<usize>| {
        let opts = LtrOptions { mode_order: Some(order), rule: BlockRule::Joint };
        ltr_reduce(&t, &spec, &opts).unwrap().tensor
    };
    assert!(max_abs_diff(&run(vec![1, 2, 3]), &run(vec![3, 2, 1])) > 1e-6);
}

#[test]
fn zero_bearing_input_is_reduced() {
    let shape = Shape::new(vec![5, 4, 3]).unwrap();
    let mut t = uniform_tensor(&shape, 5).into_data();
    for v in t.iter_mut().step_by(3) {
        *v = 0.0;
    }
    let t = DenseTensor::new(shape.clone(), t).unwrap();
    let target = TuckerRank::new(vec![2, 2, 2]);
    let spec = sample_bingo_spec(&shape, &target, 1).unwrap();
    let out = reduce(&t, &spec);
    let est = numerical_tucker_rank(&out, 1e-8).unwrap();
    assert!(est.ranks.iter().all(|&r| r <= 2));
    assert!(max_axis_sum_drift(&t, &out).unwrap() < 1e-9);
}
