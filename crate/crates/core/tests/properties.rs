use herding_core::analysis::fit_power_law;
use herding_core::engine::{rescale_returns, ReturnSeries};
use herding_core::population::{AgentId, Partition};
use herding_core::voting::{classify, ConsensusParameter, Outcome, VoteTally};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Merge(u32, u32),
    Fragment(u32),
}

fn op(n: u32) -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..n, 0..n).prop_map(|(a, b)| Op::Merge(a, b)),
        1 => (0..n).prop_map(Op::Fragment),
    ]
}

proptest! {
    #[test]
    fn partition_survives_any_operation_sequence(n in 1u32..60, ops in prop::collection::vec(op(60), 0..200)) {
        let mut p = Partition::new_all_singletons(n as usize).unwrap();
        for o in ops {
            match o {
                Op::Merge(a, b) => {
                    let (ga, sa) = p.group_of(AgentId(a % n));
                    let (gb, sb) = p.group_of(AgentId(b % n));
                    if ga == gb {
                        prop_assert!(p.merge_groups(ga, gb).is_err());
                    } else {
                        let g = p.merge_groups(ga, gb).unwrap();
                        prop_assert_eq!(p.size(g).unwrap(), sa + sb);
                        prop_assert!(p.same_group(AgentId(a % n), AgentId(b % n)));
                        // at most one of the old handles can still be live, and only as the merged group
                        prop_assert!(!p.is_live(ga) || !p.is_live(gb));
                    }
                }
                Op::Fragment(a) => {
                    let (g, s) = p.group_of(AgentId(a % n));
                    let groups = p.n_groups();
                    prop_assert_eq!(p.fragment_group(g).unwrap(), s);
                    prop_assert_eq!(p.n_groups(), groups + s - 1);
                }
            }
            p.check_invariants().unwrap();
            prop_assert_eq!(p.checksum(), n as u64);
        }
    }

    #[test]
    fn tail_fit_is_scale_free(values in prop::collection::vec(1.0f64..1e4, 100..400), scale in 0.01f64..100.0) {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        match (fit_power_law(&values, 1.0), fit_power_law(&scaled, scale)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.n_tail, b.n_tail);
                prop_assert!((a.alpha_density - b.alpha_density).abs() < 1e-9 * a.alpha_density);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn rescaling_conserves_full_windows(values in prop::collection::vec(-50i64..50, 0..300), k in 1usize..7) {
        let s = ReturnSeries(values.clone());
        let r = rescale_returns(&s, k).unwrap();
        prop_assert_eq!(r.len(), values.len() / k);
        let kept: i64 = values[..r.len() * k].iter().sum();
        prop_assert_eq!(r.values().iter().sum::<i64>(), kept);
    }

    #[test]
    fn buy_and_sell_are_interchangeable(buy in 0u32..40, sell in 0u32..40, wait in 0u32..40, xv in 0.3334f64..0.99) {
        prop_assume!(buy + sell + wait > 0);
        let x = ConsensusParameter::new(xv).unwrap();
        let a = classify(VoteTally::new(buy, sell, wait), x);
        let b = classify(VoteTally::new(sell, buy, wait), x);
        match (a, b) {
            (Outcome::Fragment, Outcome::Fragment) => {}
            (Outcome::Consensus { len: la, .. }, Outcome::Consensus { len: lb, .. }) => prop_assert_eq!(la, lb),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}
