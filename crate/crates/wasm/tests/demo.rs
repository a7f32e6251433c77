use herding_core::voting::{decision_probabilities, ConsensusParameter};
use herding_wasm::{curve_sizes, decision_curve, meanfield, simulate, MAX_CURVE_SIZE};

#[test]
fn curve_matches_core() {
    let c = decision_curve(0.41, 200).unwrap();
    let x = ConsensusParameter::new(0.41).unwrap();
    for (i, s) in c.sizes().iter().enumerate() {
        let p = decision_probabilities(*s as u32, x);
        assert_eq!(c.fragment()[i], p.fragment);
        assert_eq!(c.trade()[i], p.buy + p.sell);
        assert!((c.fragment()[i] + c.trade()[i] + c.merge()[i] - 1.0).abs() < 1e-12);
    }

    let sizes = curve_sizes(u32::MAX);
    assert_eq!(sizes[0], 1);
    assert_eq!(*sizes.last().unwrap(), MAX_CURVE_SIZE);
    assert!(sizes.windows(2).all(|w| w[0] < w[1]));
    assert!(sizes[..15].windows(2).all(|w| w[1] - w[0] == 1));
    assert_eq!(curve_sizes(1), vec![1]);
    assert!(decision_curve(1.5, 10).is_err());
}

#[test]
fn simulation_summary() {
    let r = simulate(2000, 0.37, 200_000, 3, true, 2).unwrap();
    let p = r.probabilities();
    assert_eq!(p[0], 1.0);
    assert!(p.windows(2).all(|w| w[1] < w[0]));
    assert!(r.values().windows(2).all(|w| w[1] > w[0]));
    assert!(r.trade_fraction() > 0.3 && r.trade_fraction() < 0.7);
    assert!(r.largest_group() >= 1);
    assert_eq!(simulate(2000, 0.37, 200_000, 3, true, 2).unwrap(), r);
}

#[test]
fn meanfield_has_unit_agents() {
    let n = meanfield(50, 0.45).unwrap();
    assert_eq!(n.len(), 50);
    let mass: f64 = n.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    assert!((mass - 50.0).abs() < 1e-8);
    assert!(meanfield(50, 0.2).is_err());
}
