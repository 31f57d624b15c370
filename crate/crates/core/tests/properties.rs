use proptest::prelude::*;

use recal_core::auc::{adjusted_cdf, implied_auc};
use recal_core::dist::{DiscreteScoreDist, PosteriorCurve, SourceModel, TargetSpec};
use recal_core::eval::{functional_bounds, functional_mean, Functional};
use recal_core::methods::{capped_scaling, fjs_recalibrate, label_shift_correct};
use recal_core::scenario::{FeatureSpec, MethodSelection, Scenario, SourceSpec, TargetSection};
use recal_core::solvers::SolverConfig;

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// (pmf, increasing interior posterior) of equal length.
fn model(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n).prop_map(normalize),
            prop::collection::vec(0.001f64..0.9, n).prop_map(|mut v| {
                v.sort_by(f64::total_cmp);
                v
            }),
        )
    })
}

fn build(probs: &[f64], eta: &[f64], tprobs: &[f64], q: f64) -> (SourceModel, TargetSpec) {
    let support: Vec<f64> = (0..probs.len()).map(|i| i as f64).collect();
    let src = SourceModel::new(
        DiscreteScoreDist::new(support.clone(), probs.to_vec()).unwrap(),
        PosteriorCurve::new(support.clone(), eta.to_vec()).unwrap(),
    )
    .unwrap();
    let tgt = TargetSpec::new(DiscreteScoreDist::new(support, tprobs.to_vec()).unwrap(), q).unwrap();
    (src, tgt)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_lies_in_unit_interval((probs, eta) in model(10)) {
        let (src, _) = build(&probs, &eta, &probs, 0.1);
        let auc = implied_auc(src.feature_dist(), src.posterior()).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        // An increasing calibrated posterior never ranks worse than chance.
        prop_assert!(auc >= 0.5 - 1e-12);
    }

    #[test]
    fn adjusted_cdf_is_strictly_inside((probs, _eta) in model(10)) {
        let d = DiscreteScoreDist::new((0..probs.len()).map(|i| i as f64).collect(), probs).unwrap();
        let g = adjusted_cdf(&d);
        prop_assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn capped_scaling_hits_mean(
        (probs, eta) in model(10),
        q in 0.01f64..0.5,
    ) {
        let (src, tgt) = build(&probs, &eta, &probs, q);
        let r = capped_scaling(&src, &tgt, &SolverConfig::default()).unwrap();
        let mean: f64 = probs.iter().zip(r.posterior.values()).map(|(p, v)| p * v).sum();
        prop_assert!((mean - q).abs() <= 1e-9);
        prop_assert!(r.posterior.values().iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn fjs_hits_mean_and_stays_between_label_shift_bounds(
        (probs, eta) in model(8),
        tw in prop::collection::vec(0.01f64..1.0, 8),
        q in 0.01f64..0.3,
    ) {
        let tprobs = normalize(tw[..probs.len()].to_vec());
        let (src, tgt) = build(&probs, &eta, &tprobs, q);
        let r = fjs_recalibrate(&src, &tgt, &SolverConfig::default()).unwrap();
        let mean: f64 = tprobs.iter().zip(r.posterior.values()).map(|(p, v)| p * v).sum();
        prop_assert!((mean - q).abs() <= 1e-9);
    }

    #[test]
    fn label_shift_is_strictly_increasing((probs, eta) in model(10), q in 0.01f64..0.9) {
        let mut eta = eta;
        eta.dedup();
        let probs = normalize(probs[..eta.len()].to_vec());
        prop_assume!(eta.len() >= 2);
        let (src, tgt) = build(&probs, &eta, &probs, q);
        let r = label_shift_correct(&src, &tgt).unwrap();
        prop_assert!(r.posterior.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sqrt_mean_within_jensen_bounds((probs, eta) in model(10)) {
        let support: Vec<f64> = (0..probs.len()).map(|i| i as f64).collect();
        let d = DiscreteScoreDist::new(support.clone(), probs.clone()).unwrap();
        let c = PosteriorCurve::new(support, eta.clone()).unwrap();
        let q: f64 = probs.iter().zip(&eta).map(|(p, e)| p * e).sum();
        let (lo, hi) = functional_bounds(q, &Functional::Sqrt).unwrap();
        let v = functional_mean(&d, &c, &Functional::Sqrt).unwrap();
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn explicit_scenarios_round_trip((probs, eta) in model(6), q in 0.01f64..0.99) {
        let n = probs.len();
        let sc = Scenario {
            source: SourceSpec::Explicit {
                support: (0..n).map(|i| i as f64 * 0.5).collect(),
                probs: probs.clone(),
                posterior: eta,
            },
            target: TargetSection {
                feature: FeatureSpec::Explicit { probs: probs.iter().rev().copied().collect() },
                prior: q,
            },
            methods: MethodSelection::All,
            functional: Functional::Sqrt,
            solver: SolverConfig::default(),
        };
        let again = Scenario::from_json_str(&sc.to_json_string()).unwrap();
        prop_assert_eq!(&again, &sc);
        prop_assert!(again.resolve().is_ok());
    }
}
