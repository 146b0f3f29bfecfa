use gasket::verify::*;
use gasket::Execution;
use proptest::prelude::*;

fn without_timing(mut r: ExperimentReport) -> ExperimentReport {
    r.elapsed_ms = 0;
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn reports_are_deterministic_and_round_trip(seed in any::<u64>(), id in prop::sample::select(vec!["recursion", "dtilde", "norms"])) {
        let cfg = SuiteConfig { max_level: 6, seed };
        let a = without_timing(run_experiment(id, cfg).unwrap());
        let b = without_timing(run_experiment(id, cfg).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ExperimentReport::from_json(&a.to_json()).unwrap(), a);
    }
}

#[test]
fn suite_order_is_independent_of_execution() {
    let ids = select("recursion,b2,riesz").unwrap();
    let cfg = SuiteConfig { max_level: 7, seed: 3 };
    let seq: Vec<_> = run_suite(&ids, cfg, Execution::Sequential).into_iter().map(without_timing).collect();
    let par: Vec<_> = run_suite(&ids, cfg, Execution::Parallel).into_iter().map(without_timing).collect();
    assert_eq!(seq, par);
    assert!(seq.iter().all(|r| r.pass), "{:?}", seq.iter().map(|r| &r.summary).collect::<Vec<_>>());
}

#[test]
fn float_reports_declare_a_tolerance() {
    let r = run_experiment("b2", SuiteConfig::default()).unwrap();
    assert!(matches!(r.tolerance, Tolerance::Absolute { .. }));
    let r = run_experiment("recursion", SuiteConfig { max_level: 6, seed: 0 }).unwrap();
    assert_eq!(r.tolerance, Tolerance::Exact);
}
