use starcount::bounds::dyadic_sigma_chain;
use starcount::cert::certify_phi;
use starcount::counting::{brute_count_m, sum_sigma, tile_count_m};
use starcount::experiment::{emit_csv, run_experiment, ExperimentConfig};
use starcount::{CountQuery, MatrixL, PhiSpec};

#[test]
fn tile_and_brute_counts_agree_through_public_api() {
    for (l, eps, t) in [("1.6180339887", 0.1, vec![200.0]), ("0.4142,0.7320", 0.05, vec![15.0, 15.0])] {
        let q = CountQuery::new(MatrixL::parse(l).unwrap(), eps, 0.5, t).unwrap();
        assert_eq!(brute_count_m(&q).unwrap().count, tile_count_m(&q).unwrap().count, "{l}");
    }
}

#[test]
fn certified_matrix_has_chain_above_sigma() {
    let l = MatrixL::parse("1.6180339887").unwrap();
    let phi = PhiSpec::Constant { c: 0.3 };
    assert!(certify_phi(&l, &phi, 2000).unwrap().holds);
    let t = [500.0];
    let chain = dyadic_sigma_chain(&l, &t, &phi).unwrap().value;
    assert!(chain >= sum_sigma(&l, &t).unwrap());
}

#[test]
fn experiment_csv_is_independent_of_workers() {
    let text = r#"{"mode":"bhv","seed":11,"grid":{"n":2,"samples":3,"t":[[10,1000],[50,50]]}}"#;
    let mut cfg = ExperimentConfig::from_json(text).unwrap();
    let one = emit_csv(&run_experiment(&cfg).unwrap()).unwrap();
    cfg.workers = 3;
    let three = emit_csv(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(one, three);
    assert!(one.starts_with("mode,seed,m,n,T1,T2,lhs,rhs,ratio,flags\n"));
    assert_eq!(one.lines().count(), 1 + 3 * 2);
}

#[test]
fn bad_configs_exit_with_code_one() {
    for text in [
        r#"{"mode":"kruse","grid":{"samples":2,"t":[10]}}"#,
        r#"{"mode":"kruse","seed":1,"grid":{"samples":2,"t":[]}}"#,
        r#"{"mode":"bhv","seed":1,"grid":{"n":2,"samples":2,"t":[[10,10]]}}"#,
    ] {
        let err = ExperimentConfig::from_json(text).and_then(|c| c.validate()).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{text}");
    }
}
