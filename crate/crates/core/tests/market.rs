use gmech::generator::BSMarketParams;
use gmech::market::*;
use gmech::Error;

fn params() -> BSMarketParams {
    BSMarketParams::new(0.05, 0.08, 0.2).unwrap()
}

#[test]
fn closed_form_atm_call() {
    let (call, put) = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0);
    assert!((call - 10.450583572185565).abs() < 1e-9);
    assert!((call - put - (100.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-10);
    let (c, _) = black_scholes(120.0, 100.0, 0.0, 1e-9, 1.0);
    assert!((c - 20.0).abs() < 1e-9);
    let (c, _) = black_scholes(80.0, 100.0, 0.0, 1e-4, 1.0);
    assert!(c.abs() < 1e-9);
}

#[test]
fn synthetic_chain_satisfies_parity() {
    let strikes = strike_ladder(70.0, 130.0, 20);
    let chain = synth_chain(params(), 100.0, &strikes, 0.0, 365.0, None).unwrap();
    assert_eq!(chain.rows.len(), 20);
    assert!((chain.tau() - 1.0).abs() < 1e-15);
    for r in &chain.rows {
        let parity = 100.0 - r.strike * (-0.05f64).exp();
        assert!((r.call_mid - r.put_mid - parity).abs() <= 1e-10);
    }
    assert!(monotonicity_anomalies(&chain).is_empty());
}

#[test]
fn chain_csv_round_trip() {
    let chain = synth_chain(params(), 100.0, &[90.0, 100.0, 110.0], 10.0, 100.0, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    chain.write(&path).unwrap();
    let back = load_chain(&path).unwrap();
    assert_eq!(back.rows.len(), 3);
    assert_eq!(back, chain);
}

#[test]
fn chain_parse_errors() {
    let head = "as_of_days,expiry_days,underlying,strike,call_mid,put_mid\n";
    let ok = format!("{head}0,30,100,95,6,1\n0,30,100,100,3,3\n0,30,100,105,1,6\n");
    assert_eq!(parse_chain(&ok).unwrap().rows.len(), 3);

    let dup = format!("{head}0,30,100,95,6,1\n0,30,100,95,6,1\n");
    assert!(matches!(parse_chain(&dup), Err(Error::Invariant(_))));
    let neg = format!("{head}0,30,100,95,-6,1\n");
    assert!(matches!(parse_chain(&neg), Err(Error::Invariant(_))));
    let backwards = format!("{head}30,0,100,95,6,1\n");
    assert!(matches!(parse_chain(&backwards), Err(Error::Invariant(_))));
    let bad = format!("{head}0,30,100,95,6,1\n0,30,100,abc,3,3\n");
    assert!(matches!(parse_chain(&bad), Err(Error::Parse { line: 3, .. })));
    let schema = "as_of,expiry,underlying,strike,call,put\n0,30,100,95,6,1\n";
    assert!(matches!(parse_chain(schema), Err(Error::Schema(_))));
    assert!(matches!(parse_chain(head), Err(Error::EmptyChain)));
}

#[test]
fn noiseless_chain_has_no_violations() {
    let strikes = strike_ladder(80.0, 120.0, 8);
    let chain = synth_chain(params(), 100.0, &strikes, 0.0, 182.0, None).unwrap();
    let report = run_domination_test(&chain, 0.5, 200, 0.2).unwrap();
    assert_eq!(report.tested(), 4 * 8 * 7);
    for f in &report.families {
        assert_eq!(f.tested, f.passed + f.violated);
    }
    assert_eq!(report.violated(), 0, "{:?}", report.violations.first());
    assert_eq!(report.diagonal_max, 0.0);
    assert!(report.passed());
    let again = run_domination_test(&chain, 0.5, 200, 0.2).unwrap();
    assert_eq!(report.to_json().unwrap(), again.to_json().unwrap());
    assert!(report.to_csv().unwrap().starts_with("kind,family,i,j,a,b,c\ncount,Call-Call"));
}

#[test]
fn tiny_mu_produces_violations() {
    let strikes = strike_ladder(80.0, 120.0, 5);
    let chain = synth_chain(params(), 100.0, &strikes, 0.0, 365.0, None).unwrap();
    let report = run_domination_test(&chain, 0.0, 100, 0.2).unwrap();
    assert!(report.violated() > 0);
    assert!(report.violations.iter().all(|v| v.margin < 0.0));
}

#[test]
fn corruptions_are_flagged() {
    let strikes = strike_ladder(70.0, 130.0, 20);
    let clean = synth_chain(params(), 100.0, &strikes, 0.0, 365.0, None).unwrap();
    for seed in 0..50 {
        let mut chain = clean.clone();
        let c = corrupt_monotonicity(&mut chain, seed);
        let anomalies = monotonicity_anomalies(&chain);
        assert!(!anomalies.is_empty(), "seed {seed}: {c:?}");
        let fam = if c.put { Family::PutPut } else { Family::CallCall };
        assert!(anomalies.iter().any(|a| a.family == fam && (a.i == c.row || a.j == c.row)));
    }
}

#[test]
fn audit_preconditions() {
    let chain = synth_chain(params(), 100.0, &[100.0], 0.0, 365.0, None).unwrap();
    assert!(matches!(run_domination_test(&chain, 5.0, 4, 0.2), Err(Error::SchemeNotMonotone(_))));
    let mut empty = chain.clone();
    empty.rows.clear();
    assert!(matches!(run_domination_test(&empty, 0.5, 10, 0.2), Err(Error::EmptyChain)));
}
