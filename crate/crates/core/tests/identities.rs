use fmorph::verifier::identities::{run_suite, Status, SUITES};
use fmorph::verifier::{catalog, SamplerConfig};
use fmorph::Error;

#[test]
fn all_suites_pass_or_skip() {
    let cfg = SamplerConfig::default().with_count(60).with_seed(3);
    let rows = run_suite("all", &cfg).unwrap();
    assert_eq!(rows.len(), SUITES.len() * catalog().len());
    for r in &rows {
        println!(
            "{:5} {:22} {} {:?} {}",
            r.suite, r.map, r.status, r.max_residual, r.note
        );
    }
    assert!(rows.iter().all(|r| r.status != Status::Fail));
    for s in SUITES {
        assert!(
            rows.iter()
                .any(|r| r.suite == s && r.status == Status::Pass),
            "{s} never ran"
        );
    }
    assert!(rows
        .iter()
        .any(|r| r.suite == "c2" && r.status == Status::Skip));
}

#[test]
fn single_suite_and_unknown_name() {
    let cfg = SamplerConfig::default().with_count(10);
    let rows = run_suite("eq13", &cfg).unwrap();
    assert!(rows.iter().all(|r| r.suite == "eq13"));
    assert!(matches!(run_suite("nope", &cfg), Err(Error::Invalid(_))));
}
