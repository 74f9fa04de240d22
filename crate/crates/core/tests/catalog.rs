use poisson_stab::catalog::{self, Status, DEFAULT_SEED};

#[test]
fn every_runnable_entry_meets_its_expectations() {
    let out = catalog::run_expectations(&[], DEFAULT_SEED, &mut || false).unwrap();
    for o in &out {
        assert!(matches!(o.status, Status::Pass | Status::Unrunnable), "{o:?}");
    }
    let unrunnable: Vec<_> = out.iter().filter(|o| o.status == Status::Unrunnable).map(|o| o.name.as_str()).collect();
    assert_eq!(unrunnable, ["unnecessary", "nosmoothing"]);
}

#[test]
fn expectations_are_deterministic() {
    let a = catalog::run_expectations(&["sl2_linear", "rsdr"], DEFAULT_SEED, &mut || false).unwrap();
    let b = catalog::run_expectations(&["sl2_linear", "rsdr"], DEFAULT_SEED, &mut || false).unwrap();
    assert_eq!(a, b);
}

#[test]
fn quotes_are_nonempty_and_reasons_present() {
    for e in catalog::entries() {
        assert!(!e.quote.trim().is_empty(), "{}", e.name);
        assert!(!e.title.is_empty());
    }
}
