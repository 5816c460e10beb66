use infmod_core::suite::{run_validation_suite, CheckResult, SuiteConfig, SuiteReport};

#[test]
fn empty_overrides_are_the_defaults() {
    assert_eq!(SuiteConfig::from_toml_str("").unwrap(), SuiteConfig::default());
    assert!(SuiteConfig::from_toml_str("unknown = 1").is_err());
}

#[test]
fn default_suite_passes_and_fault_stays_local() {
    let clean = run_validation_suite(&SuiteConfig::default());
    for c in &clean.checks {
        assert!(c.pass, "{c:?}");
    }

    let broken = run_validation_suite(&SuiteConfig {
        kernel_variance_scale: 1.1,
        ..SuiteConfig::default()
    });
    let failed: Vec<&str> = broken.checks.iter().filter(|c| !c.pass).map(|c| c.check_name.as_str()).collect();
    assert_eq!(failed, ["kernel_moments"]);
    assert_eq!(clean.checks.len(), broken.checks.len());
}

#[test]
fn report_lines_are_machine_readable() {
    let check = |name: &str, pass, value| CheckResult {
        check_name: name.into(),
        pass,
        value,
        threshold: 1e-6,
    };
    let report = SuiteReport {
        checks: vec![check("fixed_point", true, 1.5e-15), check("kernel_moments", false, 0.1)],
    };
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("check_name,pass,value,threshold"));
    assert_eq!(lines.next(), Some("fixed_point,true,1.5e-15,1e-6"));
    assert_eq!(lines.next(), Some("kernel_moments,false,0.1,1e-6"));
}
