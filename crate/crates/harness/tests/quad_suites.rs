use adaug::config::QuadSuiteConfig;
use adaug::quad::{run_quad_suites, QuadReport, Suite};

#[test]
fn propeller_suite_with_l1_beats_plain_ddp() {
    let cfg = QuadSuiteConfig {
        suites: vec!["propeller".into()],
        scenarios: 4,
        ..Default::default()
    };
    let report = run_quad_suites(&cfg, 0).unwrap();
    assert!(report.ddp_converged);
    // the ideal run replays the stored optimal trajectory
    assert!(
        report.ideal_vs_nominal < 1e-6,
        "{}",
        report.ideal_vs_nominal
    );
    let s = report.summary(Suite::Propeller).unwrap();
    assert!(s.median_l1 < s.median_plain);
    assert!(s.median_rms_l1 < s.median_rms_plain);
    assert_eq!(report.rows.len(), 8);
    let width = QuadReport::header().len();
    assert!(report.records().iter().all(|r| r.len() == width));
    assert_eq!(report.summary_records().len(), 1);
}
