use wallflip_core::harness::{run_plan, smoke_plan, Suite};

#[test]
fn every_criterion_reports_with_few_replicas() {
    let mut plan = smoke_plan(60);
    plan.stationarity.horizon = 200.0;
    plan.she.dx = 0.02;
    let report = run_plan(&plan, Suite::All).unwrap();
    for c in &report.criteria {
        println!("{}", c.summary_line());
        for w in &c.warnings {
            println!("  warning: {w}");
        }
        assert!(!c.checks.is_empty());
        assert!(c.checks.iter().all(|k| k.value.is_finite()), "{}", c.summary_line());
    }
    let ids: Vec<u32> = report.criteria.iter().map(|c| c.id).collect();
    assert_eq!(ids, (1..=14).collect::<Vec<_>>());
    assert_eq!(report.bracket_table.as_ref().map(Vec::len), Some(3));
}
