use dnl::data::{
    load_csv, make_knapsack, make_knapsack_fraction, read_dataset, scheduling_instance, split, synthesize,
    write_dataset, CsvSchema, SchedulingLoad, SplitSpec,
};
use dnl::model::Constraint;
use dnl::oracle::solve_scheduling;
use proptest::prelude::*;

#[test]
fn generated_series_survives_a_csv_round_trip() {
    let series = synthesize(3, 2, 0.7, 5).unwrap();
    let f = tempfile::NamedTempFile::new().unwrap();
    series.write_csv(f.path()).unwrap();
    let back = load_csv(f.path(), &CsvSchema::default()).unwrap();
    assert_eq!(back.rows, series.rows);
    assert_eq!(back.feature_names, series.feature_names);
    assert!(back.hidden_map.is_none());
}

#[test]
fn custom_column_names() {
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), "when,a,b,cost\nx,1,2,3\ny,4,5,6\n").unwrap();
    let schema = CsvSchema {
        timestamp_column: Some("when".into()),
        feature_columns: vec!["b".into()],
        price_column: "cost".into(),
        group_size: 2,
    };
    let s = load_csv(f.path(), &schema).unwrap();
    assert_eq!(s.rows[1].features, vec![5.0]);
    assert_eq!(s.rows[1].price, 6.0);
    assert_eq!(s.num_groups(), 1);
}

#[test]
fn thirty_days_make_thirty_problem_sets() {
    let s = synthesize(30, 4, 1.0, 0).unwrap();
    assert_eq!(s.rows.len(), 1440);
    let d = make_knapsack(&s, false, 20.0, 0).unwrap();
    assert_eq!(d.len(), 30);
    assert!(synthesize(0, 4, 1.0, 0).is_err());
}

#[test]
fn weighted_fraction_capacity_and_correlation() {
    let s = synthesize(4, 3, 1.0, 2).unwrap();
    let d = make_knapsack_fraction(&s, true, 0.3, 7).unwrap();
    for (ps, group) in d.problem_sets().iter().zip(s.groups()) {
        let Constraint::Knapsack(k) = ps.constraint() else { unreachable!() };
        assert!((k.capacity - 0.3 * k.total_weight()).abs() < 1e-9);
        for (i, row) in group.iter().enumerate() {
            assert_eq!(ps.true_values()[i], k.weights[i] * row.price);
        }
    }
}

#[test]
fn generated_scheduling_instances_are_feasible() {
    for seed in 0..10 {
        let load = SchedulingLoad { machines: 2, jobs: 3, seed };
        let c = scheduling_instance(&load, 48).unwrap();
        assert!(solve_scheduling(&vec![1.0; 48], &c).is_ok());
    }
}

#[test]
fn five_fold_rotation_partitions_the_tests() {
    let folds = split(30, &SplitSpec::default()).unwrap();
    assert_eq!(folds.len(), 5);
    let mut tests: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
    tests.sort();
    assert_eq!(tests, (0..30).collect::<Vec<_>>());
    for f in &folds {
        assert!(f.test.windows(2).all(|w| w[1] == w[0] + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_cache_round_trips(days in 1usize..4, p in 1usize..4, weighted: bool, seed in 0u64..1000, cap in 1.0f64..60.0) {
        let s = synthesize(days, p, 1.3, seed).unwrap();
        let d = make_knapsack(&s, weighted, cap, seed).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset(&d, f.path()).unwrap();
        prop_assert_eq!(read_dataset(f.path()).unwrap(), d);
    }
}
