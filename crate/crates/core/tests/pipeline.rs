use oia::channel::NetworkConfig;
use oia::harness::csv::{parse_csv, to_csv_string, write_csv, HEADER};
use oia::harness::sweep::{run_sweep, Execution, ExperimentKind, ExperimentSpec};
use oia::harness::trial::{run_trial, trial_artifacts};
use oia::oia::Scheme;
use oia::theory::predicted_exponent;

fn spec(kind: ExperimentKind, config: NetworkConfig, sweep: Vec<f64>, schemes: Vec<Scheme>, trials: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(kind, config, sweep, schemes);
    s.trials = trials;
    s
}

fn base() -> NetworkConfig {
    NetworkConfig::homogeneous(3, 2, 2, 20, 1, 10.0).unwrap()
}

#[test]
fn csv_round_trip() {
    let s = spec(
        ExperimentKind::RateVsSnr,
        base(),
        vec![0.0, 7.5, 15.0],
        vec![Scheme::SvdOia, Scheme::AsOia, Scheme::MaxSnr],
        30,
    );
    let table = run_sweep(&s, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rates.csv");
    write_csv(&table, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, to_csv_string(&table));
    assert!(text.starts_with(HEADER));
    let parsed = parse_csv(&text).unwrap();
    assert_eq!(parsed.len(), table.rows.len());
    for p in &parsed {
        let orig = table.find(&p.scheme, p.sweep, &p.stat).unwrap();
        assert_eq!((p.trials, p.seed, &p.experiment), (orig.trials, orig.seed, &orig.experiment));
        for (a, b) in [(p.mean, orig.mean), (p.stderr, orig.stderr)] {
            assert!((a - b).abs() <= 1e-11 * b.abs(), "{a} vs {b}");
        }
    }
    let keys: Vec<(String, f64, String)> = parsed
        .iter()
        .map(|r| (r.scheme.clone(), r.sweep, r.stat.clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(keys, sorted);
    assert!(text.contains("as-oia,7.5,sum_rate,"));
}

#[test]
fn sum_lif_falls_with_n_except_for_max_snr() {
    let schemes = vec![Scheme::AsOia, Scheme::SvdOia, Scheme::SimoOia, Scheme::MaxSnr];
    let s = spec(
        ExperimentKind::SumLifVsN,
        base(),
        vec![4.0, 16.0, 64.0],
        schemes,
        400,
    );
    let table = run_sweep(&s, Execution::Parallel).unwrap();
    for scheme in [Scheme::AsOia, Scheme::SvdOia, Scheme::SimoOia] {
        let series = table.series(scheme.name(), "sum_lif");
        assert!(series.windows(2).all(|w| w[1].1 < w[0].1), "{scheme}: {series:?}");
    }
    let flat = table.series("max-snr", "sum_lif");
    let spread = flat.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        / flat.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    assert!(spread < 1.15, "{flat:?}");
    // At every N the weight designs keep their order.
    for n in [4.0, 16.0, 64.0] {
        let get = |s: &str| table.find(s, n, "sum_lif").unwrap().mean;
        assert!(get("svd-oia") <= get("as-oia") && get("as-oia") <= get("simo-oia"));
        assert!(get("simo-oia") < get("max-snr"));
    }
}

#[test]
fn svd_leakage_vanishes_once_the_stack_is_wide() {
    let config = NetworkConfig::homogeneous(3, 2, 2, 10, 2, 10.0).unwrap();
    let s = spec(
        ExperimentKind::SumLifVsL,
        config,
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        vec![Scheme::SvdOia, Scheme::AsOia],
        100,
    );
    let table = run_sweep(&s, Execution::Parallel).unwrap();
    let svd = table.series("svd-oia", "sum_lif");
    assert!(svd.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 < 1e-20), "{svd:?}");
    assert!(svd[4].1 < 1e-20 && svd[5].1 < 1e-20, "{svd:?}");
    assert!(table.series("as-oia", "sum_lif")[4].1 > 1e-3);
}

#[test]
fn stderr_shrinks_with_trials() {
    let run = |trials| {
        let s = spec(ExperimentKind::SumLifVsN, base(), vec![10.0], vec![Scheme::AsOia], trials);
        run_sweep(&s, Execution::Parallel).unwrap().rows[0].stderr
    };
    let ratio = run(1600) / run(100);
    assert!((ratio - 0.25).abs() < 0.08, "ratio {ratio}");
}

#[test]
fn interference_free_rate_bounds_oia() {
    let config = NetworkConfig::homogeneous(3, 2, 2, 20, 1, 20.0).unwrap();
    let s = spec(
        ExperimentKind::RateVsN,
        config,
        vec![5.0, 50.0],
        vec![Scheme::SvdOia, Scheme::AsOia, Scheme::IntFree],
        300,
    );
    let table = run_sweep(&s, Execution::Parallel).unwrap();
    for n in [5.0, 50.0] {
        let reference = table.find("int-free", n, "sum_rate").unwrap().mean;
        for scheme in ["svd-oia", "as-oia"] {
            assert!(table.find(scheme, n, "sum_rate").unwrap().mean < reference);
        }
    }
    let svd = table.series("svd-oia", "sum_rate");
    assert!(svd[1].1 > svd[0].1);
}

#[test]
fn cell_dependent_parameters() {
    let config = NetworkConfig::parse("K=3\nM_list=2,3,2\nL=2\nN=12\nS_list=1,2,1\nsnr_db=10\n").unwrap();
    let art = trial_artifacts(&config, &Scheme::ALL, 17).unwrap();
    for (scheme, schedule) in &art.schedules {
        let counts: Vec<usize> = schedule.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 2, 1], "{scheme}");
    }
    let rec = run_trial(&config, &Scheme::ALL, 17).unwrap();
    for r in &rec.records {
        assert_eq!(r.rates.len(), 4);
    }
    // Each cell's exponent counts the streams of the other cells only.
    let exps: Vec<_> = (0..3)
        .map(|i| predicted_exponent(Scheme::AsOia, &config.num_selected, 2, i))
        .collect();
    assert_eq!(exps, vec![Some(3), Some(2), Some(3)]);
    let svd: Vec<_> = (0..3)
        .map(|i| predicted_exponent(Scheme::SvdOia, &config.num_selected, 2, i))
        .collect();
    assert_eq!(svd, vec![Some(2), Some(1), Some(2)]);
}

#[test]
fn ser_sweep_reports_counts() {
    let config = NetworkConfig::homogeneous(3, 2, 2, 20, 1, 20.0).unwrap();
    let mut s = spec(
        ExperimentKind::SerVsN,
        config,
        vec![4.0, 40.0],
        vec![Scheme::SvdOia, Scheme::IntFree],
        200,
    );
    s.block_length = 20;
    let table = run_sweep(&s, Execution::Serial).unwrap();
    for r in table.rows.iter().filter(|r| r.stat == "ser") {
        assert!((0.0..=1.0).contains(&r.mean));
        assert_eq!(r.trials, 200);
    }
    assert!(table.find("svd-oia", 40.0, "ser").unwrap().mean < table.find("svd-oia", 4.0, "ser").unwrap().mean);
}
