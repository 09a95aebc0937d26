use polarirs::harness::{preset, run_sweep_with_workers, write_csv, RateRecord, Scheme, SimConfig};
use polarirs::scenario::{single_polarized_trial, ClusterSetup};
use polarirs::covariance::ArrayGeometry;

fn config(schemes: Vec<Scheme>, elements: Vec<usize>, trials: usize) -> SimConfig {
    let mut c = preset("fig8").unwrap();
    c.schemes = schemes;
    c.irs_elements = elements;
    c.trials = trials;
    c
}

fn find(records: &[RateRecord], scheme: Scheme, xi: f64, snr_db: f64) -> &RateRecord {
    records.iter().find(|r| r.scheme == scheme && r.xi == xi && r.snr_db == snr_db).expect("record present")
}

#[test]
fn grid_cardinality() {
    let mut c = config(vec![Scheme::IrsNoma, Scheme::NomaDualPol], vec![16], 2);
    c.snr_db = vec![5.0, 15.0];
    c.xi = vec![0.0];
    assert_eq!(run_sweep_with_workers(&c, 1).unwrap().len(), 4);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut c = config(vec![Scheme::IrsNoma, Scheme::Oma, Scheme::NomaSinglePol, Scheme::NomaDualPol], vec![20], 16);
    c.snr_db = vec![0.0, 20.0];
    let one = run_sweep_with_workers(&c, 1).unwrap();
    let eight = run_sweep_with_workers(&c, 8).unwrap();
    assert_eq!(one.len(), eight.len());
    for (a, b) in one.iter().zip(&eight) {
        assert_eq!((a.scheme, a.snr_db, a.xi), (b.scheme, b.snr_db, b.xi));
        for (x, y) in a.user_rates.iter().zip(&b.user_rates) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
        assert_eq!(a.degenerate, b.degenerate);
    }
}

#[test]
fn single_user_oma_is_point_to_point() {
    let mut c = config(vec![Scheme::Oma], vec![1], 25);
    c.user_distances = vec![110.0];
    c.power = vec![1.0];
    c.snr_db = vec![12.0];
    c.xi = vec![0.0];
    let records = run_sweep_with_workers(&c, 1).unwrap();
    assert_eq!(records.len(), 1);

    let array = ArrayGeometry::new(c.antennas, c.spacing).unwrap();
    let clusters: Vec<_> = c.clusters.iter().map(|s| s.geometry()).collect();
    let setup = ClusterSetup::new(&array, &clusters, 0, 2 * c.streams, c.energy_fraction).unwrap();
    let users = c.link_gains(0.5).unwrap();
    let snr = 10f64.powf(1.2);
    let mean = (0..25)
        .map(|t| {
            let h = single_polarized_trial(&setup, 4, 0, &users, c.seed, t).unwrap()[0].gain;
            (1.0 + snr * h).log2()
        })
        .sum::<f64>()
        / 25.0;
    assert!((records[0].sum_rate - mean).abs() < 1e-12);
}

#[test]
fn confidence_interval_shrinks_with_trials() {
    let mut c = config(vec![Scheme::NomaSinglePol], vec![1], 100);
    c.snr_db = vec![20.0];
    c.xi = vec![0.0];
    let small = run_sweep_with_workers(&c, 1).unwrap()[0].ci95;
    c.trials = 400;
    let large = run_sweep_with_workers(&c, 1).unwrap()[0].ci95;
    let ratio = small / large;
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn sic_error_preset_covers_every_curve() {
    let mut c = preset("fig8").unwrap();
    c.trials = 1;
    let records = run_sweep_with_workers(&c, 1).unwrap();
    let expected = c.schemes.len() * c.irs_elements.len() * c.xi.len() * c.snr_db.len() * c.chi.len() * c.rx_antennas.len();
    assert_eq!(records.len(), expected);
    for &scheme in &c.schemes {
        for &xi in &c.xi {
            for &l in &c.irs_elements {
                let mut snrs: Vec<f64> = records.iter().filter(|r| r.scheme == scheme && r.xi == xi && r.elements == l).map(|r| r.snr_db).collect();
                snrs.dedup();
                assert_eq!(snrs, c.snr_db);
            }
        }
    }
    let mut buf = Vec::new();
    write_csv(&records, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), expected + 1);
}

#[test]
fn oma_overtakes_single_polarized_noma_under_sic_errors() {
    let mut c = config(vec![Scheme::IrsNoma, Scheme::Oma, Scheme::NomaSinglePol], vec![100], 100);
    c.xi = vec![0.01];
    c.snr_db = vec![24.0, 30.0];
    let records = run_sweep_with_workers(&c, 1).unwrap();
    for snr in [24.0, 30.0] {
        let irs = find(&records, Scheme::IrsNoma, 0.01, snr).sum_rate;
        let oma = find(&records, Scheme::Oma, 0.01, snr).sum_rate;
        let noma = find(&records, Scheme::NomaSinglePol, 0.01, snr).sum_rate;
        assert!(noma < oma, "{snr} dB: NOMA {noma} vs OMA {oma}");
        assert!(irs > oma && irs > noma, "{snr} dB: IRS {irs}");
    }
}
