use lohe_core::diagnostics::write_csv;
use lohe_core::harness::{run_scenario, ScenarioConfig};
use std::path::Path;

fn config() -> ScenarioConfig {
    ScenarioConfig::from_json_str(
        r#"{"id": "det", "seed": 17, "dims": [2, 2], "n": 6,
            "couplings": {"00": 1.0, "01": 0.2, "11": 0.1},
            "free_flow": {"kind": "random", "scale": 0.7},
            "init": {"kind": "clustered", "spread": 0.8},
            "dt": 0.005, "horizon": 3.0, "sample_stride": 5}"#,
    )
    .unwrap()
}

fn csv_bytes(cfg: &ScenarioConfig) -> Vec<u8> {
    let (traj, _) = run_scenario(cfg, Path::new(".")).unwrap();
    let mut buf = Vec::new();
    write_csv(&traj.records, &cfg.coupling_set().unwrap(), &mut buf).unwrap();
    buf
}

#[test]
fn identical_config_gives_identical_csv() {
    let cfg = config();
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
}

#[test]
fn csv_is_independent_of_pool_size() {
    let cfg = config();
    let serial = csv_bytes(&cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(pool.install(|| csv_bytes(&cfg)), serial);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = config();
    let again = ScenarioConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap();
    assert_eq!(again, cfg);
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(bundled).unwrap() {
        let cfg = ScenarioConfig::load(entry.unwrap().path()).unwrap();
        assert_eq!(ScenarioConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap(), cfg);
    }
}
