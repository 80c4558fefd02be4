use std::path::PathBuf;
use std::process::Command;

use datanav::harness::{compare, emit_plots, load_scenario, parse_scenario, run, write_metrics, SchemeId, Termination};
use datanav::par::ExecMode;
use datanav::Error;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn open_text() -> String {
    std::fs::read_to_string(scenario_path("open")).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_datanav"))
}

#[test]
fn bundled_scenarios_load() {
    for name in ["reference", "dense", "open"] {
        let sc = load_scenario(scenario_path(name)).unwrap();
        assert_eq!(sc.name, name);
        assert_eq!(sc.version, 1);
    }
    let sc = load_scenario(scenario_path("reference")).unwrap();
    assert_eq!(sc.obstacles.len(), 5);
    assert_eq!(sc.sensors.len(), 2);
    assert_eq!(sc.planner.horizon, 20);
}

#[test]
fn dbm_power_is_converted() {
    let sc = parse_scenario(&open_text()).unwrap();
    assert!((sc.sensors[0].power - 0.019_952_623_149_688_8).abs() <= 1e-15);
}

fn rejects(text: &str, needle: &str) {
    match parse_scenario(text) {
        Ok(_) => panic!("accepted a scenario that should fail ({needle})"),
        Err(e) => {
            assert!(e.is_validation(), "{e}");
            assert!(e.to_string().contains(needle), "`{e}` does not mention `{needle}`");
        }
    }
}

#[test]
fn invalid_scenarios_are_rejected() {
    let t = open_text();
    rejects(&t.replace("power_dbm = 13.0", ""), "missing power");
    rejects(&t.replace("power_dbm = 13.0", "power_dbm = 13.0\npower_w = 0.02"), "sensor 1");
    rejects(&t.replace("version = 1", "version = 9"), "version");
    rejects(&t.replace("alpha = 2.2", "alpha = 0.5"), "path-loss exponent");
    rejects(&t.replace("sensors = [1]", "sensors = [4]"), "4");
    rejects(
        &t.replace("[[4.5, -1.4], [5.5, -1.4], [5.5, -0.4], [4.5, -0.4]]", "[[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]"),
        "overlaps the start",
    );
    rejects(&t.replace("horizon = 15", "horizon = 0"), "horizon");
    rejects(&t.replace("max = [12.0, 5.0]", "max = [-3.0, 5.0]"), "workspace");
    rejects(&t.replace("name = \"open\"", "name = \"open\"\ncolour = 3"), "colour");
    rejects("version = 1\nname = [", "parse");
}

#[test]
fn scheme_names_round_trip() {
    for id in SchemeId::ALL {
        assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
    }
    assert_eq!("rda+commu".parse::<SchemeId>().unwrap(), SchemeId::RdaCommu);
    assert!("OBCA".parse::<SchemeId>().is_err());
}

#[test]
fn open_run_reaches_goal_and_reports() {
    let sc = load_scenario(scenario_path("open")).unwrap();
    let m = run(&sc, SchemeId::Cld, 0).unwrap();
    assert!(m.reached_goal, "{:?}", m.termination);
    assert_eq!(m.termination, Termination::Goal);
    assert!(m.final_goal_distance <= sc.goal_tolerance);
    assert!(m.min_obstacle_distance >= sc.planner.d_min - 1e-4);
    assert_eq!(m.steps_used + 1, m.trajectory.len());
    assert!(m.total_bits > 0.0);
    assert!(m.max_objective_increase <= 1e-6);
}

#[test]
fn compare_requires_distinct_schemes() {
    let sc = load_scenario(scenario_path("open")).unwrap();
    assert!(matches!(compare(&sc, &[SchemeId::Cld], 0, ExecMode::Sequential), Err(Error::Validation(_))));
    assert!(compare(&sc, &[SchemeId::Cld, SchemeId::Cld], 0, ExecMode::Sequential).is_err());
}

#[test]
fn parallel_and_sequential_compare_agree() {
    let sc = load_scenario(scenario_path("open")).unwrap();
    let schemes = [SchemeId::Rda, SchemeId::RdaCommu];
    let a = compare(&sc, &schemes, 0, ExecMode::Parallel).unwrap();
    let b = compare(&sc, &schemes, 0, ExecMode::Sequential).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let files = write_metrics(&a.runs, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().next().unwrap().contains("bits_sensor_1"));
    let plots = emit_plots(&a, &sc, dir.path()).unwrap();
    assert_eq!(plots.len(), 4);
    let svg = std::fs::read_to_string(dir.path().join("trajectory_RDA.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn cli_exit_codes() {
    let ok = bin().args(["validate", "--scenario"]).arg(scenario_path("open")).args(["--samples", "100", "--points", "2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, open_text().replace("power_dbm = 13.0", "")).unwrap();
    let out = bin().args(["run", "--scenario"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing power"));

    let out = bin().args(["run", "--scheme", "XYZ", "--scenario"]).arg(scenario_path("open")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["run", "--scenario"]).arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let csv = dir.path().join("curve.csv");
    std::fs::write(&csv, "samples,error\n100,0.1\n1000,0.05\n10000,0.025\n").unwrap();
    let out = bin().args(["fit", "--csv"]).arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["b"].as_f64().unwrap() - 2f64.log10()).abs() <= 1e-9);
}

#[test]
fn cli_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scheme", "RDA", "--seed", "3", "--scenario"])
        .arg(scenario_path("open"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.json", "metrics.csv", "timing.json", "trajectory_RDA.svg", "bits.svg", "errors.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["scheme"], "RDA");
    assert_eq!(m["seed"], 3);
    assert!(m.get("timing").is_none());
}
